#pragma once

#include "valuerank/analytics.hpp"
#include "valuerank/backends.hpp"
#include "valuerank/classifier.hpp"
#include "valuerank/elicitation.hpp"
#include "valuerank/error.hpp"
#include "valuerank/ingest.hpp"
#include "valuerank/label_cache.hpp"
#include "valuerank/random.hpp"
#include "valuerank/ranker.hpp"
#include "valuerank/service.hpp"
#include "valuerank/session.hpp"
#include "valuerank/util.hpp"
#include "valuerank/values.hpp"
