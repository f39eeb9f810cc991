#pragma once

#include "tokshap/datastore.hpp"
#include "tokshap/embedding.hpp"
#include "tokshap/error.hpp"
#include "tokshap/eval.hpp"
#include "tokshap/hash.hpp"
#include "tokshap/knn.hpp"
#include "tokshap/pipeline.hpp"
#include "tokshap/report.hpp"
#include "tokshap/shapley.hpp"
#include "tokshap/text.hpp"
