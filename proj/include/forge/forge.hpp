#pragma once

// Everything in one include.

#include "forge/config.hpp"
#include "forge/dataset_io.hpp"
#include "forge/eval_metrics.hpp"
#include "forge/expression_engine.hpp"
#include "forge/historic_filters.hpp"
#include "forge/ingest_tiling.hpp"
#include "forge/llm_enhancer.hpp"
#include "forge/pipeline.hpp"
#include "forge/rle.hpp"
#include "forge/source_manifest.hpp"
#include "forge/target_graph.hpp"
