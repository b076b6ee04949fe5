#pragma once

#include <filesystem>

#include "bbkd/config.hpp"
#include "bbkd/dataset.hpp"
#include "bbkd/self_training.hpp"

namespace bbkd {

/// Where a pipeline run keeps its generated data set.
std::filesystem::path data_dir(const PipelineConfig& cfg);

/// Builds the phantom data set under data_dir(cfg).
DatasetManifest generate_data(const PipelineConfig& cfg);

/// Data generation followed by the full self-training workflow. Writes
/// config.json plus all phase artifacts under cfg.out_dir.
SelfTrainingSummary run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress = {});

}  // namespace bbkd
