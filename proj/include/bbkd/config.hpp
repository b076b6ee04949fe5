#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "bbkd/phantom.hpp"
#include "bbkd/self_training.hpp"

namespace bbkd {

/// Everything one run of the CLI needs. Teacher and student share T and
/// stride; their seeds are derived from `seed`.
struct PipelineConfig {
  std::size_t image_size = 32;
  int T = 50;
  int stride = 1;
  std::size_t n_paired = 100;
  std::size_t n_unpaired = 300;
  std::size_t n_test = 50;
  DegradationConfig degradation;
  TrainConfig teacher;
  TrainConfig student;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/default";

  /// Re-derives the per-phase seeds and copies T/stride into the phase configs.
  void propagate();
  void validate() const;
};

PipelineConfig default_config();

/// Parses JSON text; missing keys take defaults, unknown keys are rejected.
/// Errors carry the line/column (syntax) or the dotted field path (values).
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

std::string config_to_json(const PipelineConfig& cfg);

}  // namespace bbkd
