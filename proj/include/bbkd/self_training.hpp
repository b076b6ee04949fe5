#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bbkd/bridge.hpp"
#include "bbkd/dataset.hpp"
#include "bbkd/denoiser.hpp"
#include "bbkd/metrics.hpp"

namespace bbkd {

struct TrainConfig {
  int train_steps = 2000;
  int batch_size = 8;
  double learning_rate = 1e-3;
  /// Learning rate at the last step as a fraction of `learning_rate`
  /// (cosine decay); 1 keeps it constant.
  double final_lr_fraction = 0.1;
  std::uint64_t seed = 0;
  int T = 50;
  int stride = 1;
  int eval_every = 100;  // progress-report interval, in steps
  DenoiserConfig denoiser;
  std::filesystem::path manifest_path;

  void validate() const;
};

struct LossPoint {
  int step = 0;
  double loss = 0.0;
};

struct TrainingRecord {
  std::vector<LossPoint> losses;  // one entry per optimizer step
  std::string checkpoint_id;      // content hash of the final parameters
  double wall_clock_seconds = 0.0;
  TrainConfig config;
};

/// Receives (phase, step, loss) every `eval_every` steps.
using ProgressFn = std::function<void(std::string_view, int, double)>;

struct TrainResult {
  DenoiserParams params;
  TrainingRecord record;
};

/// Adam-optimized x0 regression on bridge training pairs drawn uniformly from
/// the items carrying one of `roles`. Starts from `init` when given,
/// otherwise from init_params(cfg.denoiser, seed).
TrainResult train_model(const DatasetManifest& manifest, const std::vector<Role>& roles,
                        const TrainConfig& cfg, const std::optional<DenoiserParams>& init = {},
                        const ProgressFn& progress = {});

/// Reverse-chain translation of one CBCT, clipped to the [-1, 1] image range.
Tensor translate_image(const DenoiserParams& params, const Tensor& cbct,
                       const BridgeSchedule& sched, int stride, Rng& rng);

/// Runs the teacher on every unpaired CBCT, writes the pseudo-CT images
/// under out_dir/pseudo and returns a manifest extended with
/// pseudo-labeled items.
DatasetManifest generate_pseudo_labels(const DenoiserParams& teacher,
                                       const DatasetManifest& manifest, const TrainConfig& cfg,
                                       const std::filesystem::path& out_dir);

/// Translates every test CBCT with `params` and scores it against its CT.
/// When `save_dir` is non-empty the translations are written there as IMGF.
MetricsReport evaluate_model(const DenoiserParams& params, const DatasetManifest& manifest,
                             const TrainConfig& cfg, const std::string& model_id,
                             const std::filesystem::path& save_dir = {});

/// Scores the raw test CBCTs against their CTs.
MetricsReport evaluate_input(const DatasetManifest& manifest);

struct SelfTrainingSummary {
  DenoiserParams teacher;
  DenoiserParams student;
  TrainingRecord teacher_record;
  TrainingRecord student_record;
  DatasetManifest pseudo_manifest;
  std::vector<MetricsReport> reports;  // Input, Teacher, Student
};

/// Teacher on paired data -> pseudo-labels for unpaired CBCTs -> student
/// initialized from the teacher and trained on paired + pseudo-labeled data
/// -> held-out evaluation. Artifacts are written under out_dir.
SelfTrainingSummary run_self_training(const DatasetManifest& manifest,
                                      const TrainConfig& teacher_cfg,
                                      const TrainConfig& student_cfg,
                                      const std::filesystem::path& out_dir,
                                      const ProgressFn& progress = {});

std::string checkpoint_id(const DenoiserParams& params);

std::string record_to_json(const TrainingRecord& record);
std::string report_to_json(const std::vector<MetricsReport>& rows);
std::string summary_to_json(const SelfTrainingSummary& summary);

}  // namespace bbkd
