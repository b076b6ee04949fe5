#include "bbkd/pipeline.hpp"

#include "bbkd/io.hpp"

namespace bbkd {

std::filesystem::path data_dir(const PipelineConfig& cfg) { return cfg.out_dir / "data"; }

DatasetManifest generate_data(const PipelineConfig& cfg) {
  cfg.validate();
  return build_dataset(cfg.n_paired, cfg.n_unpaired, cfg.n_test, cfg.image_size, cfg.degradation,
                       cfg.seed, data_dir(cfg));
}

SelfTrainingSummary run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  write_file(cfg.out_dir / "config.json", config_to_json(cfg));
  const DatasetManifest manifest = generate_data(cfg);
  return run_self_training(manifest, cfg.teacher, cfg.student, cfg.out_dir, progress);
}

}  // namespace bbkd
