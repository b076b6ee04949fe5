#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <optional>
#include <string>

#include "bbkd/config.hpp"
#include "bbkd/error.hpp"
#include "bbkd/io.hpp"
#include "bbkd/pipeline.hpp"
#include "bbkd/platform.hpp"

namespace fs = std::filesystem;
using namespace bbkd;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON pipeline configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the configured seed");
  cmd->add_option("--out-dir", o.out_dir, "Override the configured output directory");
}

PipelineConfig resolve(const CommonOptions& o) {
  PipelineConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  cfg.propagate();
  cfg.validate();
  return cfg;
}

void progress(std::string_view phase, int step, double loss) {
  std::fprintf(stderr, "[%.*s] step %d loss %.6f\n", static_cast<int>(phase.size()), phase.data(), step, loss);
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

void train_phase(const PipelineConfig& cfg, const DatasetManifest& manifest, const std::vector<Role>& roles,
                 const TrainConfig& tc, const std::optional<DenoiserParams>& init, const std::string& name) {
  TrainResult r = train_model(manifest, roles, tc, init, [&](std::string_view, int step, double loss) {
    progress(name, step, loss);
  });
  save_checkpoint(r.params, cfg.out_dir / (name + ".bbkd"));
  write_file(cfg.out_dir / (name + "_record.json"), record_to_json(r.record));
  std::fprintf(stderr, "%s: %d steps in %.1f s\n", name.c_str(), tc.train_steps, r.record.wall_clock_seconds);
  std::printf("%s\n", (cfg.out_dir / (name + ".bbkd")).string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Brownian-bridge CBCT-to-CT translation with teacher/student self-training"};
  app.require_subcommand(1);

  CommonOptions gen_o, teacher_o, pseudo_o, student_o, self_o, translate_o, eval_o;
  std::string manifest_path, teacher_path, checkpoint_path, input_path, output_path, pgm_path;
  std::string pred_dir, truth_dir, model_id = "Model";

  auto* gen = app.add_subcommand("gen-data", "Generate the phantom CT/CBCT data set");
  add_common(gen, gen_o);

  auto* teacher = app.add_subcommand("train-teacher", "Train the teacher on paired data");
  add_common(teacher, teacher_o);
  teacher->add_option("--manifest", manifest_path, "Data manifest (default: <out-dir>/data/manifest.json)");

  auto* pseudo = app.add_subcommand("pseudo-label", "Translate unpaired CBCTs with the teacher");
  add_common(pseudo, pseudo_o);
  pseudo->add_option("--manifest", manifest_path, "Data manifest (default: <out-dir>/data/manifest.json)");
  pseudo->add_option("--teacher", teacher_path, "Teacher checkpoint (default: <out-dir>/teacher.bbkd)");

  auto* student = app.add_subcommand("train-student", "Train the student from the teacher on paired + pseudo-labeled data");
  add_common(student, student_o);
  student->add_option("--manifest", manifest_path, "Pseudo-labeled manifest (default: <out-dir>/manifest_pseudo.json)");
  student->add_option("--teacher", teacher_path, "Teacher checkpoint (default: <out-dir>/teacher.bbkd)");

  auto* self = app.add_subcommand("self-train", "Run data generation and the full teacher/student workflow");
  add_common(self, self_o);

  auto* translate = app.add_subcommand("translate", "Translate one IMGF image through a checkpoint");
  add_common(translate, translate_o);
  translate->add_option("--checkpoint", checkpoint_path, "BBKD1 checkpoint")->required();
  translate->add_option("--input", input_path, "Input CBCT (IMGF)")->required();
  translate->add_option("--output", output_path, "Output image (IMGF)")->required();
  translate->add_option("--pgm", pgm_path, "Also export a 16-bit PGM");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  add_common(evaluate, eval_o);
  evaluate->add_option("--pred-dir", pred_dir, "Directory of predicted IMGF images")->required();
  evaluate->add_option("--truth-dir", truth_dir, "Directory of ground-truth IMGF images")->required();
  evaluate->add_option("--model-id", model_id, "Row label in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen) {
      const PipelineConfig cfg = resolve(gen_o);
      generate_data(cfg);
      std::printf("%s\n", (data_dir(cfg) / "manifest.json").string().c_str());
    } else if (*teacher) {
      const PipelineConfig cfg = resolve(teacher_o);
      const DatasetManifest m = load_manifest(or_default(manifest_path, data_dir(cfg) / "manifest.json"));
      train_phase(cfg, m, {Role::Paired}, cfg.teacher, std::nullopt, "teacher");
    } else if (*pseudo) {
      const PipelineConfig cfg = resolve(pseudo_o);
      const DatasetManifest m = load_manifest(or_default(manifest_path, data_dir(cfg) / "manifest.json"));
      const DenoiserParams t = load_checkpoint(or_default(teacher_path, cfg.out_dir / "teacher.bbkd"));
      const DatasetManifest out = generate_pseudo_labels(t, m, cfg.teacher, cfg.out_dir);
      save_manifest(out, cfg.out_dir / "manifest_pseudo.json");
      std::printf("%s\n", (cfg.out_dir / "manifest_pseudo.json").string().c_str());
    } else if (*student) {
      const PipelineConfig cfg = resolve(student_o);
      const DatasetManifest m = load_manifest(or_default(manifest_path, cfg.out_dir / "manifest_pseudo.json"));
      const DenoiserParams t = load_checkpoint(or_default(teacher_path, cfg.out_dir / "teacher.bbkd"));
      train_phase(cfg, m, {Role::Paired, Role::PseudoLabeled}, cfg.student, t, "student");
    } else if (*self) {
      const PipelineConfig cfg = resolve(self_o);
      const SelfTrainingSummary s = run_pipeline(cfg, progress);
      std::printf("%s", render_table(s.reports).c_str());
    } else if (*translate) {
      const PipelineConfig cfg = resolve(translate_o);
      const DenoiserParams params = load_checkpoint(checkpoint_path);
      Rng rng = Rng(cfg.seed).split(0x7a5);
      const Tensor out = translate_image(params, read_imgf(input_path), make_schedule(cfg.T), cfg.stride, rng);
      write_imgf(out, output_path);
      if (!pgm_path.empty()) export_pgm(out, pgm_path);
      std::printf("%s\n", output_path.c_str());
    } else if (*evaluate) {
      const PipelineConfig cfg = resolve(eval_o);
      std::map<std::string, fs::path> preds;
      for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_regular_file() && e.path().extension() == ".imgf") preds[e.path().stem().string()] = e.path();
      std::vector<Tensor> p, t;
      std::vector<std::string> ids;
      for (const auto& [id, path] : preds) {
        const fs::path truth = fs::path(truth_dir) / (id + ".imgf");
        require(fs::exists(truth), ErrorKind::Io, "no ground truth for " + id + " in " + truth_dir);
        p.push_back(read_imgf(path));
        t.push_back(read_imgf(truth));
        ids.push_back(id);
      }
      require(!ids.empty(), ErrorKind::InvalidArgument, "no .imgf predictions in " + pred_dir);
      const MetricsReport r = evaluate_pairs(p, t, ids, fs::path(truth_dir).filename().string(), model_id);
      write_file(cfg.out_dir / "report.json", report_to_json({r}));
      write_file(cfg.out_dir / "report.txt", render_table({r}));
      std::printf("%s", render_table({r}).c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
