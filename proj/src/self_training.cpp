#include "bbkd/self_training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <numbers>

#include "bbkd/error.hpp"
#include "bbkd/io.hpp"
#include "bbkd/optim.hpp"

namespace bbkd {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

// Stream ids for the independent random streams derived from a config seed.
constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kPseudoStream = 0x95e0;
constexpr std::uint64_t kEvalStream = 0xe7a1;

struct Pair {
  Tensor ct;
  Tensor cbct;
};

std::vector<Pair> load_pairs(const DatasetManifest& manifest, const std::vector<Role>& roles) {
  std::vector<Pair> pairs;
  for (const ManifestItem& it : manifest.items) {
    if (std::find(roles.begin(), roles.end(), it.role) == roles.end()) continue;
    if (it.ct.empty()) continue;
    pairs.push_back({read_imgf(it.ct), read_imgf(it.cbct)});
  }
  return pairs;
}

double cosine_lr(const TrainConfig& cfg, int step) {
  if (cfg.train_steps <= 1) return cfg.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(cfg.train_steps - 1);
  const double lo = cfg.learning_rate * cfg.final_lr_fraction;
  return lo + 0.5 * (cfg.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename Fn>
auto run_phase(const char* phase, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("phase ") + phase + ": " + e.what());
  }
}

ordered_json config_json(const TrainConfig& c) {
  return {{"train_steps", c.train_steps},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"seed", c.seed},
          {"T", c.T},
          {"stride", c.stride},
          {"eval_every", c.eval_every},
          {"denoiser",
           {{"base_channels", c.denoiser.base_channels},
            {"num_blocks", c.denoiser.num_blocks},
            {"time_embed_dim", c.denoiser.time_embed_dim},
            {"image_channels", c.denoiser.image_channels}}}};
}

ordered_json number_or_inf(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json("inf");
}

ordered_json report_json(const MetricsReport& r) {
  ordered_json j;
  j["model"] = r.model_id;
  j["dataset"] = r.dataset_id;
  j["peak"] = r.peak;
  j["ssim_window"] = {{"size", r.ssim_options.window},
                      {"sigma", r.ssim_options.sigma},
                      {"dynamic_range", r.ssim_options.dynamic_range}};
  j["mse"] = r.mean_mse;
  j["ssim"] = r.mean_ssim;
  j["psnr_db"] = number_or_inf(r.mean_psnr_db);
  j["psnr_excluded"] = r.psnr_excluded;
  ordered_json images = ordered_json::array();
  for (const auto& m : r.images)
    images.push_back({{"id", m.id}, {"mse", m.mse}, {"ssim", m.ssim}, {"psnr_db", number_or_inf(m.psnr_db)}});
  j["images"] = std::move(images);
  return j;
}

ordered_json record_json(const TrainingRecord& r) {
  ordered_json j;
  j["checkpoint_id"] = r.checkpoint_id;
  j["config"] = config_json(r.config);
  ordered_json losses = ordered_json::array();
  for (const auto& p : r.losses) losses.push_back({p.step, p.loss});
  j["losses"] = std::move(losses);
  return j;
}

}  // namespace

void TrainConfig::validate() const {
  require(train_steps >= 0, ErrorKind::Config, "train_steps must be >= 0");
  require(batch_size >= 1, ErrorKind::Config, "batch_size must be >= 1");
  require(learning_rate > 0.0, ErrorKind::Config, "learning_rate must be positive");
  require(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0, ErrorKind::Config,
          "final_lr_fraction must lie in (0, 1]");
  require(T >= 2, ErrorKind::Config, "T must be >= 2");
  require(stride >= 1 && T % stride == 0, ErrorKind::Config, "stride must divide T");
  require(eval_every >= 1, ErrorKind::Config, "eval_every must be >= 1");
  denoiser.validate();
}

std::string checkpoint_id(const DenoiserParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : encode_checkpoint(params)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainResult train_model(const DatasetManifest& manifest, const std::vector<Role>& roles,
                        const TrainConfig& cfg, const std::optional<DenoiserParams>& init,
                        const ProgressFn& progress) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::vector<Pair> pairs = load_pairs(manifest, roles);
  require(!pairs.empty(), ErrorKind::Training, "train_model: no usable pairs for the selected roles");

  TrainResult result;
  result.params = init ? *init : init_params(cfg.denoiser, cfg.seed);
  if (init) infer_config(result.params);
  result.record.config = cfg;

  const BridgeSchedule sched = make_schedule(cfg.T);
  Rng rng = Rng(cfg.seed).split(kTrainStream);
  AdamState adam;
  const auto n = static_cast<std::int64_t>(pairs.size());
  for (int step = 0; step < cfg.train_steps; ++step) {
    double loss_value = 0.0;
    GradientMap grads;
    try {
      Graph graph;
      const DenoiserVars vars = register_params(graph, result.params);
      Var total{};
      for (int b = 0; b < cfg.batch_size; ++b) {
        const Pair& p = pairs[static_cast<std::size_t>(rng.uniform_int(0, n - 1))];
        const TrainingPair tp = make_training_pair(p.ct, p.cbct, sched, rng);
        Var pred = predict_x0(graph, vars, graph.constant(tp.p_t), tp.t);
        Var l = mse_loss(pred, graph.constant(tp.target));
        total = b == 0 ? l : add(total, l);
      }
      Var loss = scale(total, 1.0 / cfg.batch_size);
      loss_value = loss.value().item();
      grads = graph.backward(loss);
      adam_step(result.params, grads, adam, {cosine_lr(cfg, step), 0.9, 0.999, 1e-8});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      fail(ErrorKind::Training, "non-finite values at training step " + std::to_string(step) +
                                    ": " + e.what());
    }
    require(std::isfinite(loss_value), ErrorKind::Training,
            "non-finite loss at training step " + std::to_string(step));
    result.record.losses.push_back({step, loss_value});
    if (progress && ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.train_steps))
      progress("train", step + 1, loss_value);
  }

  result.record.checkpoint_id = checkpoint_id(result.params);
  result.record.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

Tensor translate_image(const DenoiserParams& params, const Tensor& cbct,
                       const BridgeSchedule& sched, int stride, Rng& rng) {
  const PredictX0 predictor = [&params](const Tensor& p_t, int t) {
    return predict_x0(params, p_t, t);
  };
  Tensor out = sample_translation(cbct, predictor, sched, rng, stride);
  for (auto& v : out.data()) v = std::clamp(v, -1.0, 1.0);
  return out;
}

DatasetManifest generate_pseudo_labels(const DenoiserParams& teacher,
                                       const DatasetManifest& manifest, const TrainConfig& cfg,
                                       const fs::path& out_dir) {
  cfg.validate();
  const BridgeSchedule sched = make_schedule(cfg.T);
  const Rng base = Rng(cfg.seed).split(kPseudoStream);
  DatasetManifest out = manifest;
  std::erase_if(out.items, [](const ManifestItem& it) { return it.role == Role::PseudoLabeled; });

  std::size_t index = 0;
  for (const ManifestItem* src : manifest.with_role(Role::Unpaired)) {
    Rng rng = base.split(index);
    const Tensor pseudo = translate_image(teacher, read_imgf(src->cbct), sched, cfg.stride, rng);
    char name[32];
    std::snprintf(name, sizeof name, "pseudo_%04zu", index);
    ManifestItem item;
    item.id = name;
    item.role = Role::PseudoLabeled;
    item.phantom_seed = src->phantom_seed;
    item.ct = out_dir / "pseudo" / (item.id + ".imgf");
    item.cbct = src->cbct;
    item.source = src->id;
    write_imgf(pseudo, item.ct);
    out.items.push_back(std::move(item));
    ++index;
  }
  return out;
}

MetricsReport evaluate_model(const DenoiserParams& params, const DatasetManifest& manifest,
                             const TrainConfig& cfg, const std::string& model_id,
                             const fs::path& save_dir) {
  cfg.validate();
  const BridgeSchedule sched = make_schedule(cfg.T);
  const Rng base = Rng(cfg.seed).split(kEvalStream);
  std::vector<Tensor> preds, truths;
  std::vector<std::string> ids;
  std::size_t index = 0;
  for (const ManifestItem* it : manifest.with_role(Role::Test)) {
    Rng rng = base.split(index++);
    preds.push_back(translate_image(params, read_imgf(it->cbct), sched, cfg.stride, rng));
    truths.push_back(read_imgf(it->ct));
    ids.push_back(it->id);
    if (!save_dir.empty()) write_imgf(preds.back(), save_dir / (it->id + ".imgf"));
  }
  return evaluate_pairs(preds, truths, ids, "test", model_id);
}

MetricsReport evaluate_input(const DatasetManifest& manifest) {
  std::vector<Tensor> preds, truths;
  std::vector<std::string> ids;
  for (const ManifestItem* it : manifest.with_role(Role::Test)) {
    preds.push_back(read_imgf(it->cbct));
    truths.push_back(read_imgf(it->ct));
    ids.push_back(it->id);
  }
  return evaluate_pairs(preds, truths, ids, "test", "Input");
}

SelfTrainingSummary run_self_training(const DatasetManifest& manifest,
                                      const TrainConfig& teacher_cfg,
                                      const TrainConfig& student_cfg, const fs::path& out_dir,
                                      const ProgressFn& progress) {
  teacher_cfg.validate();
  student_cfg.validate();
  require(teacher_cfg.T == student_cfg.T, ErrorKind::Config,
          "teacher and student must share the diffusion length T");
  require(manifest.count(Role::Paired) > 0 && manifest.count(Role::Test) > 0, ErrorKind::Training,
          "self-training needs paired and test items");

  auto phase_progress = [&](const char* phase) -> ProgressFn {
    if (!progress) return {};
    return [&progress, phase](std::string_view, int step, double loss) { progress(phase, step, loss); };
  };

  SelfTrainingSummary s;
  TrainResult teacher = run_phase("teacher", [&] {
    auto r = train_model(manifest, {Role::Paired}, teacher_cfg, std::nullopt, phase_progress("teacher"));
    save_checkpoint(r.params, out_dir / "teacher.bbkd");
    write_file(out_dir / "teacher_record.json", record_to_json(r.record));
    return r;
  });
  s.pseudo_manifest = run_phase("pseudo-label", [&] {
    DatasetManifest m = generate_pseudo_labels(teacher.params, manifest, teacher_cfg, out_dir);
    save_manifest(m, out_dir / "manifest_pseudo.json");
    return m;
  });
  TrainResult student = run_phase("student", [&] {
    auto r = train_model(s.pseudo_manifest, {Role::Paired, Role::PseudoLabeled}, student_cfg,
                         teacher.params, phase_progress("student"));
    save_checkpoint(r.params, out_dir / "student.bbkd");
    write_file(out_dir / "student_record.json", record_to_json(r.record));
    return r;
  });
  s.reports = run_phase("evaluate", [&] {
    std::vector<MetricsReport> rows;
    rows.push_back(evaluate_input(manifest));
    rows.push_back(evaluate_model(teacher.params, manifest, teacher_cfg, "Teacher",
                                  out_dir / "eval" / "teacher"));
    rows.push_back(evaluate_model(student.params, manifest, student_cfg, "Student",
                                  out_dir / "eval" / "student"));
    write_file(out_dir / "report.json", report_to_json(rows));
    write_file(out_dir / "report.txt", render_table(rows));
    return rows;
  });

  s.teacher = std::move(teacher.params);
  s.student = std::move(student.params);
  s.teacher_record = std::move(teacher.record);
  s.student_record = std::move(student.record);
  write_file(out_dir / "summary.json", summary_to_json(s));
  return s;
}

std::string record_to_json(const TrainingRecord& record) {
  return record_json(record).dump(2) + "\n";
}

std::string report_to_json(const std::vector<MetricsReport>& rows) {
  ordered_json j;
  j["columns"] = {"MSE", "SSIM", "PSNR"};
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) arr.push_back(report_json(r));
  j["rows"] = std::move(arr);
  return j.dump(2) + "\n";
}

std::string summary_to_json(const SelfTrainingSummary& s) {
  ordered_json j;
  auto model = [](const TrainingRecord& r, const char* file) {
    ordered_json m;
    m["checkpoint"] = file;
    m["checkpoint_id"] = r.checkpoint_id;
    m["steps"] = r.losses.size();
    m["final_loss"] = r.losses.empty() ? ordered_json(nullptr) : ordered_json(r.losses.back().loss);
    return m;
  };
  j["teacher"] = model(s.teacher_record, "teacher.bbkd");
  j["student"] = model(s.student_record, "student.bbkd");
  j["n_paired"] = s.pseudo_manifest.count(Role::Paired);
  j["n_pseudo_labeled"] = s.pseudo_manifest.count(Role::PseudoLabeled);
  j["n_test"] = s.pseudo_manifest.count(Role::Test);
  ordered_json rows = ordered_json::array();
  for (const auto& r : s.reports)
    rows.push_back({{"model", r.model_id}, {"mse", r.mean_mse}, {"ssim", r.mean_ssim},
                    {"psnr_db", number_or_inf(r.mean_psnr_db)}});
  j["reports"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace bbkd
