#include "bbkd/config.hpp"

#include <json.hpp>
#include <set>
#include <type_traits>

#include "bbkd/error.hpp"
#include "bbkd/io.hpp"
#include "bbkd/rng.hpp"

namespace bbkd {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kTeacherSeedStream = 1;
constexpr std::uint64_t kStudentSeedStream = 2;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads an object field by field, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), ErrorKind::Config,
            (path_.empty() ? std::string("config") : path_) + ": expected a JSON object");
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T>) {
      const bool ok = std::is_unsigned_v<T> ? it->is_number_unsigned() : it->is_number_integer();
      require(ok, ErrorKind::Config,
              join(path_, key) + (std::is_unsigned_v<T> ? ": expected a non-negative integer"
                                                         : ": expected an integer"));
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::Config, join(path_, key) + ": wrong type (" + it->type_name() + ")");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.contains(it.key()), ErrorKind::Config, join(path_, it.key()) + ": unknown key");
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool cond, const std::string& field, const std::string& rule) {
  require(cond, ErrorKind::Config, field + ": " + rule);
}

void read_denoiser(const json& j, const std::string& path, DenoiserConfig& d) {
  ObjectReader r(j, path);
  r.read("base_channels", d.base_channels);
  r.read("num_blocks", d.num_blocks);
  r.read("time_embed_dim", d.time_embed_dim);
  r.read("image_channels", d.image_channels);
  r.finish();
}

void read_train(const json& j, const std::string& path, TrainConfig& t) {
  ObjectReader r(j, path);
  r.read("train_steps", t.train_steps);
  r.read("batch_size", t.batch_size);
  r.read("learning_rate", t.learning_rate);
  r.read("final_lr_fraction", t.final_lr_fraction);
  r.read("eval_every", t.eval_every);
  if (const json* d = r.child("denoiser")) read_denoiser(*d, join(path, "denoiser"), t.denoiser);
  r.finish();
}

void validate_train(const TrainConfig& t, const std::string& p) {
  check(t.train_steps >= 0, p + ".train_steps", "must be >= 0");
  check(t.batch_size >= 1, p + ".batch_size", "must be >= 1");
  check(t.learning_rate > 0.0, p + ".learning_rate", "must be > 0");
  check(t.final_lr_fraction > 0.0 && t.final_lr_fraction <= 1.0, p + ".final_lr_fraction",
        "must lie in (0, 1]");
  check(t.eval_every >= 1, p + ".eval_every", "must be >= 1");
  const DenoiserConfig& d = t.denoiser;
  check(d.base_channels >= 1, p + ".denoiser.base_channels", "must be >= 1");
  check(d.num_blocks >= 1, p + ".denoiser.num_blocks", "must be >= 1");
  check(d.time_embed_dim >= 2 && d.time_embed_dim % 2 == 0, p + ".denoiser.time_embed_dim",
        "must be a positive even integer");
  check(d.image_channels == 1, p + ".denoiser.image_channels", "must be 1 for grayscale CT");
}

ordered_json train_json(const TrainConfig& t) {
  return {{"train_steps", t.train_steps},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"final_lr_fraction", t.final_lr_fraction},
          {"eval_every", t.eval_every},
          {"denoiser",
           {{"base_channels", t.denoiser.base_channels},
            {"num_blocks", t.denoiser.num_blocks},
            {"time_embed_dim", t.denoiser.time_embed_dim},
            {"image_channels", t.denoiser.image_channels}}}};
}

}  // namespace

void PipelineConfig::propagate() {
  for (TrainConfig* t : {&teacher, &student}) {
    t->T = T;
    t->stride = stride;
  }
  teacher.seed = Rng::mix(seed ^ Rng::mix(kTeacherSeedStream));
  student.seed = Rng::mix(seed ^ Rng::mix(kStudentSeedStream));
}

void PipelineConfig::validate() const {
  check(image_size >= 16, "image_size", "must be >= 16");
  check(T >= 2, "T", "T must be >= 2");
  check(stride >= 1 && T % stride == 0, "stride", "stride must divide T");
  check(degradation.n_views >= 1, "degradation.n_views", "must be >= 1");
  check(degradation.noise_sigma >= 0.0, "degradation.noise_sigma", "must be >= 0");
  check(degradation.contrast_scale > 0.0 && degradation.contrast_scale <= 1.0,
        "degradation.contrast_scale", "must lie in (0, 1]");
  validate_train(teacher, "teacher");
  validate_train(student, "student");
  check(!out_dir.empty(), "out_dir", "must not be empty");
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  cfg.teacher.train_steps = 2000;
  cfg.student.train_steps = 1000;
  cfg.propagate();
  return cfg;
}

PipelineConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line/column for the message.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorKind::Config, "config parse error at line " + std::to_string(line) + ", column " +
                                std::to_string(col) + ": " + e.what());
  }

  PipelineConfig cfg = default_config();
  ObjectReader r(j, "");
  r.read("image_size", cfg.image_size);
  r.read("T", cfg.T);
  r.read("stride", cfg.stride);
  r.read("n_paired", cfg.n_paired);
  r.read("n_unpaired", cfg.n_unpaired);
  r.read("n_test", cfg.n_test);
  r.read("seed", cfg.seed);
  std::string out_dir = cfg.out_dir.string();
  r.read("out_dir", out_dir);
  cfg.out_dir = out_dir;
  if (const json* d = r.child("degradation")) {
    ObjectReader dr(*d, "degradation");
    dr.read("n_views", cfg.degradation.n_views);
    dr.read("cupping_amplitude", cfg.degradation.cupping_amplitude);
    dr.read("noise_sigma", cfg.degradation.noise_sigma);
    dr.read("contrast_scale", cfg.degradation.contrast_scale);
    dr.finish();
  }
  if (const json* t = r.child("teacher")) read_train(*t, "teacher", cfg.teacher);
  if (const json* s = r.child("student")) read_train(*s, "student", cfg.student);
  r.finish();

  cfg.propagate();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["image_size"] = c.image_size;
  j["T"] = c.T;
  j["stride"] = c.stride;
  j["n_paired"] = c.n_paired;
  j["n_unpaired"] = c.n_unpaired;
  j["n_test"] = c.n_test;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir.generic_string();
  j["degradation"] = {{"n_views", c.degradation.n_views},
                      {"cupping_amplitude", c.degradation.cupping_amplitude},
                      {"noise_sigma", c.degradation.noise_sigma},
                      {"contrast_scale", c.degradation.contrast_scale}};
  j["teacher"] = train_json(c.teacher);
  j["student"] = train_json(c.student);
  return j.dump(2) + "\n";
}

}  // namespace bbkd
