#include <doctest.h>

#include "bbkd/config.hpp"
#include "bbkd/io.hpp"
#include "test_support.hpp"

using namespace bbkd;
using bbkd::testing::error_kind_of;
using bbkd::testing::error_message_of;
using bbkd::testing::scratch_dir;

namespace {
bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}
}  // namespace

TEST_CASE("empty object yields the defaults") {
  const PipelineConfig cfg = parse_config("{}");
  CHECK(cfg.image_size == 32);
  CHECK(cfg.T == 50);
  CHECK(cfg.stride == 1);
  CHECK(cfg.n_paired == 100);
  CHECK(cfg.n_unpaired == 300);
  CHECK(cfg.n_test == 50);
  CHECK(cfg.seed == 0);
  CHECK(cfg.degradation.n_views == 16);
  CHECK(cfg.teacher.T == 50);
  CHECK(cfg.student.stride == 1);
  CHECK(config_to_json(cfg) == config_to_json(default_config()));
}

TEST_CASE("fields override defaults and propagate to both phases") {
  const PipelineConfig cfg = parse_config(R"({
    "T": 20, "stride": 4, "seed": 12, "image_size": 24,
    "degradation": {"n_views": 30},
    "teacher": {"train_steps": 10, "denoiser": {"base_channels": 8}},
    "student": {"learning_rate": 0.0005}
  })");
  CHECK(cfg.T == 20);
  CHECK(cfg.teacher.T == 20);
  CHECK(cfg.student.stride == 4);
  CHECK(cfg.degradation.n_views == 30);
  CHECK(cfg.degradation.noise_sigma == DegradationConfig{}.noise_sigma);
  CHECK(cfg.teacher.train_steps == 10);
  CHECK(cfg.teacher.denoiser.base_channels == 8);
  CHECK(cfg.teacher.denoiser.num_blocks == DenoiserConfig{}.num_blocks);
  CHECK(cfg.student.learning_rate == 0.0005);
  CHECK(cfg.teacher.seed != cfg.student.seed);
  CHECK(cfg.teacher.seed != parse_config(R"({"seed": 13})").teacher.seed);
}

TEST_CASE("constraint violations name the field") {
  const std::string t = error_message_of([] { parse_config(R"({"T": 1})"); });
  CHECK(contains(t, "T"));
  CHECK(contains(t, "T must be >= 2"));
  CHECK(error_kind_of([] { parse_config(R"({"T": 1})"); }) == ErrorKind::Config);
  CHECK(contains(error_message_of([] { parse_config(R"({"stride": 7, "T": 50})"); }), "stride must divide T"));
  CHECK(contains(error_message_of([] { parse_config(R"({"teacher": {"batch_size": 0}})"); }),
                 "teacher.batch_size"));
  CHECK(contains(error_message_of([] { parse_config(R"({"degradation": {"contrast_scale": 2}})"); }),
                 "degradation.contrast_scale"));
}

TEST_CASE("unknown keys and wrong types are rejected") {
  CHECK(contains(error_message_of([] { parse_config(R"({"epochs": 3})"); }), "epochs: unknown key"));
  CHECK(contains(error_message_of([] { parse_config(R"({"teacher": {"denoiser": {"depth": 3}}})"); }),
                 "teacher.denoiser.depth: unknown key"));
  CHECK(contains(error_message_of([] { parse_config(R"({"T": "fifty"})"); }), "T"));
  CHECK(error_kind_of([] { parse_config(R"({"n_paired": -4})"); }) == ErrorKind::Config);
  CHECK(error_kind_of([] { parse_config(R"({"T": 2.5})"); }) == ErrorKind::Config);
  CHECK(error_kind_of([] { parse_config("[1, 2]"); }) == ErrorKind::Config);
}

TEST_CASE("syntax errors report line and column") {
  const std::string msg = error_message_of([] { parse_config("{\n  \"T\": 50,\n  oops\n}"); });
  CHECK(contains(msg, "line 3"));
  CHECK(error_kind_of([] { parse_config("{"); }) == ErrorKind::Config);
}

TEST_CASE("load_config reads files and serialization round trips") {
  const auto dir = scratch_dir("config");
  write_file(dir / "c.json", R"({"n_paired": 3, "out_dir": "somewhere"})");
  const PipelineConfig cfg = load_config(dir / "c.json");
  CHECK(cfg.n_paired == 3);
  CHECK(cfg.out_dir == "somewhere");
  CHECK(config_to_json(parse_config(config_to_json(cfg))) == config_to_json(cfg));
  CHECK(error_kind_of([&] { load_config(dir / "missing.json"); }) == ErrorKind::Io);
}
