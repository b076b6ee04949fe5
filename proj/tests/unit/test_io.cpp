#include <doctest.h>

#include <cstring>
#include <fstream>

#include "bbkd/denoiser.hpp"
#include "bbkd/io.hpp"
#include "test_support.hpp"

using namespace bbkd;
using bbkd::testing::error_kind_of;
using bbkd::testing::error_message_of;
using bbkd::testing::random_tensor;
using bbkd::testing::scratch_dir;

namespace {

Tensor float_valued(Rng& rng, const Shape& shape) {
  Tensor t = random_tensor(rng, shape);
  for (auto& v : t.data()) v = static_cast<float>(v);
  return t;
}

DenoiserParams small_params(std::uint64_t seed) {
  DenoiserConfig cfg;
  cfg.base_channels = 4;
  cfg.num_blocks = 2;
  cfg.time_embed_dim = 4;
  DenoiserParams p = init_params(cfg, seed);
  Rng rng(seed);
  p["out_conv.weight"] = random_tensor(rng, p.at("out_conv.weight").shape());
  return p;
}

}  // namespace

TEST_CASE("IMGF header layout") {
  const Tensor img({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const std::string bytes = encode_imgf(img);
  REQUIRE(bytes.size() == 4 + 12 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "IMGF");
  std::uint32_t w = 0, h = 0, c = 0;
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  std::memcpy(&c, bytes.data() + 12, 4);
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(c == 1);
  float last = 0;
  std::memcpy(&last, bytes.data() + bytes.size() - 4, 4);
  CHECK(last == 6.0f);
}

TEST_CASE("IMGF round trip is bit-exact") {
  Rng rng(1);
  const auto dir = scratch_dir("imgf");
  for (const Shape& shape : {Shape{1, 32, 32}, Shape{3, 5, 7}, Shape{1, 1, 1}}) {
    const Tensor img = float_valued(rng, shape);
    CHECK(decode_imgf(encode_imgf(img)) == img);
    write_imgf(img, dir / "x.imgf");
    CHECK(read_imgf(dir / "x.imgf") == img);
  }
}

TEST_CASE("malformed IMGF buffers are rejected") {
  Rng rng(2);
  const std::string good = encode_imgf(float_valued(rng, {1, 4, 4}));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(error_message_of([&] { decode_imgf(bad_magic); }).find("not an IMGF image") != std::string::npos);
  CHECK(error_kind_of([&] { decode_imgf(good.substr(0, good.size() - 1)); }) == ErrorKind::Format);
  CHECK(error_kind_of([&] { decode_imgf(good + "x"); }) == ErrorKind::Format);
  CHECK(error_kind_of([&] { decode_imgf(good.substr(0, 10)); }) == ErrorKind::Format);
  CHECK(error_kind_of([&] { encode_imgf(Tensor({4, 4})); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([] { read_imgf("/nonexistent/dir/x.imgf"); }) == ErrorKind::Io);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const DenoiserParams params = small_params(3);
  CHECK(decode_checkpoint(encode_checkpoint(params)) == params);
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(params, dir / "nested" / "m.bbkd");
  CHECK(load_checkpoint(dir / "nested" / "m.bbkd") == params);
  CHECK(encode_checkpoint(params) == encode_checkpoint(load_checkpoint(dir / "nested" / "m.bbkd")));
}

TEST_CASE("checkpoint header layout") {
  const DenoiserParams params{{"w", Tensor({2}, {1.5, -2.0})}};
  const std::string bytes = encode_checkpoint(params);
  CHECK(bytes.substr(0, 5) == "BBKD1");
  std::uint32_t version = 0, count = 0, name_len = 0, rank = 0;
  std::uint64_t dim = 0;
  std::memcpy(&version, bytes.data() + 5, 4);
  std::memcpy(&count, bytes.data() + 9, 4);
  std::memcpy(&name_len, bytes.data() + 13, 4);
  std::memcpy(&rank, bytes.data() + 18, 4);
  std::memcpy(&dim, bytes.data() + 22, 8);
  CHECK(version == kCheckpointVersion);
  CHECK(count == 1);
  CHECK(name_len == 1);
  CHECK(bytes[17] == 'w');
  CHECK(rank == 1);
  CHECK(dim == 2);
  double second = 0;
  std::memcpy(&second, bytes.data() + 38, 8);
  CHECK(second == -2.0);
  CHECK(bytes.size() == 46);
}

TEST_CASE("malformed checkpoints are rejected without partial state") {
  const std::string good = encode_checkpoint(small_params(4));
  std::string bad_magic = good;
  bad_magic[1] = 'Z';
  CHECK(error_message_of([&] { decode_checkpoint(bad_magic); }).find("not a BBKD1 checkpoint") != std::string::npos);

  std::string bad_version = good;
  bad_version[5] = 2;
  CHECK(error_kind_of([&] { decode_checkpoint(bad_version); }) == ErrorKind::Format);

  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, good.size() / 2, good.size() - 1}) {
    CAPTURE(cut);
    CHECK(error_kind_of([&] { decode_checkpoint(good.substr(0, cut)); }) == ErrorKind::Format);
  }
  CHECK(error_kind_of([&] { decode_checkpoint(good + std::string(1, '\0')); }) == ErrorKind::Format);

  const auto dir = scratch_dir("ckpt_bad");
  {
    std::ofstream out(dir / "t.bbkd", std::ios::binary);
    out << good.substr(0, good.size() - 9);
  }
  DenoiserParams target = small_params(9);
  const DenoiserParams before = target;
  CHECK(error_kind_of([&] { target = load_checkpoint(dir / "t.bbkd"); }) == ErrorKind::Format);
  CHECK(target == before);
}

TEST_CASE("PGM export maps the value range onto 16 bits") {
  const auto dir = scratch_dir("pgm");
  export_pgm(Tensor::full({1, 3, 4}, -1.0), dir / "lo.pgm");
  export_pgm(Tensor::full({1, 3, 4}, 1.0), dir / "hi.pgm");
  const std::string lo = read_file(dir / "lo.pgm"), hi = read_file(dir / "hi.pgm");
  CHECK(lo.rfind("P5", 0) == 0);
  const std::string lo_pixels = lo.substr(lo.size() - 24), hi_pixels = hi.substr(hi.size() - 24);
  for (char c : lo_pixels) CHECK(static_cast<unsigned char>(c) == 0);
  for (char c : hi_pixels) CHECK(static_cast<unsigned char>(c) == 255);
  CHECK(import_pgm(dir / "hi.pgm") == Tensor::full({1, 3, 4}, 1.0));
}

TEST_CASE("PGM round trip stays within one quantization step") {
  Rng rng(5);
  Tensor img({1, 16, 16});
  for (auto& v : img.data()) v = rng.uniform(-1.0, 1.0);
  const auto dir = scratch_dir("pgm_rt");
  export_pgm(img, dir / "x.pgm");
  CHECK(max_abs_diff(import_pgm(dir / "x.pgm"), img) <= 1.0 / 65535.0 + 1e-12);
  CHECK(error_kind_of([&] { export_pgm(Tensor::full({1, 2, 2}, 1.5), dir / "y.pgm"); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("write_file creates parents and replaces atomically") {
  const auto dir = scratch_dir("write");
  write_file(dir / "a" / "b" / "c.txt", "first");
  write_file(dir / "a" / "b" / "c.txt", "second");
  CHECK(read_file(dir / "a" / "b" / "c.txt") == "second");
  CHECK(error_kind_of([&] { read_file(dir / "missing"); }) == ErrorKind::Io);
}
