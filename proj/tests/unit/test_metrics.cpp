#include <doctest.h>

#include <cmath>

#include "bbkd/metrics.hpp"
#include "test_support.hpp"

using namespace bbkd;
using bbkd::testing::error_kind_of;
using bbkd::testing::random_tensor;

namespace {

// Direct sliding-window SSIM: full 2-D Gaussian window built from exp(),
// no separable passes, no shared code with the library.
double brute_ssim(const Tensor& a, const Tensor& b, double L) {
  const int win = 11, half = 5;
  const double sigma = 1.5;
  double w[11][11];
  double wsum = 0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      const double di = i - half, dj = j - half;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      wsum += w[i][j];
    }
  const double c1 = (0.01 * L) * (0.01 * L), c2 = (0.03 * L) * (0.03 * L);
  const int h = int(a.dim(1)), wd = int(a.dim(2));
  double total = 0;
  int count = 0;
  for (int r = 0; r + win <= h; ++r) {
    for (int c = 0; c + win <= wd; ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          ma += w[i][j] / wsum * a.at(0, r + i, c + j);
          mb += w[i][j] / wsum * b.at(0, r + i, c + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = a.at(0, r + i, c + j) - ma, db = b.at(0, r + i, c + j) - mb;
          va += w[i][j] / wsum * da * da;
          vb += w[i][j] / wsum * db * db;
          cov += w[i][j] / wsum * da * db;
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

Tensor constant(double v, std::size_t n = 16) { return Tensor::full({1, n, n}, v); }

}  // namespace

TEST_CASE("mse examples and properties") {
  CHECK(mse(constant(0.0), constant(0.1)) == doctest::Approx(0.01).epsilon(1e-12));
  Rng rng(1);
  const Tensor a = random_tensor(rng, {1, 8, 8}), b = random_tensor(rng, {1, 8, 8});
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(a, b) == mse(b, a));
  CHECK(mse(a, b) > 0.0);
  CHECK(error_kind_of([&] { mse(a, Tensor({1, 8, 7})); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("psnr examples") {
  CHECK(psnr(constant(0.0), constant(0.1)) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(constant(0.3), constant(0.3)) == kInfinitePsnr);
  Rng rng(2);
  const Tensor a = random_tensor(rng, {1, 8, 8}), b = random_tensor(rng, {1, 8, 8});
  CHECK(psnr(a, b) == -10.0 * std::log10(mse(a, b)));
  // Peak 1 makes an MSE of 0.0513 land at 12.90 dB, matching 13.03 dB to
  // within the rounding of the reported MSE.
  CHECK(-10.0 * std::log10(0.0513) == doctest::Approx(12.899).epsilon(1e-4));
  CHECK(-10.0 * std::log10(0.0498) == doctest::Approx(13.028).epsilon(1e-4));
}

TEST_CASE("psnr decreases as mse grows") {
  double last = kInfinitePsnr;
  for (double d : {0.01, 0.02, 0.05, 0.1, 0.4}) {
    const double p = psnr(constant(0.0), constant(d));
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("ssim identities") {
  Rng rng(3);
  const Tensor a = random_tensor(rng, {1, 32, 32}, 0.4);
  const Tensor b = random_tensor(rng, {1, 32, 32}, 0.4);
  CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  const double s = ssim(a, b);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
  Tensor up = a, down = a;
  for (auto& v : up.data()) v += 0.5;
  for (auto& v : down.data()) v = 0.5 - v;
  CHECK(ssim(up, down) < 0.0);
}

TEST_CASE("constant-image ssim follows the closed form") {
  CHECK(ssim(constant(0.0), constant(0.1)) == doctest::Approx(0.0004 / 0.0104).epsilon(1e-12));
  CHECK(ssim(constant(0.0), constant(0.1)) == doctest::Approx(0.038461).epsilon(1e-5));
  SsimOptions unit;
  unit.dynamic_range = 1.0;
  const double c1 = 0.0001;
  CHECK(ssim(constant(0.2), constant(0.5), unit) ==
        doctest::Approx((2 * 0.2 * 0.5 + c1) / (0.04 + 0.25 + c1)).epsilon(1e-12));
}

TEST_CASE("windowed ssim equals the brute-force oracle") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Tensor a = random_tensor(rng, {1, 32, 32}, 0.5);
    Tensor b = a;
    for (auto& v : b.data()) v += 0.3 * rng.normal();
    CHECK(std::abs(ssim(a, b) - brute_ssim(a, b, 2.0)) <= 1e-9);
  }
  const Tensor a = random_tensor(rng, {1, 13, 20}), b = random_tensor(rng, {1, 13, 20});
  CHECK(std::abs(ssim(a, b) - brute_ssim(a, b, 2.0)) <= 1e-9);
}

TEST_CASE("gaussian taps are normalized and symmetric") {
  const std::vector<double> t = gaussian_taps(11, 1.5);
  double sum = 0;
  for (double v : t) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  for (int i = 0; i < 11; ++i) CHECK(t[i] == t[10 - i]);
  CHECK(t[5] > t[4]);
}

TEST_CASE("ssim rejects images smaller than the window") {
  CHECK(error_kind_of([] { ssim(constant(0.0, 10), constant(0.0, 10)); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind_of([] { ssim(constant(0.0, 12), constant(0.0, 13)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("evaluate_pairs aggregates per-image values") {
  const std::vector<Tensor> truth{constant(0.0), constant(0.0)};
  const std::vector<Tensor> pred{constant(0.1), constant(0.2)};
  const MetricsReport r = evaluate_pairs(pred, truth, {"a", "b"}, "test", "model");
  REQUIRE(r.images.size() == 2);
  CHECK(r.images[0].id == "a");
  CHECK(r.images[0].mse == doctest::Approx(0.01));
  CHECK(r.images[1].psnr_db == doctest::Approx(-10 * std::log10(0.04)));
  CHECK(r.mean_mse == doctest::Approx((0.01 + 0.04) / 2));
  CHECK(r.mean_psnr_db == doctest::Approx((r.images[0].psnr_db + r.images[1].psnr_db) / 2));
  CHECK(r.mean_ssim == doctest::Approx((r.images[0].ssim + r.images[1].ssim) / 2));
  CHECK(r.psnr_excluded == 0);
  CHECK(r.dataset_id == "test");
  CHECK(r.model_id == "model");
}

TEST_CASE("identical pairs are flagged rather than averaged as infinity") {
  const MetricsReport one = evaluate_pairs({constant(0.3)}, {constant(0.3)}, {"x"});
  CHECK(one.images[0].mse == 0.0);
  CHECK(one.images[0].ssim == doctest::Approx(1.0));
  CHECK(one.images[0].psnr_db == kInfinitePsnr);
  CHECK(one.psnr_excluded == 1);

  const MetricsReport mixed =
      evaluate_pairs({constant(0.3), constant(0.1)}, {constant(0.3), constant(0.0)}, {"x", "y"});
  CHECK(mixed.psnr_excluded == 1);
  CHECK(mixed.mean_psnr_db == doctest::Approx(20.0));
}

TEST_CASE("evaluate_pairs validates its inputs") {
  CHECK(error_kind_of([] { evaluate_pairs({constant(0)}, {}, {"x"}); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind_of([] { evaluate_pairs({}, {}, {}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("report table keeps the metric column order") {
  MetricsReport input = evaluate_pairs({constant(0.1)}, {constant(0.0)}, {"x"}, "test", "Input");
  const std::string table = render_table({input});
  const auto m = table.find("MSE"), s = table.find("SSIM"), p = table.find("PSNR");
  CHECK(m < s);
  CHECK(s < p);
  CHECK(table.find("Input") != std::string::npos);
  CHECK(table.find("20.00") != std::string::npos);
}
