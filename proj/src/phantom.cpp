#include "bbkd/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bbkd/error.hpp"
#include "bbkd/rng.hpp"

namespace bbkd {

namespace {

void require_square_image(const Tensor& image, const char* where) {
  require(image.rank() == 3 && image.dim(0) == 1 && image.dim(1) == image.dim(2),
          ErrorKind::ShapeMismatch,
          std::string(where) + ": expected [1,N,N] image, got " + shape_string(image.shape()));
}

// Bilinear lookup in pixel-index space, zero outside the image.
double sample_bilinear(const double* img, long n, double row, double col) {
  const double fr = std::floor(row), fc = std::floor(col);
  const long r0 = static_cast<long>(fr), c0 = static_cast<long>(fc);
  if (r0 < -1 || c0 < -1 || r0 >= n || c0 >= n) return 0.0;
  const double wr = row - fr, wc = col - fc;
  auto px = [&](long r, long c) {
    return (r >= 0 && r < n && c >= 0 && c < n) ? img[r * n + c] : 0.0;
  };
  return (1 - wr) * ((1 - wc) * px(r0, c0) + wc * px(r0, c0 + 1)) +
         wr * ((1 - wc) * px(r0 + 1, c0) + wc * px(r0 + 1, c0 + 1));
}

}  // namespace

bool Ellipse::contains(double x, double y) const noexcept {
  const double dx = x - cx, dy = y - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (c * dx + s * dy) / ax;
  const double v = (-s * dx + c * dy) / ay;
  return u * u + v * v <= 1.0;
}

PhantomSpec random_phantom_spec(std::uint64_t seed) {
  Rng rng(seed);
  PhantomSpec spec;
  spec.body = Ellipse{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                      rng.uniform(0.70, 0.85), rng.uniform(0.55, 0.75),
                      rng.uniform(-0.3, 0.3), 0.45};

  // Soft-tissue and low-density structures, kept well inside the body.
  const int n_soft = static_cast<int>(rng.uniform_int(3, 8));
  for (int i = 0; i < n_soft; ++i) {
    const double r = 0.55 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double level = rng.uniform(0.08, 0.25);
    if (rng.uniform() < 0.4) level = -rng.uniform(0.15, 0.3);
    spec.interior.push_back(Ellipse{spec.body.cx + r * spec.body.ax * std::cos(phi),
                                    spec.body.cy + r * spec.body.ay * std::sin(phi),
                                    rng.uniform(0.08, 0.25), rng.uniform(0.08, 0.25),
                                    rng.uniform(0.0, std::numbers::pi), level});
  }
  // Small dense "bone" inserts.
  const int n_bone = static_cast<int>(rng.uniform_int(0, 3));
  for (int i = 0; i < n_bone; ++i) {
    const double r = 0.7 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    spec.interior.push_back(Ellipse{spec.body.cx + r * spec.body.ax * std::cos(phi),
                                    spec.body.cy + r * spec.body.ay * std::sin(phi),
                                    rng.uniform(0.04, 0.09), rng.uniform(0.04, 0.09),
                                    rng.uniform(0.0, std::numbers::pi), 0.5});
  }
  return spec;
}

Tensor render_phantom(const PhantomSpec& spec, std::size_t size) {
  require(size >= 16, ErrorKind::InvalidArgument,
          "phantom size must be >= 16, got " + std::to_string(size));
  Tensor img({1, size, size});
  const double half = static_cast<double>(size) / 2.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double y = half - (static_cast<double>(i) + 0.5);
    for (std::size_t j = 0; j < size; ++j) {
      const double x = (static_cast<double>(j) + 0.5) - half;
      const double u = x / half, v = y / half;
      if (!spec.body.contains(u, v)) continue;
      double value = spec.body.intensity;
      for (const Ellipse& e : spec.interior)
        if (e.contains(u, v)) value += e.intensity;
      img.at(0, i, j) = std::clamp(value, 0.0, 1.0);
    }
  }
  return img;
}

Tensor generate_phantom(std::uint64_t seed, std::size_t size) {
  return render_phantom(random_phantom_spec(seed), size);
}

std::vector<double> equally_spaced_angles(std::size_t count) {
  std::vector<double> angles(count);
  for (std::size_t i = 0; i < count; ++i)
    angles[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count);
  return angles;
}

Tensor radon_transform(const Tensor& image, const std::vector<double>& angles) {
  require(!angles.empty(), ErrorKind::InvalidArgument, "radon_transform: empty angle list");
  require_square_image(image, "radon_transform");
  const long n = static_cast<long>(image.dim(1));
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  constexpr double step = 0.5;
  const long half_steps = static_cast<long>(std::ceil((n * std::numbers::sqrt2 / 2.0 + 1.0) / step));
  const double* img = image.data().data();

  Tensor sino({angles.size(), static_cast<std::size_t>(n)});
  for (std::size_t a = 0; a < angles.size(); ++a) {
    const double c = std::cos(angles[a]), s = std::sin(angles[a]);
    for (long d = 0; d < n; ++d) {
      const double det = static_cast<double>(d) - center;
      double acc = 0.0;
      for (long k = -half_steps; k <= half_steps; ++k) {
        const double u = static_cast<double>(k) * step;
        const double x = det * c - u * s;
        const double y = det * s + u * c;
        acc += sample_bilinear(img, n, center - y, center + x);
      }
      sino[a * n + d] = acc * step;
    }
  }
  sino.check_finite("radon_transform");
  return sino;
}

Tensor fbp_reconstruct(const Tensor& sinogram, const std::vector<double>& angles,
                       std::size_t size) {
  require(!angles.empty(), ErrorKind::InvalidArgument, "fbp_reconstruct: empty angle list");
  require(sinogram.rank() == 2 && sinogram.dim(0) == angles.size() && sinogram.dim(1) == size,
          ErrorKind::ShapeMismatch,
          "fbp_reconstruct: sinogram " + shape_string(sinogram.shape()) + " does not match " +
              std::to_string(angles.size()) + " angles x " + std::to_string(size) + " detectors");
  const long n = static_cast<long>(size);
  const double center = (static_cast<double>(n) - 1.0) / 2.0;

  // Spatial Ram-Lak kernel for unit detector spacing.
  std::vector<double> kernel(2 * n - 1);
  for (long m = -(n - 1); m <= n - 1; ++m) {
    double h = 0.0;
    if (m == 0) h = 0.25;
    else if (m % 2 != 0) h = -1.0 / (std::numbers::pi * std::numbers::pi * double(m) * double(m));
    kernel[m + n - 1] = h;
  }

  std::vector<double> filtered(angles.size() * n);
  for (std::size_t a = 0; a < angles.size(); ++a) {
    const double* p = sinogram.data().data() + a * n;
    for (long d = 0; d < n; ++d) {
      double acc = 0.0;
      for (long e = 0; e < n; ++e) acc += p[e] * kernel[d - e + n - 1];
      filtered[a * n + d] = acc;
    }
  }

  Tensor img({1, size, size});
  const double norm = std::numbers::pi / static_cast<double>(angles.size());
  std::vector<double> cs(angles.size()), sn(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    cs[a] = std::cos(angles[a]);
    sn[a] = std::sin(angles[a]);
  }
  for (long i = 0; i < n; ++i) {
    const double y = center - static_cast<double>(i);
    for (long j = 0; j < n; ++j) {
      const double x = static_cast<double>(j) - center;
      double acc = 0.0;
      for (std::size_t a = 0; a < angles.size(); ++a) {
        const double pos = x * cs[a] + y * sn[a] + center;
        const double f = std::floor(pos);
        const long d0 = static_cast<long>(f);
        const double w = pos - f;
        const double* q = filtered.data() + a * n;
        if (d0 >= 0 && d0 < n) acc += (1.0 - w) * q[d0];
        if (d0 + 1 >= 0 && d0 + 1 < n) acc += w * q[d0 + 1];
      }
      img.at(0, i, j) = std::max(0.0, acc * norm);
    }
  }
  img.check_finite("fbp_reconstruct");
  return img;
}

void DegradationConfig::validate() const {
  require(n_views >= 1, ErrorKind::Config, "n_views must be >= 1");
  require(noise_sigma >= 0.0, ErrorKind::Config, "noise_sigma must be >= 0");
  require(contrast_scale > 0.0 && contrast_scale <= 1.0, ErrorKind::Config,
          "contrast_scale must lie in (0, 1]");
  require(std::isfinite(cupping_amplitude), ErrorKind::Config, "cupping_amplitude must be finite");
}

Tensor degrade_to_cbct(const Tensor& pct, const DegradationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require_square_image(pct, "degrade_to_cbct");
  const std::size_t n = pct.dim(1);

  double mean = 0.0;
  for (double v : pct.data()) mean += v;
  mean /= static_cast<double>(pct.size());
  Tensor low_contrast(pct.shape());
  for (std::size_t i = 0; i < pct.size(); ++i)
    low_contrast[i] = mean + cfg.contrast_scale * (pct[i] - mean);

  const auto angles = equally_spaced_angles(static_cast<std::size_t>(cfg.n_views));
  Tensor out = fbp_reconstruct(radon_transform(low_contrast, angles), angles, n);

  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  const double radius = static_cast<double>(n) / 2.0;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double& v = out.at(0, i, j);
      if (pct.at(0, i, j) > 0.0) {
        const double dy = static_cast<double>(i) - center, dx = static_cast<double>(j) - center;
        const double r2 = (dx * dx + dy * dy) / (radius * radius);
        v += cfg.cupping_amplitude * r2 - cfg.cupping_amplitude / 2.0;
      }
      if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Tensor normalize_intensity(const Tensor& image, double lo, double hi) {
  require(lo < hi, ErrorKind::InvalidArgument, "normalize_intensity: window requires lo < hi");
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = std::clamp(2.0 * (image[i] - lo) / (hi - lo) - 1.0, -1.0, 1.0);
  return out;
}

}  // namespace bbkd
