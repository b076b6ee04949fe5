#pragma once

#include <cstdint>
#include <vector>

#include "bbkd/tensor.hpp"

namespace bbkd {

struct Ellipse {
  double cx = 0.0, cy = 0.0;  // normalized coordinates in [-1, 1]
  double ax = 0.5, ay = 0.5;  // semi-axes, normalized
  double angle = 0.0;         // radians, counter-clockwise
  double intensity = 0.0;     // additive

  bool contains(double x, double y) const noexcept;
};

/// Body outline plus interior structures. Interior ellipses only contribute
/// inside the body, and the composite is clamped to [0, 1].
struct PhantomSpec {
  Ellipse body;
  std::vector<Ellipse> interior;
};

PhantomSpec random_phantom_spec(std::uint64_t seed);
Tensor render_phantom(const PhantomSpec& spec, std::size_t size);

/// Random multi-ellipse phantom with values in [0, 1], shape [1,size,size].
Tensor generate_phantom(std::uint64_t seed, std::size_t size);

/// `count` angles equally spaced over [0, pi).
std::vector<double> equally_spaced_angles(std::size_t count);

/// Parallel-beam line integrals. One detector per image column, centered;
/// rays are sampled every half pixel with bilinear interpolation.
/// Returns [angles.size(), N].
Tensor radon_transform(const Tensor& image, const std::vector<double>& angles);

/// Ram-Lak filtered backprojection; negative values are clamped to zero.
Tensor fbp_reconstruct(const Tensor& sinogram, const std::vector<double>& angles,
                       std::size_t size);

struct DegradationConfig {
  int n_views = 16;
  double cupping_amplitude = 0.08;
  double noise_sigma = 0.01;
  double contrast_scale = 0.85;

  static DegradationConfig dense() { return {180, 0.08, 0.01, 0.85}; }
  void validate() const;
};

/// CBCT-like rendition of a [0,1] image: reduced contrast, sparse-view
/// streaks, radial cupping bias and Gaussian noise, clamped to [0, 1].
Tensor degrade_to_cbct(const Tensor& pct, const DegradationConfig& cfg, std::uint64_t seed);

/// Linear map lo -> -1, hi -> +1 with clamping outside the window.
Tensor normalize_intensity(const Tensor& image, double lo = 0.0, double hi = 1.0);

}  // namespace bbkd
