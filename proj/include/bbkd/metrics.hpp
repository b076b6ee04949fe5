#pragma once

#include <limits>
#include <string>
#include <vector>

#include "bbkd/tensor.hpp"

namespace bbkd {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const Tensor& a, const Tensor& b);

/// 10 log10(peak^2 / mse). Identical inputs give kInfinitePsnr.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 2.0;  // L; images live in [-1, 1]
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-windowed SSIM averaged over every position where the window fits
/// entirely inside the image. Multi-channel inputs average per-channel scores.
double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opts = {});

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(int size, double sigma);

struct ImageMetrics {
  std::string id;
  double mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::string dataset_id;
  std::string model_id;
  double peak = 1.0;
  SsimOptions ssim_options;
  std::vector<ImageMetrics> images;
  double mean_mse = 0.0;
  double mean_ssim = 0.0;
  double mean_psnr_db = 0.0;  // over finite values only
  std::size_t psnr_excluded = 0;
};

MetricsReport evaluate_pairs(const std::vector<Tensor>& predictions,
                             const std::vector<Tensor>& truths,
                             const std::vector<std::string>& ids,
                             const std::string& dataset_id = "",
                             const std::string& model_id = "", double peak = 1.0,
                             const SsimOptions& opts = {});

/// Aligned plain-text table, one row per report, columns MSE, SSIM, PSNR.
std::string render_table(const std::vector<MetricsReport>& rows);

}  // namespace bbkd
