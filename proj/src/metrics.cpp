#include "bbkd/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "bbkd/error.hpp"

namespace bbkd {

namespace {

struct Planes {
  std::size_t count, h, w;
};

Planes planes_of(const Tensor& t) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  require(t.rank() == 3, ErrorKind::ShapeMismatch,
          "metrics expect [H,W] or [C,H,W] images, got " + shape_string(t.shape()));
  return {t.dim(0), t.dim(1), t.dim(2)};
}

// Valid-mode separable filtering of one plane: rows first, then columns.
std::vector<double> filter_valid(const double* img, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * img[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += taps[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  require(a.size() > 0, ErrorKind::InvalidArgument, "mse: empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  require(peak > 0.0, ErrorKind::InvalidArgument, "psnr: peak must be positive");
  const double m = mse(a, b);
  if (m == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / m);
}

std::vector<double> gaussian_taps(int size, double sigma) {
  require(size >= 1 && size % 2 == 1 && sigma > 0.0, ErrorKind::InvalidArgument,
          "gaussian window needs odd size and positive sigma");
  std::vector<double> taps(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opts) {
  require_same_shape(a, b, "ssim");
  require(opts.dynamic_range > 0.0, ErrorKind::InvalidArgument, "ssim: dynamic range must be positive");
  const Planes p = planes_of(a);
  const std::size_t k = static_cast<std::size_t>(opts.window);
  require(p.h >= k && p.w >= k, ErrorKind::InvalidArgument,
          "ssim: image " + std::to_string(p.h) + "x" + std::to_string(p.w) +
              " smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
  const auto taps = gaussian_taps(opts.window, opts.sigma);
  const double c1 = (opts.k1 * opts.dynamic_range) * (opts.k1 * opts.dynamic_range);
  const double c2 = (opts.k2 * opts.dynamic_range) * (opts.k2 * opts.dynamic_range);

  const std::size_t plane = p.h * p.w;
  double total = 0.0;
  for (std::size_t c = 0; c < p.count; ++c) {
    const double* x = a.data().data() + c * plane;
    const double* y = b.data().data() + c * plane;
    std::vector<double> xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, p.h, p.w, taps);
    const auto my = filter_valid(y, p.h, p.w, taps);
    const auto sxx = filter_valid(xx.data(), p.h, p.w, taps);
    const auto syy = filter_valid(yy.data(), p.h, p.w, taps);
    const auto sxy = filter_valid(xy.data(), p.h, p.w, taps);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(p.count);
}

MetricsReport evaluate_pairs(const std::vector<Tensor>& predictions,
                             const std::vector<Tensor>& truths,
                             const std::vector<std::string>& ids, const std::string& dataset_id,
                             const std::string& model_id, double peak, const SsimOptions& opts) {
  require(predictions.size() == truths.size() && truths.size() == ids.size(),
          ErrorKind::InvalidArgument,
          "evaluate_pairs: " + std::to_string(predictions.size()) + " predictions, " +
              std::to_string(truths.size()) + " truths, " + std::to_string(ids.size()) + " ids");
  require(!predictions.empty(), ErrorKind::InvalidArgument, "evaluate_pairs: nothing to evaluate");

  MetricsReport report;
  report.dataset_id = dataset_id;
  report.model_id = model_id;
  report.peak = peak;
  report.ssim_options = opts;
  double psnr_sum = 0.0;
  std::size_t psnr_n = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    ImageMetrics m;
    m.id = ids[i];
    m.mse = mse(predictions[i], truths[i]);
    m.psnr_db = psnr(predictions[i], truths[i], peak);
    m.ssim = ssim(predictions[i], truths[i], opts);
    report.mean_mse += m.mse;
    report.mean_ssim += m.ssim;
    if (std::isfinite(m.psnr_db)) {
      psnr_sum += m.psnr_db;
      ++psnr_n;
    } else {
      ++report.psnr_excluded;
    }
    report.images.push_back(std::move(m));
  }
  const double n = static_cast<double>(predictions.size());
  report.mean_mse /= n;
  report.mean_ssim /= n;
  report.mean_psnr_db = psnr_n ? psnr_sum / static_cast<double>(psnr_n) : kInfinitePsnr;
  return report;
}

std::string render_table(const std::vector<MetricsReport>& rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", "Model", "MSE", "SSIM", "PSNR");
  out += line;
  for (const MetricsReport& r : rows) {
    if (std::isfinite(r.mean_psnr_db))
      std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10.2f\n", r.model_id.c_str(),
                    r.mean_mse, r.mean_ssim, r.mean_psnr_db);
    else
      std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10s\n", r.model_id.c_str(),
                    r.mean_mse, r.mean_ssim, "inf");
    out += line;
  }
  return out;
}

}  // namespace bbkd
