#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bbkd/bridge.hpp"
#include "bbkd/config.hpp"
#include "bbkd/denoiser.hpp"
#include "bbkd/error.hpp"
#include "bbkd/io.hpp"
#include "bbkd/metrics.hpp"
#include "bbkd/phantom.hpp"
#include "bbkd/pipeline.hpp"
#include "bbkd/platform.hpp"

namespace py = pybind11;
using namespace bbkd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  if (shape.empty()) shape = {1};
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict params_to_dict(const DenoiserParams& p) {
  py::dict d;
  for (const auto& [name, t] : p) d[py::str(name)] = to_array(t);
  return d;
}

DenoiserParams params_from_dict(const py::dict& d) {
  DenoiserParams p;
  for (const auto& [k, v] : d) p.emplace(py::cast<std::string>(k), to_tensor(py::cast<Array>(v)));
  return p;
}

DenoiserConfig denoiser_config(int base_channels, int num_blocks, int time_embed_dim) {
  DenoiserConfig c;
  c.base_channels = base_channels;
  c.num_blocks = num_blocks;
  c.time_embed_dim = time_embed_dim;
  return c;
}

py::dict report_to_dict(const MetricsReport& r) {
  py::dict d;
  d["model"] = r.model_id;
  d["mse"] = r.mean_mse;
  d["ssim"] = r.mean_ssim;
  d["psnr"] = r.mean_psnr_db;
  d["n_images"] = r.images.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_bbkd, m) {
  m.doc() = "Brownian-bridge CBCT-to-CT translation core";
  tune_allocator();

  static py::exception<Error> error_type(m, "BbkdError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<BridgeSchedule>(m, "BridgeSchedule")
      .def_readonly("T", &BridgeSchedule::T)
      .def_readonly("k", &BridgeSchedule::k)
      .def_readonly("var", &BridgeSchedule::var);
  m.def("make_schedule", &make_schedule, py::arg("T"));

  m.def("forward_sample", [](const Array& p0, const Array& q, int t, const BridgeSchedule& s, const Array& noise) {
    return to_array(forward_sample(to_tensor(p0), to_tensor(q), t, s, to_tensor(noise)));
  }, py::arg("p0"), py::arg("q"), py::arg("t"), py::arg("sched"), py::arg("noise"));
  m.def("transition_sample", [](const Array& prev, const Array& q, int t, const BridgeSchedule& s, const Array& noise) {
    return to_array(transition_sample(to_tensor(prev), to_tensor(q), t, s, to_tensor(noise)));
  }, py::arg("p_prev"), py::arg("q"), py::arg("t"), py::arg("sched"), py::arg("noise"));
  m.def("transition_coeffs", [](const BridgeSchedule& s, int t, int prev) {
    const TransitionCoeffs c = transition_coeffs(s, t, prev);
    return py::make_tuple(c.a, c.b, c.s);
  }, py::arg("sched"), py::arg("t"), py::arg("prev"));
  m.def("posterior_params", [](const Array& pt, const Array& p0_hat, const Array& q, int t, const BridgeSchedule& s,
                               std::optional<int> prev) {
    const PosteriorParams p = posterior_params(to_tensor(pt), to_tensor(p0_hat), to_tensor(q), t, prev.value_or(t - 1), s);
    return py::make_tuple(to_array(p.mean), p.variance);
  }, py::arg("p_t"), py::arg("p0_hat"), py::arg("q"), py::arg("t"), py::arg("sched"), py::arg("prev") = py::none());
  m.def("reverse_step", [](const Array& pt, const Array& p0_hat, const Array& q, int t, const BridgeSchedule& s,
                           const Array& noise, std::optional<int> prev) {
    return to_array(reverse_step(to_tensor(pt), to_tensor(p0_hat), to_tensor(q), t, prev.value_or(t - 1), s,
                                 to_tensor(noise)));
  }, py::arg("p_t"), py::arg("p0_hat"), py::arg("q"), py::arg("t"), py::arg("sched"), py::arg("noise"),
     py::arg("prev") = py::none());
  m.def("sample_translation", [](const Array& q, const std::function<Array(Array, int)>& predict,
                                 const BridgeSchedule& s, std::uint64_t seed, int stride) {
    Rng rng(seed);
    const PredictX0 fn = [&](const Tensor& p, int t) { return to_tensor(predict(to_array(p), t)); };
    return to_array(sample_translation(to_tensor(q), fn, s, rng, stride));
  }, py::arg("q"), py::arg("predict_x0"), py::arg("sched"), py::arg("seed") = 0, py::arg("stride") = 1);

  m.def("generate_phantom", [](std::uint64_t seed, std::size_t size) { return to_array(generate_phantom(seed, size)); },
        py::arg("seed"), py::arg("size") = 32);
  m.def("equally_spaced_angles", &equally_spaced_angles, py::arg("count"));
  m.def("radon_transform", [](const Array& img, const std::vector<double>& angles) {
    return to_array(radon_transform(to_tensor(img), angles));
  }, py::arg("image"), py::arg("angles"));
  m.def("fbp_reconstruct", [](const Array& sino, const std::vector<double>& angles, std::size_t size) {
    return to_array(fbp_reconstruct(to_tensor(sino), angles, size));
  }, py::arg("sinogram"), py::arg("angles"), py::arg("size"));
  m.def("degrade_to_cbct", [](const Array& pct, std::uint64_t seed, int n_views, double cupping, double noise,
                              double contrast) {
    return to_array(degrade_to_cbct(to_tensor(pct), DegradationConfig{n_views, cupping, noise, contrast}, seed));
  }, py::arg("pct"), py::arg("seed") = 0, py::arg("n_views") = 16, py::arg("cupping_amplitude") = 0.08,
     py::arg("noise_sigma") = 0.01, py::arg("contrast_scale") = 0.85);
  m.def("normalize_intensity", [](const Array& img, double lo, double hi) {
    return to_array(normalize_intensity(to_tensor(img), lo, hi));
  }, py::arg("image"), py::arg("lo") = 0.0, py::arg("hi") = 1.0);

  m.def("mse", [](const Array& a, const Array& b) { return mse(to_tensor(a), to_tensor(b)); });
  m.def("psnr", [](const Array& a, const Array& b, double peak) { return psnr(to_tensor(a), to_tensor(b), peak); },
        py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def("ssim", [](const Array& a, const Array& b, double dynamic_range) {
    SsimOptions o;
    o.dynamic_range = dynamic_range;
    return ssim(to_tensor(a), to_tensor(b), o);
  }, py::arg("a"), py::arg("b"), py::arg("dynamic_range") = 2.0);

  m.def("init_params", [](std::uint64_t seed, int base_channels, int num_blocks, int time_embed_dim) {
    return params_to_dict(init_params(denoiser_config(base_channels, num_blocks, time_embed_dim), seed));
  }, py::arg("seed") = 0, py::arg("base_channels") = 32, py::arg("num_blocks") = 4, py::arg("time_embed_dim") = 32);
  m.def("parameter_count", [](const py::dict& p) { return parameter_count(params_from_dict(p)); });
  m.def("time_embedding", &time_embedding, py::arg("t"), py::arg("dim"));
  m.def("predict_x0", [](const py::dict& p, const Array& x, int t) {
    return to_array(predict_x0(params_from_dict(p), to_tensor(x), t));
  }, py::arg("params"), py::arg("p_t"), py::arg("t"));

  m.def("save_checkpoint", [](const py::dict& p, const std::filesystem::path& path) {
    save_checkpoint(params_from_dict(p), path);
  }, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", [](const std::filesystem::path& path) { return params_to_dict(load_checkpoint(path)); },
        py::arg("path"));
  m.def("write_imgf", [](const Array& img, const std::filesystem::path& path) { write_imgf(to_tensor(img), path); },
        py::arg("image"), py::arg("path"));
  m.def("read_imgf", [](const std::filesystem::path& path) { return to_array(read_imgf(path)); }, py::arg("path"));

  m.def("build_dataset", [](std::size_t n_paired, std::size_t n_unpaired, std::size_t n_test, std::size_t size,
                            std::uint64_t seed, const std::filesystem::path& out_dir) {
    build_dataset(n_paired, n_unpaired, n_test, size, DegradationConfig{}, seed, out_dir);
    return out_dir / "manifest.json";
  }, py::arg("n_paired"), py::arg("n_unpaired"), py::arg("n_test"), py::arg("size"), py::arg("seed"),
     py::arg("out_dir"));
  m.def("run_pipeline", [](const std::string& config_json, const std::filesystem::path& out_dir) {
    PipelineConfig cfg = parse_config(config_json);
    cfg.out_dir = out_dir;
    cfg.propagate();
    SelfTrainingSummary s;
    {
      py::gil_scoped_release release;
      s = run_pipeline(cfg);
    }
    py::list rows;
    for (const auto& r : s.reports) rows.append(report_to_dict(r));
    return rows;
  }, py::arg("config_json"), py::arg("out_dir"),
     "Runs data generation and the teacher/student workflow; returns the report rows.");
}
