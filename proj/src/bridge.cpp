#include "bbkd/bridge.hpp"

#include <cmath>
#include <string>

#include "bbkd/error.hpp"

namespace bbkd {

namespace {

void check_step(const BridgeSchedule& sched, int t, int lo, const char* where) {
  require(sched.T >= 2 && static_cast<int>(sched.k.size()) == sched.T + 1, ErrorKind::State,
          std::string(where) + ": schedule is not initialized");
  require(t >= lo && t <= sched.T, ErrorKind::InvalidArgument,
          std::string(where) + ": step " + std::to_string(t) + " outside [" +
              std::to_string(lo) + ", " + std::to_string(sched.T) + "]");
}

}  // namespace

BridgeSchedule make_schedule(int T) {
  require(T >= 2, ErrorKind::InvalidArgument, "make_schedule: T must be >= 2, got " + std::to_string(T));
  BridgeSchedule s;
  s.T = T;
  s.k.resize(T + 1);
  s.var.resize(T + 1);
  for (int t = 0; t <= T; ++t) {
    const double k = static_cast<double>(t) / static_cast<double>(T);
    s.k[t] = k;
    s.var[t] = 2.0 * k * (1.0 - k);
  }
  // Exact endpoints regardless of rounding.
  s.k[T] = 1.0;
  s.var[0] = 0.0;
  s.var[T] = 0.0;
  return s;
}

TransitionCoeffs transition_coeffs(const BridgeSchedule& sched, int t, int prev) {
  check_step(sched, t, 1, "transition_coeffs");
  require(prev >= 0 && prev < t, ErrorKind::InvalidArgument,
          "transition_coeffs: need 0 <= prev < t");
  TransitionCoeffs c;
  if (t == sched.T) {
    // Limit form: the bridge is pinned to Q at the endpoint.
    c.a = 0.0;
    c.b = 1.0;
    c.s = 0.0;
    return c;
  }
  const double kt = sched.k[t], kp = sched.k[prev];
  c.a = (1.0 - kt) / (1.0 - kp);
  c.b = kt - c.a * kp;
  c.s = sched.var[t] - c.a * c.a * sched.var[prev];
  // Cancellation can leave a tiny negative residue; anything larger means the
  // schedule is corrupt.
  require(c.s > -1e-12, ErrorKind::State,
          "transition_coeffs: negative transition variance " + std::to_string(c.s));
  if (c.s < 0.0) c.s = 0.0;
  return c;
}

Tensor forward_sample(const Tensor& p0, const Tensor& q, int t, const BridgeSchedule& sched,
                      const Tensor& noise) {
  require_same_shape(p0, q, "forward_sample");
  require_same_shape(p0, noise, "forward_sample");
  check_step(sched, t, 0, "forward_sample");
  if (t == 0) return p0;
  if (t == sched.T) return q;
  const double kt = sched.k[t];
  const double sd = std::sqrt(sched.var[t]);
  Tensor out(p0.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - kt) * p0[i] + kt * q[i] + sd * noise[i];
  out.check_finite("forward_sample");
  return out;
}

Tensor transition_sample(const Tensor& p_prev, const Tensor& q, int t,
                         const BridgeSchedule& sched, const Tensor& noise) {
  require_same_shape(p_prev, q, "transition_sample");
  require_same_shape(p_prev, noise, "transition_sample");
  check_step(sched, t, 1, "transition_sample");
  const TransitionCoeffs c = transition_coeffs(sched, t, t - 1);
  if (t == sched.T) return q;
  const double sd = std::sqrt(c.s);
  Tensor out(p_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = c.a * p_prev[i] + c.b * q[i] + sd * noise[i];
  out.check_finite("transition_sample");
  return out;
}

PosteriorParams posterior_params(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q,
                                 int t, const BridgeSchedule& sched) {
  return posterior_params(p_t, p0_hat, q, t, t - 1, sched);
}

PosteriorParams posterior_params(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q,
                                 int t, int prev, const BridgeSchedule& sched) {
  require_same_shape(p_t, q, "posterior_params");
  require_same_shape(p0_hat, q, "posterior_params");
  check_step(sched, t, 1, "posterior_params");
  require(prev >= 0 && prev < t, ErrorKind::InvalidArgument,
          "posterior_params: need 0 <= prev < t");

  const double kp = sched.k[prev];
  PosteriorParams out;
  out.mean = Tensor(q.shape());
  if (prev == 0) {
    // Target is P_0 itself: the estimate is returned as-is.
    out.mean = p0_hat;
    out.variance = 0.0;
    return out;
  }
  if (t == sched.T) {
    // P_T = Q carries no information beyond Q, so this is the forward
    // marginal at `prev`.
    for (std::size_t i = 0; i < q.size(); ++i) out.mean[i] = (1.0 - kp) * p0_hat[i] + kp * q[i];
    out.variance = sched.var[prev];
    out.mean.check_finite("posterior_params");
    return out;
  }

  const TransitionCoeffs c = transition_coeffs(sched, t, prev);
  const double vt = sched.var[t], vp = sched.var[prev];
  const double w_marginal = c.s / vt;
  const double w_obs = c.a * vp / vt;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double m_prev = (1.0 - kp) * p0_hat[i] + kp * q[i];
    out.mean[i] = w_marginal * m_prev + w_obs * (p_t[i] - c.b * q[i]);
  }
  out.variance = vp * c.s / vt;
  out.mean.check_finite("posterior_params");
  return out;
}

Tensor reverse_step(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q, int t,
                    const BridgeSchedule& sched, const Tensor& noise) {
  return reverse_step(p_t, p0_hat, q, t, t - 1, sched, noise);
}

Tensor reverse_step(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q, int t, int prev,
                    const BridgeSchedule& sched, const Tensor& noise) {
  require_same_shape(p_t, noise, "reverse_step");
  PosteriorParams post = posterior_params(p_t, p0_hat, q, t, prev, sched);
  if (post.variance == 0.0) return std::move(post.mean);
  const double sd = std::sqrt(post.variance);
  for (std::size_t i = 0; i < post.mean.size(); ++i) post.mean[i] += sd * noise[i];
  post.mean.check_finite("reverse_step");
  return std::move(post.mean);
}

Tensor sample_translation(const Tensor& q, const PredictX0& predict_x0,
                          const BridgeSchedule& sched, Rng& rng, int stride) {
  require(stride >= 1 && sched.T % stride == 0, ErrorKind::InvalidArgument,
          "sample_translation: stride " + std::to_string(stride) + " must divide T=" +
              std::to_string(sched.T));
  Tensor p = q;
  for (int t = sched.T; t > 0; t -= stride) {
    const Tensor p0_hat = predict_x0(p, t);
    require_same_shape(p0_hat, q, "sample_translation: predict_x0 output");
    const int prev = t - stride;
    // The last step is deterministic; skip drawing noise for it.
    const Tensor noise = prev == 0 ? Tensor(q.shape()) : rng.normal_tensor(q.shape());
    p = reverse_step(p, p0_hat, q, t, prev, sched, noise);
  }
  return p;
}

TrainingPair make_training_pair(const Tensor& p0, const Tensor& q, const BridgeSchedule& sched,
                                Rng& rng) {
  require_same_shape(p0, q, "make_training_pair");
  TrainingPair pair;
  pair.t = static_cast<int>(rng.uniform_int(1, sched.T));
  const Tensor noise = rng.normal_tensor(p0.shape());
  pair.p_t = forward_sample(p0, q, pair.t, sched, noise);
  pair.target = p0;
  return pair;
}

}  // namespace bbkd
