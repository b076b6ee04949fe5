#pragma once

#include <functional>
#include <vector>

#include "bbkd/rng.hpp"
#include "bbkd/tensor.hpp"

namespace bbkd {

/// Brownian-bridge schedule over T steps: k[t] = t/T and
/// var[t] = 2 k[t] (1 - k[t]). Both endpoints have zero variance.
struct BridgeSchedule {
  int T = 0;
  std::vector<double> k;
  std::vector<double> var;
};

BridgeSchedule make_schedule(int T);

/// Coefficients of the forward kernel q(P_t | P_s, Q) = N(a P_s + b Q, s I)
/// between two steps s < t.
struct TransitionCoeffs {
  double a = 0.0;
  double b = 0.0;
  double s = 0.0;
};

TransitionCoeffs transition_coeffs(const BridgeSchedule& sched, int t, int prev);

/// Mean and isotropic variance of q(P_prev | P_t, P_0 = P0_hat, Q).
struct PosteriorParams {
  Tensor mean;
  double variance = 0.0;
};

/// P_t = (1 - k_t) P0 + k_t Q + sqrt(var_t) noise.
Tensor forward_sample(const Tensor& p0, const Tensor& q, int t, const BridgeSchedule& sched,
                      const Tensor& noise);

/// One forward Markov step P_{t-1} -> P_t.
Tensor transition_sample(const Tensor& p_prev, const Tensor& q, int t,
                         const BridgeSchedule& sched, const Tensor& noise);

PosteriorParams posterior_params(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q,
                                 int t, const BridgeSchedule& sched);
/// Strided variant targeting step `prev` < t instead of t - 1.
PosteriorParams posterior_params(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q,
                                 int t, int prev, const BridgeSchedule& sched);

Tensor reverse_step(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q, int t,
                    const BridgeSchedule& sched, const Tensor& noise);
Tensor reverse_step(const Tensor& p_t, const Tensor& p0_hat, const Tensor& q, int t, int prev,
                    const BridgeSchedule& sched, const Tensor& noise);

/// The denoiser sees only the current state and its step index; the
/// conditional image enters through the start point and the analytic
/// coefficients.
using PredictX0 = std::function<Tensor(const Tensor& p_t, int t)>;

/// Runs the reverse chain from P_T = Q down to P_0 in steps of `stride`.
Tensor sample_translation(const Tensor& q, const PredictX0& predict_x0,
                          const BridgeSchedule& sched, Rng& rng, int stride = 1);

struct TrainingPair {
  Tensor p_t;
  int t = 0;
  Tensor target;
};

/// Draws t uniformly from {1..T} and standard-normal noise from `rng`.
TrainingPair make_training_pair(const Tensor& p0, const Tensor& q, const BridgeSchedule& sched,
                                Rng& rng);

}  // namespace bbkd
