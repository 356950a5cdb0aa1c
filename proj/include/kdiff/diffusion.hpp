#pragma once

#include <vector>

#include "kdiff/mat.hpp"
#include "kdiff/rng.hpp"

namespace kdiff {

/// Noise schedule: betas and the cumulative products
/// alpha_bar_t = prod_{i<=t} (1 - beta_i). Timesteps are 1-based;
/// alpha_bar(0) == 1 by convention so the last reverse step emits the
/// clean latent.
struct DiffusionSchedule {
    int T = 0;
    std::vector<double> betas;      // betas[t-1] = beta_t
    std::vector<double> alpha_bars; // alpha_bars[t-1] = alpha_bar_t

    double beta(int t) const;
    double alpha_bar(int t) const; // alpha_bar(0) == 1
};

inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 2e-2;
inline constexpr int kDefaultTrainSteps = 1000;

/// Linear beta schedule from beta_start to beta_end over T steps.
DiffusionSchedule make_schedule(int T, double beta_start = kDefaultBetaStart,
                                double beta_end = kDefaultBetaEnd);

/// Closed-form forward noising:
/// z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps.
Mat forward_sample(const Mat& z0, int t, const Mat& eps, const DiffusionSchedule& sched);

/// Mean squared error over all elements of eps_hat - eps.
double training_loss(const Mat& eps_hat, const Mat& eps);

/// Strictly decreasing sampling timesteps, uniformly strided, always
/// ending at 1.
struct TimestepSubsequence {
    std::vector<int> steps;
};

TimestepSubsequence ddim_timesteps(int T, int n_steps);

/// Deterministic DDIM update (sigma_t = 0) from timestep t to t_prev;
/// t_prev = 0 yields the fully denoised prediction.
Mat ddim_step(const Mat& z_t, const Mat& eps_hat, int t, int t_prev,
              const DiffusionSchedule& sched);

/// Stochastic variant with DDIM's sigma_t scaled by eta; eta = 0
/// reduces exactly to ddim_step. Not the default sampling path.
Mat ddim_step_stochastic(const Mat& z_t, const Mat& eps_hat, int t, int t_prev,
                         const DiffusionSchedule& sched, double eta, Rng& rng);

} // namespace kdiff
