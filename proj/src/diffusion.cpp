#include "kdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kdiff {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

double DiffusionSchedule::beta(int t) const {
    require(t >= 1 && t <= T, "DiffusionSchedule::beta: t out of range");
    return betas[static_cast<std::size_t>(t - 1)];
}

double DiffusionSchedule::alpha_bar(int t) const {
    require(t >= 0 && t <= T, "DiffusionSchedule::alpha_bar: t out of range");
    if (t == 0) return 1.0;
    return alpha_bars[static_cast<std::size_t>(t - 1)];
}

DiffusionSchedule make_schedule(int T, double beta_start, double beta_end) {
    require(T >= 1, "make_schedule: T must be >= 1");
    require(beta_start > 0.0 && beta_start < 1.0, "make_schedule: beta_start outside (0,1)");
    require(beta_end > 0.0 && beta_end < 1.0, "make_schedule: beta_end outside (0,1)");
    require(beta_start < beta_end, "make_schedule: beta_start must be < beta_end");

    DiffusionSchedule sched;
    sched.T = T;
    sched.betas.resize(static_cast<std::size_t>(T));
    sched.alpha_bars.resize(static_cast<std::size_t>(T));
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        prod *= 1.0 - beta;
        sched.betas[static_cast<std::size_t>(t - 1)] = beta;
        sched.alpha_bars[static_cast<std::size_t>(t - 1)] = prod;
    }
    return sched;
}

Mat forward_sample(const Mat& z0, int t, const Mat& eps, const DiffusionSchedule& sched) {
    require(t >= 1 && t <= sched.T, "forward_sample: t out of range [1, T]");
    require(z0.same_shape(eps), "forward_sample: eps shape must match z0");

    const double ab = sched.alpha_bar(t);
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    Mat out(z0.rows(), z0.cols());
    for (std::size_t i = 0; i < z0.size(); ++i)
        out.data()[i] = signal * z0.data()[i] + noise * eps.data()[i];
    return out;
}

double training_loss(const Mat& eps_hat, const Mat& eps) {
    require(eps_hat.same_shape(eps), "training_loss: shape mismatch");
    require(eps_hat.size() > 0, "training_loss: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps_hat.data()[i] - eps.data()[i];
        sum += d * d;
    }
    return sum / static_cast<double>(eps.size());
}

TimestepSubsequence ddim_timesteps(int T, int n_steps) {
    require(T >= 1, "ddim_timesteps: T must be >= 1");
    require(n_steps >= 1 && n_steps <= T,
            "ddim_timesteps: n_steps must be in [1, T], got " + std::to_string(n_steps));

    const int stride = T / n_steps;
    TimestepSubsequence seq;
    seq.steps.resize(static_cast<std::size_t>(n_steps));
    for (int i = 0; i < n_steps; ++i)
        seq.steps[static_cast<std::size_t>(i)] = 1 + (n_steps - 1 - i) * stride;
    return seq;
}

Mat ddim_step(const Mat& z_t, const Mat& eps_hat, int t, int t_prev,
              const DiffusionSchedule& sched) {
    require(z_t.same_shape(eps_hat), "ddim_step: shape mismatch");
    require(t_prev >= 0 && t > t_prev, "ddim_step: need t > t_prev >= 0");
    require(t <= sched.T, "ddim_step: t out of range");

    const double ab_t = sched.alpha_bar(t);
    const double ab_p = sched.alpha_bar(t_prev);
    const double inv_sqrt_ab_t = 1.0 / std::sqrt(ab_t);
    const double noise_t = std::sqrt(1.0 - ab_t);
    const double signal_p = std::sqrt(ab_p);
    const double noise_p = std::sqrt(1.0 - ab_p);

    Mat out(z_t.rows(), z_t.cols());
    for (std::size_t i = 0; i < z_t.size(); ++i) {
        const double z0_hat = (z_t.data()[i] - noise_t * eps_hat.data()[i]) * inv_sqrt_ab_t;
        out.data()[i] = signal_p * z0_hat + noise_p * eps_hat.data()[i];
    }
    return out;
}

Mat ddim_step_stochastic(const Mat& z_t, const Mat& eps_hat, int t, int t_prev,
                         const DiffusionSchedule& sched, double eta, Rng& rng) {
    require(z_t.same_shape(eps_hat), "ddim_step_stochastic: shape mismatch");
    require(t_prev >= 0 && t > t_prev, "ddim_step_stochastic: need t > t_prev >= 0");
    require(t <= sched.T, "ddim_step_stochastic: t out of range");
    require(eta >= 0.0, "ddim_step_stochastic: eta must be >= 0");

    if (eta == 0.0) return ddim_step(z_t, eps_hat, t, t_prev, sched);

    const double ab_t = sched.alpha_bar(t);
    const double ab_p = sched.alpha_bar(t_prev);
    const double sigma =
        eta * std::sqrt((1.0 - ab_p) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_p);
    const double inv_sqrt_ab_t = 1.0 / std::sqrt(ab_t);
    const double noise_t = std::sqrt(1.0 - ab_t);
    const double signal_p = std::sqrt(ab_p);
    const double dir = std::sqrt(std::max(0.0, 1.0 - ab_p - sigma * sigma));

    Mat out(z_t.rows(), z_t.cols());
    for (std::size_t i = 0; i < z_t.size(); ++i) {
        const double z0_hat = (z_t.data()[i] - noise_t * eps_hat.data()[i]) * inv_sqrt_ab_t;
        out.data()[i] = signal_p * z0_hat + dir * eps_hat.data()[i] + sigma * rng.normal();
    }
    return out;
}

} // namespace kdiff
