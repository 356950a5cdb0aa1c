#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kdiff/diffusion.hpp"
#include "kdiff/rng.hpp"

using namespace kdiff;

TEST_CASE("default schedule has 1000 strictly increasing betas") {
    const DiffusionSchedule sched = make_schedule(1000);
    REQUIRE(sched.T == 1000);
    REQUIRE(sched.betas.size() == 1000);
    CHECK(sched.betas.front() == kDefaultBetaStart);
    CHECK(sched.betas.back() == kDefaultBetaEnd);
    for (std::size_t i = 1; i < sched.betas.size(); ++i) {
        CHECK(sched.betas[i] > sched.betas[i - 1]);
        CHECK(sched.betas[i] > 0.0);
        CHECK(sched.betas[i] < 1.0);
    }
    for (std::size_t i = 0; i < sched.alpha_bars.size(); ++i) {
        CHECK(sched.alpha_bars[i] > 0.0);
        CHECK(sched.alpha_bars[i] < 1.0);
        if (i > 0) CHECK(sched.alpha_bars[i] < sched.alpha_bars[i - 1]);
    }
    CHECK(sched.alpha_bars.back() < sched.alpha_bars.front());

    // Product identity against a direct loop.
    double prod = 1.0;
    for (int t = 1; t <= sched.T; ++t) {
        prod *= 1.0 - sched.beta(t);
        CHECK(std::abs(sched.alpha_bar(t) - prod) <= 1e-12 * prod);
    }
}

TEST_CASE("single-step schedule has alpha_bar = 1 - beta_1") {
    const DiffusionSchedule sched = make_schedule(1, 1e-4, 2e-2);
    REQUIRE(sched.alpha_bars.size() == 1);
    CHECK(sched.alpha_bars[0] == 1.0 - 1e-4);
}

TEST_CASE("hand-multiplied partial products for T=4") {
    // betas 0.1, 0.2, 0.3, 0.4:
    //   0.9, 0.9*0.8 = 0.72, 0.72*0.7 = 0.504, 0.504*0.6 = 0.3024
    const DiffusionSchedule sched = make_schedule(4, 0.1, 0.4);
    const double expected[4] = {0.9, 0.72, 0.504, 0.3024};
    for (int t = 1; t <= 4; ++t)
        CHECK(std::abs(sched.alpha_bar(t) - expected[t - 1]) <= 1e-12 * expected[t - 1]);
}

TEST_CASE("schedule rejects bad ranges") {
    CHECK_THROWS_AS(make_schedule(0), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.5, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("forward_sample edge cases") {
    const DiffusionSchedule sched = make_schedule(100);
    Rng rng(21);
    const Mat z0 = rng.normal_mat(5, 7);
    const Mat zero(5, 7);

    const Mat no_noise = forward_sample(z0, 40, zero, sched);
    const double root_ab = std::sqrt(sched.alpha_bar(40));
    for (std::size_t i = 0; i < z0.size(); ++i)
        CHECK(no_noise.data()[i] == doctest::Approx(root_ab * z0.data()[i]).epsilon(1e-15));

    const Mat eps = rng.normal_mat(5, 7);
    const Mat pure_noise = forward_sample(zero, 40, eps, sched);
    const double root_1mab = std::sqrt(1.0 - sched.alpha_bar(40));
    for (std::size_t i = 0; i < eps.size(); ++i)
        CHECK(pure_noise.data()[i] == doctest::Approx(root_1mab * eps.data()[i]).epsilon(1e-15));

    CHECK_THROWS_AS(forward_sample(z0, 0, eps, sched), std::invalid_argument);
    CHECK_THROWS_AS(forward_sample(z0, 101, eps, sched), std::invalid_argument);
    CHECK_THROWS_AS(forward_sample(z0, 5, Mat(4, 7), sched), std::invalid_argument);
}

TEST_CASE("closed form matches the single-step recursion in distribution") {
    // Monte-Carlo oracle on z_t = sqrt(1-beta_t) z_{t-1} + sqrt(beta_t) eps.
    const int T = 6;
    const DiffusionSchedule sched = make_schedule(T, 0.05, 0.2);
    const double z0 = 1.0;

    Rng rng(22);
    const std::size_t n_samples = 400000;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        double z = z0;
        for (int t = 1; t <= T; ++t)
            z = std::sqrt(1.0 - sched.beta(t)) * z + std::sqrt(sched.beta(t)) * rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mc_mean = sum / static_cast<double>(n_samples);
    const double mc_var = sum_sq / static_cast<double>(n_samples) - mc_mean * mc_mean;

    const double expected_mean = std::sqrt(sched.alpha_bar(T)) * z0;
    const double expected_var = 1.0 - sched.alpha_bar(T);
    CHECK(std::abs(mc_mean - expected_mean) < 1e-2 * expected_mean);
    CHECK(std::abs(mc_var - expected_var) < 1e-2 * expected_var);
}

TEST_CASE("training loss basics and loop oracle") {
    Rng rng(23);
    const Mat a = rng.normal_mat(6, 9);
    CHECK(training_loss(a, a) == 0.0);

    Mat shifted = a;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] += 1.0;
    CHECK(training_loss(shifted, a) == doctest::Approx(1.0).epsilon(1e-12));

    const Mat b = rng.normal_mat(6, 9);
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) {
            const double d = a(r, c) - b(r, c);
            acc += d * d;
        }
    const double expected = acc / static_cast<double>(a.size());
    CHECK(std::abs(training_loss(a, b) - expected) <= 1e-12 * expected);

    CHECK_THROWS_AS(training_loss(a, Mat(5, 9)), std::invalid_argument);
}

TEST_CASE("ddim timesteps stride uniformly and end at 1") {
    const TimestepSubsequence ts = ddim_timesteps(1000, 50);
    REQUIRE(ts.steps.size() == 50);
    CHECK(ts.steps.front() == 981);
    CHECK(ts.steps.back() == 1);
    for (std::size_t i = 1; i < ts.steps.size(); ++i)
        CHECK(ts.steps[i - 1] - ts.steps[i] == 20);

    const TimestepSubsequence full = ddim_timesteps(12, 12);
    REQUIRE(full.steps.size() == 12);
    for (int i = 0; i < 12; ++i) CHECK(full.steps[static_cast<std::size_t>(i)] == 12 - i);

    const TimestepSubsequence two = ddim_timesteps(10, 2);
    REQUIRE(two.steps.size() == 2);
    CHECK(two.steps[0] == 6);
    CHECK(two.steps[1] == 1);
    CHECK(two.steps[0] > two.steps[1]);

    CHECK_THROWS_AS(ddim_timesteps(10, 11), std::invalid_argument);
    CHECK_THROWS_AS(ddim_timesteps(10, 0), std::invalid_argument);
}

TEST_CASE("ddim_step inverts the forward process when given the true noise") {
    const DiffusionSchedule sched = make_schedule(1000);
    Rng rng(24);
    const Mat z0w = rng.normal_mat(4, 70);
    const Mat eps = rng.normal_mat(4, 70);

    const Mat z500 = forward_sample(z0w, 500, eps, sched);
    const Mat z250 = ddim_step(z500, eps, 500, 250, sched);
    const Mat expected_250 = forward_sample(z0w, 250, eps, sched);
    CHECK(max_abs_diff(z250, expected_250) < 1e-9);

    const Mat recovered = ddim_step(z500, eps, 500, 0, sched);
    CHECK(max_abs_diff(recovered, z0w) < 1e-9);

    // Determinism: identical inputs, identical bits.
    const Mat again = ddim_step(z500, eps, 500, 250, sched);
    CHECK(again == z250);

    CHECK_THROWS_AS(ddim_step(z500, eps, 250, 250, sched), std::invalid_argument);
    CHECK_THROWS_AS(ddim_step(z500, eps, 250, 500, sched), std::invalid_argument);
}

TEST_CASE("cheating denoiser recovers z0 through 1-step and 50-step chains") {
    const DiffusionSchedule sched = make_schedule(1000);
    Rng rng(25);
    const Mat z0 = rng.normal_mat(8, 70);
    const Mat eps = rng.normal_mat(8, 70);

    for (int n_steps : {1, 50}) {
        const TimestepSubsequence ts = ddim_timesteps(sched.T, n_steps);
        Mat z = forward_sample(z0, ts.steps.front(), eps, sched);
        for (std::size_t i = 0; i < ts.steps.size(); ++i) {
            const int t = ts.steps[i];
            const int t_prev = i + 1 < ts.steps.size() ? ts.steps[i + 1] : 0;
            z = ddim_step(z, eps, t, t_prev, sched);
        }
        CHECK(max_abs_diff(z, z0) < 1e-6);
    }
}

TEST_CASE("full ddim chain is bit-deterministic") {
    const DiffusionSchedule sched = make_schedule(1000);
    auto run_chain = [&sched]() {
        Rng rng(26);
        const Mat z0 = rng.normal_mat(6, 70);
        const Mat eps = rng.normal_mat(6, 70);
        const TimestepSubsequence ts = ddim_timesteps(sched.T, 50);
        Mat z = forward_sample(z0, ts.steps.front(), eps, sched);
        for (std::size_t i = 0; i < ts.steps.size(); ++i)
            z = ddim_step(z, eps, ts.steps[i], i + 1 < ts.steps.size() ? ts.steps[i + 1] : 0,
                          sched);
        return z;
    };
    CHECK(run_chain() == run_chain());
}

TEST_CASE("stochastic step with eta=0 equals the deterministic step") {
    const DiffusionSchedule sched = make_schedule(1000);
    Rng rng(27);
    const Mat z = rng.normal_mat(3, 70);
    const Mat eps_hat = rng.normal_mat(3, 70);

    Rng noise_rng(1);
    const Mat det = ddim_step(z, eps_hat, 600, 400, sched);
    const Mat eta0 = ddim_step_stochastic(z, eps_hat, 600, 400, sched, 0.0, noise_rng);
    CHECK(eta0 == det);

    Rng noise_a(2), noise_b(2), noise_c(3);
    const Mat sa = ddim_step_stochastic(z, eps_hat, 600, 400, sched, 1.0, noise_a);
    const Mat sb = ddim_step_stochastic(z, eps_hat, 600, 400, sched, 1.0, noise_b);
    const Mat sc = ddim_step_stochastic(z, eps_hat, 600, 400, sched, 1.0, noise_c);
    CHECK(sa == sb);              // same noise stream
    CHECK(max_abs_diff(sa, sc) > 0.0); // different noise stream
    CHECK(max_abs_diff(sa, det) > 0.0);
}
