#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "tailrisk/empirical.hpp"
#include "tailrisk/models.hpp"
#include "tailrisk/rng.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using Catch::Approx;

namespace {
std::vector<double> iota_losses(std::size_t n) {
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 1.0);
    return v;
}
}  // namespace

TEST_CASE("order_statistic basics") {
    CHECK(order_statistic(std::vector<double>{5, 1, 3}, 2) == 3.0);
    CHECK(order_statistic(std::vector<double>{7}, 1) == 7.0);
    CHECK(order_statistic(std::vector<double>{2, 2, 9}, 2) == 2.0);
    CHECK_THROWS_AS(order_statistic(std::vector<double>{1, 2}, 0), std::invalid_argument);
    CHECK_THROWS_AS(order_statistic(std::vector<double>{1, 2}, 3), std::invalid_argument);
}

TEST_CASE("sa_var matches the ceil(n(1-beta)) order statistic") {
    CHECK(sa_var(iota_losses(10), 0.2) == 8.0);
    CHECK(sa_var(std::vector<double>(17, 4.25), 0.3) == 4.25);
    CHECK(sa_var(iota_losses(100), 0.01) == 99.0);
    CHECK_THROWS_AS(sa_var(std::vector<double>{}, 0.1), std::invalid_argument);
}

TEST_CASE("sa_cvar hand values") {
    CHECK(sa_cvar(iota_losses(10), 0.2) == Approx(9.5).epsilon(1e-14));
    CHECK(sa_cvar(std::vector<double>(9, -2.5), 0.4) == Approx(-2.5));
    CHECK_THROWS_AS(sa_cvar(std::vector<double>{}, 0.1), std::invalid_argument);
}

TEST_CASE("sa_cvar approaches the pareto closed form") {
    const ParetoModel m(TailIndexVector({3.0}));
    const Matrix x = sample_pareto_matrix(m, 1'000'000, 2024);
    CHECK(sa_cvar(x.data(), 0.01) == Approx(pareto_cvar_closed_form(3.0, 0.01)).epsilon(0.02));
}

TEST_CASE("sa_cvar_gradient hand values and invariances") {
    Matrix samples(10, 1);
    for (std::size_t i = 0; i < 10; ++i) samples(i, 0) = static_cast<double>(i + 1);
    const std::vector<double> theta{1.0};

    // linear loss: v = 8; rows with L >= 8 contribute, so (8+9+10)/2
    const auto g_lin = sa_cvar_gradient(samples, theta, LossModel::linear(), 0.2);
    REQUIRE(g_lin.size() == 1);
    CHECK(g_lin[0] == Approx(13.5).epsilon(1e-14));

    // theta -> c*theta leaves the d=1 linear gradient unchanged
    const std::vector<double> theta3{3.0};
    const auto g_scaled = sa_cvar_gradient(samples, theta3, LossModel::linear(), 0.2);
    CHECK(g_scaled[0] == Approx(g_lin[0]).epsilon(1e-14));

    // squared loss: v over L = X^2 is 64; (2*64 + 2*81 + 2*100)/2
    const auto g_sq = sa_cvar_gradient(samples, theta, LossModel::squared(), 0.2);
    CHECK(g_sq[0] == Approx(245.0).epsilon(1e-14));
}

TEST_CASE("hill estimator hand value and preconditions") {
    CHECK(hill_estimator(std::vector<double>{1, 2, 4, 8}, 0.5) ==
          Approx(0.5 * (std::log(4.0) + std::log(2.0))).epsilon(1e-14));
    CHECK(hill_estimator(std::vector<double>{1, 2, 4, 8}, 0.5) == Approx(1.039721).epsilon(1e-5));

    CHECK_THROWS_AS(hill_estimator(std::vector<double>{1, 2, 4, 8}, 0.1),
                    std::invalid_argument);  // floor(n*beta0)=0
    CHECK_THROWS_AS(hill_estimator(std::vector<double>{-1, -2, 4, 8}, 0.5), std::domain_error);
    CHECK_THROWS_AS(hill_estimator(std::vector<double>{0, 0, 0, 8}, 0.25), std::domain_error);
}

TEST_CASE("hill estimator is exactly scale invariant") {
    Rng rng(31);
    std::vector<double> losses(200);
    for (double& l : losses) l = std::pow(rng.uniform(), -0.4);
    const double base = hill_estimator(losses, 0.12);
    for (const double c : {1e-6, 0.5, 3.0, 1e8}) {
        std::vector<double> scaled(losses);
        for (double& l : scaled) l *= c;
        CHECK(hill_estimator(scaled, 0.12) == Approx(base).margin(1e-12));
    }
}

TEST_CASE("hill estimator is consistent on exact pareto tails") {
    std::vector<double> estimates;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const ParetoModel m(TailIndexVector({3.0}));
        const Matrix x = sample_pareto_matrix(m, 100'000, derive_stream(5150, rep));
        estimates.push_back(hill_estimator(x.data(), 0.1));
    }
    std::vector<double> errs;
    for (double e : estimates) errs.push_back(std::abs(e - 1.0 / 3.0));
    CHECK(testsupport::median(errs) < 0.05);
}

TEST_CASE("sa estimators: ordering, top-k mean, affine equivariance, permutation") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> losses(50 + (trial % 7) * 13);
        for (double& l : losses) l = std::pow(rng.uniform(), -0.7) - 1.5;
        const double beta = 0.1 + 0.15 * (trial % 4);

        const double v = sa_var(losses, beta);
        const double cv = sa_cvar(losses, beta);
        CHECK(cv >= v);

        // positive-affine equivariance
        const double a = 2.25, b = -3.0;
        std::vector<double> affine(losses);
        for (double& l : affine) l = a * l + b;
        CHECK(sa_var(affine, beta) == Approx(a * v + b).margin(1e-10));
        CHECK(sa_cvar(affine, beta) == Approx(a * cv + b).margin(1e-10));

        // permutation invariance
        std::vector<double> shuffled(losses);
        for (std::size_t i = shuffled.size() - 1; i > 0; --i)
            std::swap(shuffled[i], shuffled[rng.next_u64() % (i + 1)]);
        CHECK(sa_var(shuffled, beta) == v);
        CHECK(sa_cvar(shuffled, beta) == Approx(cv).margin(1e-12));
    }

    // integral n*beta with distinct losses: sa_cvar is the mean of the top n*beta
    std::vector<double> distinct{3.5, -1.0, 12.0, 7.25, 0.5, 9.0, 4.0, 1.25, 6.0, 2.0};
    const double top2 = (12.0 + 9.0) / 2.0;
    CHECK(sa_cvar(distinct, 0.2) == Approx(top2).epsilon(1e-14));
}

TEST_CASE("gradient matches central finite differences of sa_cvar") {
    const ParetoModel m(TailIndexVector({3.0, 3.0, 3.0}));
    const Matrix x = sample_pareto_matrix(m, 100'000, 4242);
    const std::vector<double> theta{0.3, 0.5, 0.2};
    const double beta = 0.05;
    const double norm = std::sqrt(0.09 + 0.25 + 0.04);
    const double h = 1e-3 * norm;

    for (const LossModel& loss : {LossModel::linear(), LossModel::squared()}) {
        const auto grad = sa_cvar_gradient(x, theta, loss, beta);
        for (std::size_t k = 0; k < 3; ++k) {
            auto tp = theta, tm = theta;
            tp[k] += h;
            tm[k] -= h;
            const double cp = sa_cvar(compute_loss_sample(x, tp, loss).losses, beta);
            const double cm = sa_cvar(compute_loss_sample(x, tm, loss).losses, beta);
            const double fd = (cp - cm) / (2.0 * h);
            CHECK(grad[k] == Approx(fd).epsilon(0.02));
        }
    }
}

TEST_CASE("compute_loss_sample carries derivative rows when asked") {
    Matrix samples(3, 2);
    samples(0, 0) = 1.0; samples(0, 1) = 2.0;
    samples(1, 0) = 3.0; samples(1, 1) = 4.0;
    samples(2, 0) = 0.5; samples(2, 1) = 0.25;
    const std::vector<double> theta{2.0, 1.0};
    const auto ls = compute_loss_sample(samples, theta, LossModel::squared(), true);
    REQUIRE(ls.losses.size() == 3);
    CHECK(ls.losses[0] == Approx(16.0));   // (2+2)^2
    CHECK(ls.losses[1] == Approx(100.0));  // (6+4)^2
    REQUIRE(ls.loss_derivs.has_value());
    CHECK((*ls.loss_derivs)(1, 0) == Approx(2.0 * 10.0 * 3.0));  // ell'(u) x_k
    CHECK((*ls.loss_derivs)(1, 1) == Approx(2.0 * 10.0 * 4.0));
}

TEST_CASE("estimate_sample_average reports a coherent record") {
    const ParetoModel m(TailIndexVector({3.0, 3.0}));
    const Matrix x = sample_pareto_matrix(m, 5000, 9);
    const std::vector<double> theta{0.5, 0.5};
    const auto rep = estimate_sample_average(x, theta, LossModel::linear(), 0.05);
    CHECK(rep.method == Method::sample_average);
    CHECK(rep.cvar >= rep.var);
    CHECK(rep.n == 5000);
    CHECK(rep.gradient.has_value());
    CHECK_FALSE(rep.xi_hat.has_value());
}
