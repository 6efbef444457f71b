#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tailrisk/empirical.hpp"
#include "tailrisk/extrapolation.hpp"
#include "tailrisk/models.hpp"
#include "test_support.hpp"

using namespace tailrisk;
using Catch::Approx;

TEST_CASE("extrapolate hand values and unit factors") {
    CHECK(extrapolate(1.0, 1.0 / 3.0, TailLevels(0.01, 0.1)) ==
          Approx(2.154434690031884).epsilon(1e-12));
    CHECK(extrapolate(7.125, 0.8, TailLevels(0.05, 0.05)) == 7.125);
    CHECK(extrapolate(7.125, 0.0, TailLevels(0.001, 0.2)) == 7.125);

    const std::vector<double> vec{2.0, -4.0, 0.5};
    const auto out = extrapolate(vec, 0.5, TailLevels(0.01, 0.04));
    REQUIRE(out.size() == 3);
    CHECK(out[0] == Approx(4.0).epsilon(1e-12));  // factor = 4^{1/2} = 2
    CHECK(out[1] == Approx(-8.0).epsilon(1e-12));
    CHECK(out[2] == Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(extrapolate(1.0, std::nan(""), TailLevels(0.01, 0.1)),
                    std::invalid_argument);
}

TEST_CASE("extrapolation identity at the pareto fixed point") {
    // C_beta = (beta0/beta)^{1/alpha} C_beta0 holds exactly for pareto tails.
    for (const double alpha : {1.5, 3.0, 6.0}) {
        for (const auto& [beta, beta0] : std::vector<std::pair<double, double>>{
                 {0.01, 0.1}, {0.001, 0.05}, {0.02, 0.2}}) {
            const double lhs =
                extrapolate(pareto_cvar_closed_form(alpha, beta0), 1.0 / alpha,
                            TailLevels(beta, beta0));
            CHECK(lhs == Approx(pareto_cvar_closed_form(alpha, beta)).epsilon(1e-12));
        }
    }
}

TEST_CASE("estimate_extrapolated with beta0 = beta equals the SA report exactly") {
    const ParetoModel m(TailIndexVector({3.0, 4.0}));
    const Matrix x = sample_pareto_matrix(m, 1000, 515);
    const std::vector<double> theta{0.7, 0.3};
    const auto ext = estimate_extrapolated(x, theta, LossModel::linear(), TailLevels(0.1, 0.1));
    const auto sa = estimate_sample_average(x, theta, LossModel::linear(), 0.1);
    CHECK(ext.cvar == sa.cvar);
    CHECK(ext.var == sa.var);
    REQUIRE(ext.gradient.has_value());
    for (std::size_t k = 0; k < 2; ++k) CHECK((*ext.gradient)[k] == (*sa.gradient)[k]);
    CHECK(ext.method == Method::extrapolated);
    CHECK(ext.xi_hat.has_value());
}

TEST_CASE("extrapolated cvar hits the pareto closed form, linear loss") {
    const ParetoModel m(TailIndexVector({3.0}));
    const std::vector<double> theta{1.0};
    const TailLevels levels(0.01, 0.1);
    std::vector<double> errs;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const Matrix x = sample_pareto_matrix(m, 10'000, derive_stream(808, rep));
        const auto est = estimate_extrapolated(x, theta, LossModel::linear(), levels);
        errs.push_back(std::abs(est.cvar - pareto_cvar_closed_form(3.0, 0.01)) /
                       pareto_cvar_closed_form(3.0, 0.01));
    }
    CHECK(testsupport::median(errs) < 0.10);
}

TEST_CASE("extrapolated cvar hits the closed form for the squared loss") {
    // X ~ pareto(6) and L = X^2 make L pareto(3); alpha_L = 3 closed form.
    const ParetoModel m(TailIndexVector({6.0}));
    const std::vector<double> theta{1.0};
    const TailLevels levels(0.01, 0.08);
    const double target = pareto_cvar_closed_form(3.0, 0.01);
    std::vector<double> errs;
    for (std::uint64_t rep = 0; rep < 60; ++rep) {
        const Matrix x = sample_pareto_matrix(m, 10'000, derive_stream(909, rep));
        const auto est = estimate_extrapolated(x, theta, LossModel::squared(), levels);
        errs.push_back(std::abs(est.cvar - target) / target);
    }
    CHECK(testsupport::median(errs) < 0.10);
}

TEST_CASE("extrapolated estimates are scale equivariant with xi unchanged") {
    const ParetoModel m(TailIndexVector({3.0, 3.0}));
    const Matrix x = sample_pareto_matrix(m, 2000, 33);
    Matrix scaled(x);
    const double c = 7.25;
    for (double& v : scaled.data()) v *= c;
    const std::vector<double> theta{0.5, 0.5};
    const TailLevels levels(0.02, 0.1);
    const auto base = estimate_extrapolated(x, theta, LossModel::linear(), levels);
    const auto big = estimate_extrapolated(scaled, theta, LossModel::linear(), levels);
    CHECK(big.cvar == Approx(c * base.cvar).epsilon(1e-10));
    CHECK(*big.xi_hat == Approx(*base.xi_hat).margin(1e-10));
    for (std::size_t k = 0; k < 2; ++k)
        CHECK((*big.gradient)[k] == Approx(c * (*base.gradient)[k]).epsilon(1e-10));
}

TEST_CASE("gradient and cvar extrapolate by the same factor with an exact tail identity") {
    // For linear loss at d=1, theta=1 the base-level pieces obey
    //   grad0 = cvar0 + v0 * (m/(n beta0) - 1),   m = #{L >= v0},
    // and both are extrapolated by the same (beta0/beta)^{xi} factor.
    const ParetoModel m(TailIndexVector({3.0}));
    const std::vector<double> theta{1.0};
    const TailLevels levels(0.01, 0.1);
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        const Matrix x = sample_pareto_matrix(m, 1000, derive_stream(7117, rep));
        const auto est = estimate_extrapolated(x, theta, LossModel::linear(), levels);
        const auto ls = compute_loss_sample(x, theta, LossModel::linear());
        const double v0 = sa_var(ls.losses, levels.beta0);
        const double cvar0 = sa_cvar(ls.losses, levels.beta0);
        const auto grad0 = sa_cvar_gradient(x, theta, LossModel::linear(), levels.beta0);
        std::size_t tail = 0;
        for (double l : ls.losses)
            if (l >= v0) ++tail;
        const double nb = 1000.0 * levels.beta0;
        CHECK(grad0[0] ==
              Approx(cvar0 + v0 * (static_cast<double>(tail) / nb - 1.0)).epsilon(1e-12));
        const double factor = est.cvar / cvar0;
        CHECK((*est.gradient)[0] == Approx(factor * grad0[0]).epsilon(1e-12));
    }
}

TEST_CASE("consistency trend: relative error does not degrade along the schedule") {
    // Desk-size preview of the acceptance schedule (beta = 10/n, beta0/beta = 10).
    const ParetoModel m(TailIndexVector({3.0}));
    const std::vector<double> theta{1.0};
    std::vector<double> medians;
    std::size_t cell = 0;
    for (const std::size_t n : {std::size_t{1000}, std::size_t{10'000}}) {
        const double beta = 10.0 / static_cast<double>(n);
        const TailLevels levels(beta, 10.0 * beta);
        const double target = pareto_cvar_closed_form(3.0, beta);
        std::vector<double> errs;
        for (std::uint64_t rep = 0; rep < 60; ++rep) {
            const Matrix x = sample_pareto_matrix(m, n, derive_stream(1812, cell, rep));
            const auto est = estimate_extrapolated(x, theta, LossModel::linear(), levels);
            errs.push_back(std::abs(est.cvar - target) / target);
        }
        medians.push_back(testsupport::median(errs));
        ++cell;
    }
    const bool ok = medians[1] <= medians[0] ||
                    (medians[1] - medians[0]) <= 0.1 * std::max(medians[0], medians[1]);
    CHECK(ok);
}

TEST_CASE("select_beta0 basics") {
    const ParetoModel m(TailIndexVector({3.0}));
    const Matrix x = sample_pareto_matrix(m, 4000, 61);
    const std::vector<double> theta{1.0};

    // single candidate: no choice
    ExtrapolationConfig single{TailLevels(0.01, 0.1), {0.1}, 5};
    CHECK(select_beta0(x, theta, LossModel::linear(), 0.01, single, 4) == 0.1);

    // degenerate candidate set {beta, 2beta} stays well-defined and deterministic
    ExtrapolationConfig degen{TailLevels(0.01, 0.02), {0.01, 0.02}, 4};
    const double picked = select_beta0(x, theta, LossModel::linear(), 0.01, degen, 4);
    CHECK((picked == 0.01 || picked == 0.02));
    CHECK(select_beta0(x, theta, LossModel::linear(), 0.01, degen, 4) == picked);

    // all candidates infeasible: too few tail points per training fold
    const Matrix tiny = sample_pareto_matrix(m, 60, 62);
    ExtrapolationConfig bad{TailLevels(0.01, 0.02), {0.02}, 5};
    CHECK_THROWS_AS(select_beta0(tiny, theta, LossModel::linear(), 0.01, bad, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(select_beta0(x, theta, LossModel::linear(), 0.01,
                                 ExtrapolationConfig{TailLevels(0.01, 0.1), {}, 5}, 4),
                    std::invalid_argument);
}

TEST_CASE("select_beta0 beats the worst candidate on the pareto oracle") {
    const ParetoModel m(TailIndexVector({3.0}));
    const std::vector<double> theta{1.0};
    const double beta = 0.01;
    const std::vector<double> candidates{0.05, 0.1, 0.2};
    const double target = pareto_cvar_closed_form(3.0, beta);

    std::vector<std::vector<double>> cand_errs(candidates.size());
    std::vector<double> sel_errs;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
        const Matrix x = sample_pareto_matrix(m, 4000, derive_stream(2025, rep));
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            const auto est = estimate_extrapolated(x, theta, LossModel::linear(),
                                                   TailLevels(beta, candidates[ci]));
            cand_errs[ci].push_back(std::abs(est.cvar - target));
        }
        ExtrapolationConfig cfg{TailLevels(beta, candidates.back()), candidates, 5};
        const double b0 = select_beta0(x, theta, LossModel::linear(), beta, cfg,
                                       derive_stream(2026, rep));
        const auto est = estimate_extrapolated(x, theta, LossModel::linear(), TailLevels(beta, b0));
        sel_errs.push_back(std::abs(est.cvar - target));
    }
    double worst = 0.0;
    for (auto& errs : cand_errs) worst = std::max(worst, testsupport::median(errs));
    CHECK(testsupport::median(sel_errs) < worst);
}
