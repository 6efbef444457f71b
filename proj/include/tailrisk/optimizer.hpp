#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tailrisk/empirical.hpp"
#include "tailrisk/extrapolation.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Euclidean projection onto the standard simplex {theta >= 0, sum = 1}
/// by the sorted-threshold method.
inline std::vector<double> project_simplex(std::span<const double> v) {
    const std::size_t d = v.size();
    if (d == 0) throw std::invalid_argument("project_simplex: empty vector");
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        css += u[j];
        const double t = (css - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) tau = t;
    }
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x = std::max(x - tau, 0.0);
    return out;
}

/// Empirical CVaR minimization over the simplex: samples of asset losses,
/// target level, loss shape and the gradient estimator plugged into the
/// projected descent.
struct PortfolioProblem {
    Matrix samples;
    double beta = 0.05;
    LossModel loss = LossModel::linear();
    Method gradient_method = Method::sample_average;
    TailLevels levels{0.05, 0.05};  // beta0 is used when gradient_method == extrapolated
};

struct OptimizerConfig {
    double step_size = 0.0;       // 0 = auto: 0.1 / ||g(theta_0)||_inf
    std::size_t max_iters = 200;
    double grad_tolerance = 0.0;  // stop when ||theta_{t+1} - theta_t||_inf falls below
    std::uint64_t seed = 0;
    bool sqrt_decay = false;      // step_t = step / sqrt(t+1)
    bool random_start = false;    // seeded random simplex start instead of uniform
};

struct OptimizeResult {
    std::vector<double> theta_star;
    std::vector<std::pair<std::size_t, double>> trace;  // (iteration, objective estimate)
};

namespace detail {
struct GradientEval {
    std::vector<double> gradient;
    double objective = 0.0;
};

inline GradientEval eval_gradient(const PortfolioProblem& p, std::span<const double> theta) {
    GradientEval out;
    if (p.gradient_method == Method::sample_average) {
        const auto ls = compute_loss_sample(p.samples, theta, p.loss);
        out.objective = sa_cvar(ls.losses, p.beta);
        out.gradient = sa_cvar_gradient(p.samples, theta, p.loss, p.beta);
    } else if (p.gradient_method == Method::extrapolated) {
        const auto rep = estimate_extrapolated(p.samples, theta, p.loss, p.levels);
        out.objective = rep.cvar;
        out.gradient = *rep.gradient;
    } else {
        throw std::invalid_argument("minimize_cvar: gradient_method must be sample_average or extrapolated");
    }
    return out;
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
}  // namespace detail

/// Projected gradient descent theta_{t+1} = P_simplex(theta_t - step g(theta_t))
/// on the fixed sample. Deterministic for fixed inputs; the trace records the
/// configured method's CVaR estimate at each iterate.
inline OptimizeResult minimize_cvar(const PortfolioProblem& problem, const OptimizerConfig& config) {
    if (config.max_iters < 1) throw std::invalid_argument("minimize_cvar: max_iters must be >= 1");
    const std::size_t d = problem.samples.cols();
    if (d < 1 || problem.samples.rows() == 0)
        throw std::invalid_argument("minimize_cvar: empty sample");

    std::vector<double> theta(d, 1.0 / static_cast<double>(d));
    if (config.random_start) {
        Rng rng(derive_stream(config.seed, 0x57a7));
        double total = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            theta[k] = -std::log(rng.uniform());
            total += theta[k];
        }
        for (double& t : theta) t /= total;
    }

    OptimizeResult res;
    auto g0 = detail::eval_gradient(problem, theta);
    const double base_step =
        config.step_size > 0.0 ? config.step_size : 0.1 / std::max(detail::inf_norm(g0.gradient), 1e-300);

    for (std::size_t t = 0; t < config.max_iters; ++t) {
        const auto ge = (t == 0) ? g0 : detail::eval_gradient(problem, theta);
        res.trace.emplace_back(t, ge.objective);
        const double step =
            config.sqrt_decay ? base_step / std::sqrt(static_cast<double>(t + 1)) : base_step;
        std::vector<double> next(d);
        for (std::size_t k = 0; k < d; ++k) next[k] = theta[k] - step * ge.gradient[k];
        next = project_simplex(next);
        double delta = 0.0;
        for (std::size_t k = 0; k < d; ++k) delta = std::max(delta, std::abs(next[k] - theta[k]));
        theta = std::move(next);
        if (config.grad_tolerance > 0.0 && delta < config.grad_tolerance) break;
    }
    res.trace.emplace_back(res.trace.size(), detail::eval_gradient(problem, theta).objective);
    res.theta_star = std::move(theta);
    return res;
}

/// Sample-average CVaR of the portfolio loss theta^T X on a (large)
/// reference sample.
inline double evaluate_solution(std::span<const double> theta, const Matrix& reference,
                                double beta) {
    double total = 0.0;
    for (double t : theta) {
        if (t < -1e-9) throw std::invalid_argument("evaluate_solution: theta must be on the simplex");
        total += t;
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw std::invalid_argument("evaluate_solution: theta must sum to 1");
    std::vector<double> losses(reference.rows());
    for (std::size_t i = 0; i < reference.rows(); ++i) losses[i] = dot(theta, reference.row(i));
    return sa_cvar(losses, beta);
}

}  // namespace tailrisk
