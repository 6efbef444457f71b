#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"

namespace tailrisk {

/// Target tail probability beta and extrapolation base beta0,
/// with 0 < beta <= beta0 < 1.
struct TailLevels {
    double beta;
    double beta0;

    TailLevels(double beta_, double beta0_) : beta(beta_), beta0(beta0_) {
        if (!(beta > 0.0) || !(beta <= beta0) || !(beta0 < 1.0))
            throw std::invalid_argument("TailLevels: need 0 < beta <= beta0 < 1");
    }

    static TailLevels single(double beta) { return TailLevels(beta, beta); }
};

enum class Method { sample_average, importance_sampling, extrapolated };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::sample_average: return "sample_average";
        case Method::importance_sampling: return "importance_sampling";
        case Method::extrapolated: return "extrapolated";
    }
    return "?";
}

/// Result of one estimation run: VaR, CVaR, optionally the CVaR gradient and
/// the Hill estimate of the loss tail index, plus method provenance.
struct EstimateReport {
    double var = 0.0;
    double cvar = 0.0;
    std::optional<std::vector<double>> gradient;
    std::optional<double> xi_hat;
    Method method = Method::sample_average;
    TailLevels levels{0.5, 0.5};
    std::size_t n = 0;
};

/// Losses L_i = ell(theta^T X_i) and, when requested, the gradient rows
/// ell'(theta^T X_i) * X_i.
struct LossSample {
    std::vector<double> losses;
    std::optional<Matrix> loss_derivs;
    std::vector<double> theta;
};

inline LossSample compute_loss_sample(const Matrix& samples, std::span<const double> theta,
                                      const LossModel& loss, bool with_derivs = false) {
    if (samples.rows() == 0) throw std::invalid_argument("compute_loss_sample: empty sample");
    if (theta.size() != samples.cols())
        throw std::invalid_argument("compute_loss_sample: theta dimension mismatch");
    LossSample out;
    out.theta.assign(theta.begin(), theta.end());
    out.losses.resize(samples.rows());
    if (with_derivs) out.loss_derivs = Matrix(samples.rows(), samples.cols());
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        const double u = dot(theta, samples.row(i));
        out.losses[i] = loss.eval(u);
        if (with_derivs) {
            const double lder = loss.deriv(u);
            auto row = out.loss_derivs->row(i);
            const auto x = samples.row(i);
            for (std::size_t k = 0; k < x.size(); ++k) row[k] = lder * x[k];
        }
    }
    return out;
}

/// k-th smallest value (1-based). Ties kept; invariant under permutation.
inline double order_statistic(std::span<const double> values, std::size_t k) {
    if (k < 1 || k > values.size())
        throw std::invalid_argument("order_statistic: k out of range");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    return v[k - 1];
}

/// Sample-average VaR: the ceil(n(1-beta))-th order statistic.
inline double sa_var(std::span<const double> losses, double beta) {
    const std::size_t n = losses.size();
    if (n == 0) throw std::invalid_argument("sa_var: empty input");
    const auto k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - beta)));
    return order_statistic(losses, std::clamp<std::size_t>(k, 1, n));
}

/// Sample-average CVaR: v + (1/(n beta)) * sum (L_i - v)^+ with v = sa_var.
inline double sa_cvar(std::span<const double> losses, double beta) {
    const std::size_t n = losses.size();
    if (n == 0) throw std::invalid_argument("sa_cvar: empty input");
    const double v = sa_var(losses, beta);
    double excess = 0.0;
    for (double l : losses)
        if (l > v) excess += l - v;
    return v + excess / (static_cast<double>(n) * beta);
}

/// Plug-in CVaR gradient: (1/(n beta)) * sum ell'(theta^T X_i) X_i 1(L_i >= v).
/// The indicator uses >=, so the observation at the VaR contributes.
inline std::vector<double> sa_cvar_gradient(const Matrix& samples, std::span<const double> theta,
                                            const LossModel& loss, double beta) {
    if (samples.rows() == 0) throw std::invalid_argument("sa_cvar_gradient: empty sample");
    if (theta.size() != samples.cols())
        throw std::invalid_argument("sa_cvar_gradient: theta dimension mismatch");
    const std::size_t n = samples.rows();
    const std::size_t d = samples.cols();
    std::vector<double> losses(n);
    for (std::size_t i = 0; i < n; ++i) losses[i] = loss.eval(dot(theta, samples.row(i)));
    const double v = sa_var(losses, beta);
    std::vector<double> grad(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (losses[i] >= v) {
            const auto x = samples.row(i);
            const double lder = loss.deriv(dot(theta, x));
            for (std::size_t k = 0; k < d; ++k) grad[k] += lder * x[k];
        }
    }
    const double scale = static_cast<double>(n) * beta;
    for (double& g : grad) g /= scale;
    return grad;
}

/// Hill estimator of the loss tail index xi at base level beta0:
/// with k = floor(n beta0), the average of log L_{(n-i)} - log L_{(n-k)} over
/// the k largest losses. Normalized by k (exact average), which agrees with
/// the 1/(n beta0) form whenever n beta0 is integral.
inline double hill_estimator(std::span<const double> losses, double beta0) {
    const std::size_t n = losses.size();
    if (n == 0) throw std::invalid_argument("hill_estimator: empty input");
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * beta0));
    if (k < 1) throw std::invalid_argument("hill_estimator: floor(n*beta0) must be >= 1");
    if (k >= n) throw std::invalid_argument("hill_estimator: floor(n*beta0) must be < n");
    std::vector<double> v(losses.begin(), losses.end());
    std::sort(v.begin(), v.end());
    const double ref = v[n - k - 1];  // (k+1)-th largest
    if (!(ref > 0.0))
        throw std::domain_error("hill_estimator: top floor(n*beta0)+1 losses must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += std::log(v[n - 1 - i]) - std::log(ref);
    return acc / static_cast<double>(k);
}

/// Full sample-average report at level beta: VaR, CVaR and the plug-in
/// gradient on the same sample.
inline EstimateReport estimate_sample_average(const Matrix& samples, std::span<const double> theta,
                                              const LossModel& loss, double beta) {
    const auto ls = compute_loss_sample(samples, theta, loss);
    EstimateReport rep;
    rep.var = sa_var(ls.losses, beta);
    rep.cvar = sa_cvar(ls.losses, beta);
    rep.gradient = sa_cvar_gradient(samples, theta, loss, beta);
    rep.method = Method::sample_average;
    rep.levels = TailLevels::single(beta);
    rep.n = samples.rows();
    return rep;
}

}  // namespace tailrisk
