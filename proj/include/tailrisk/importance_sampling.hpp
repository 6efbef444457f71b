#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "tailrisk/empirical.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"
#include "tailrisk/models.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Componentwise scaling s_k = (beta0/beta)^{1/alpha_k} that pushes samples
/// observed near the 1-beta0 level onto the 1-beta tail.
struct ScalingVector {
    std::vector<double> s;
    TailLevels levels;
    TailIndexVector alphas;
};

inline ScalingVector scaling_vector(const TailIndexVector& alphas, const TailLevels& levels) {
    ScalingVector out{std::vector<double>(alphas.dim()), levels, alphas};
    const double ratio = levels.beta0 / levels.beta;
    for (std::size_t k = 0; k < alphas.dim(); ++k)
        out.s[k] = std::pow(ratio, 1.0 / alphas.alphas[k]);
    return out;
}

/// Exact likelihood ratio of the scaling change of measure:
/// (prod_k s_k) * f(s x) / f(x). The base density must be positive at x.
inline double likelihood_ratio(const std::function<double(std::span<const double>)>& pdf,
                               std::span<const double> x, const ScalingVector& sv) {
    const double fx = pdf(x);
    if (!(fx > 0.0))
        throw std::domain_error("likelihood_ratio: base density is zero at x; IS density must dominate");
    std::vector<double> scaled(x.size());
    double jac = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        scaled[k] = sv.s[k] * x[k];
        jac *= sv.s[k];
    }
    return jac * pdf(scaled) / fx;
}

/// Losses under the IS law together with their likelihood-ratio weights.
struct WeightedLossSample {
    std::vector<double> losses;
    std::vector<double> weights;
};

inline const TailIndexVector& model_alphas(const ParetoModel& m) { return m.alphas; }
inline const TailIndexVector& model_alphas(const TCopulaParetoModel& m) { return m.alphas(); }

/// Applies the scaling change of measure to an existing plain sample:
/// losses_i = ell(theta^T (s X_i)), weights_i = LR(X_i).
template <typename Model>
WeightedLossSample is_reweight(const Model& model, const Matrix& x, std::span<const double> theta,
                               const LossModel& loss, const TailLevels& levels) {
    const auto sv = scaling_vector(model_alphas(model), levels);
    const auto pdf = [&model](std::span<const double> v) { return joint_pdf(model, v); };
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    WeightedLossSample out;
    out.losses.resize(n);
    out.weights.resize(n);
    std::vector<double> scaled(d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        for (std::size_t k = 0; k < d; ++k) scaled[k] = sv.s[k] * row[k];
        out.losses[i] = loss.eval(dot(theta, scaled));
        out.weights[i] = likelihood_ratio(pdf, row, sv);
    }
    return out;
}

/// Samples n rows from the model and reweights them onto the target tail.
/// Deterministic for a fixed seed.
template <typename Model>
WeightedLossSample is_weighted_sample(const Model& model, std::span<const double> theta,
                                      const LossModel& loss, std::size_t n,
                                      const TailLevels& levels, std::uint64_t seed) {
    return is_reweight(model, sample_matrix(model, n, seed), theta, loss, levels);
}

/// IS estimate of the loss c.d.f.: 1 - (1/n) sum w_i 1(losses_i > u).
inline double is_tail_cdf(const WeightedLossSample& ws, double u) {
    double mass = 0.0;
    for (std::size_t i = 0; i < ws.losses.size(); ++i)
        if (ws.losses[i] > u) mass += ws.weights[i];
    return 1.0 - mass / static_cast<double>(ws.losses.size());
}

/// IS VaR: inf{u : F_IS(u) >= 1-beta}, resolved over the jump points of the
/// weighted empirical c.d.f. as the smallest observed loss whose
/// strictly-above weighted mass is <= beta. Reduces to the sample-average
/// order statistic at unit weights.
inline double is_var(const WeightedLossSample& ws, double beta) {
    const std::size_t n = ws.losses.size();
    if (n == 0) throw std::invalid_argument("is_var: empty sample");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return ws.losses[a] < ws.losses[b]; });
    const double target = beta * static_cast<double>(n);
    double above = 0.0;  // weighted count of losses strictly greater than the current value
    double best = ws.losses[idx[n - 1]];
    std::size_t i = n;
    while (i > 0) {
        // group of tied values [j, i)
        std::size_t j = i;
        const double value = ws.losses[idx[i - 1]];
        while (j > 0 && ws.losses[idx[j - 1]] == value) --j;
        if (above <= target)
            best = value;
        else
            break;
        for (std::size_t t = j; t < i; ++t) above += ws.weights[idx[t]];
        i = j;
    }
    return best;
}

/// IS CVaR: v + (1/(n beta)) sum (losses_i - v)^+ w_i with v = is_var.
inline EstimateReport is_cvar(const WeightedLossSample& ws, const TailLevels& levels) {
    const std::size_t n = ws.losses.size();
    if (n == 0) throw std::invalid_argument("is_cvar: empty sample");
    const double v = is_var(ws, levels.beta);
    double excess = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (ws.losses[i] > v) excess += (ws.losses[i] - v) * ws.weights[i];
    EstimateReport rep;
    rep.var = v;
    rep.cvar = v + excess / (static_cast<double>(n) * levels.beta);
    rep.method = Method::importance_sampling;
    rep.levels = levels;
    rep.n = n;
    return rep;
}

inline EstimateReport is_cvar(const WeightedLossSample& ws, double beta) {
    return is_cvar(ws, TailLevels::single(beta));
}

struct VarianceStudyResult {
    double var_is = 0.0;
    double var_sa = 0.0;
    double ratio = 0.0;
    std::vector<double> raw_is;  // per-replication estimates
    std::vector<double> raw_sa;
};

/// Empirical variances of the IS and sample-average CVaR estimators across
/// replications with paired seeds (both methods see the same draws per
/// replication), and their ratio.
template <typename Model>
VarianceStudyResult is_variance_study(const Model& model, std::span<const double> theta,
                                      const LossModel& loss, const TailLevels& levels,
                                      std::size_t n, std::size_t replications,
                                      std::uint64_t seed) {
    if (replications < 2)
        throw std::invalid_argument("is_variance_study: replications must be >= 2");
    std::vector<double> c_is(replications), c_sa(replications);
    for (std::size_t r = 0; r < replications; ++r) {
        const Matrix x = sample_matrix(model, n, derive_stream(seed, r));
        const auto ls = compute_loss_sample(x, theta, loss);
        c_sa[r] = sa_cvar(ls.losses, levels.beta);
        c_is[r] = is_cvar(is_reweight(model, x, theta, loss, levels), levels).cvar;
    }
    auto variance = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double acc = 0.0;
        for (double t : v) acc += (t - mean) * (t - mean);
        return acc / static_cast<double>(v.size() - 1);
    };
    VarianceStudyResult out;
    out.var_is = variance(c_is);
    out.var_sa = variance(c_sa);
    out.ratio = (out.var_is == out.var_sa) ? 1.0 : out.var_is / out.var_sa;
    out.raw_is = std::move(c_is);
    out.raw_sa = std::move(c_sa);
    return out;
}

}  // namespace tailrisk
