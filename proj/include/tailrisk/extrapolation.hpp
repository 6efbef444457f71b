#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "tailrisk/empirical.hpp"
#include "tailrisk/loss.hpp"
#include "tailrisk/matrix.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Extrapolates a base-level estimate to the target level:
/// value * (beta0/beta)^{xi_hat}.
inline double extrapolate(double value, double xi_hat, const TailLevels& levels) {
    if (!std::isfinite(xi_hat)) throw std::invalid_argument("extrapolate: xi_hat must be finite");
    return value * std::pow(levels.beta0 / levels.beta, xi_hat);
}

inline std::vector<double> extrapolate(std::span<const double> values, double xi_hat,
                                       const TailLevels& levels) {
    if (!std::isfinite(xi_hat)) throw std::invalid_argument("extrapolate: xi_hat must be finite");
    const double factor = std::pow(levels.beta0 / levels.beta, xi_hat);
    std::vector<double> out(values.begin(), values.end());
    for (double& v : out) v *= factor;
    return out;
}

/// Data-driven CVaR and gradient at the target level beta: sample-average
/// estimates at the base level beta0, Hill estimate of the loss tail index
/// from the same losses, then extrapolation by (beta0/beta)^{xi_hat}.
inline EstimateReport estimate_extrapolated(const Matrix& samples, std::span<const double> theta,
                                            const LossModel& loss, const TailLevels& levels) {
    const auto ls = compute_loss_sample(samples, theta, loss);
    const double var0 = sa_var(ls.losses, levels.beta0);
    const double cvar0 = sa_cvar(ls.losses, levels.beta0);
    const auto grad0 = sa_cvar_gradient(samples, theta, loss, levels.beta0);
    const double xi_hat = hill_estimator(ls.losses, levels.beta0);

    EstimateReport rep;
    rep.var = extrapolate(var0, xi_hat, levels);
    rep.cvar = extrapolate(cvar0, xi_hat, levels);
    rep.gradient = extrapolate(grad0, xi_hat, levels);
    rep.xi_hat = xi_hat;
    rep.method = Method::extrapolated;
    rep.levels = levels;
    rep.n = samples.rows();
    return rep;
}

/// Candidate base levels and fold count for cross-validated beta0 selection.
struct ExtrapolationConfig {
    TailLevels levels;
    std::vector<double> beta0_candidates;
    std::size_t cv_folds = 5;
};

/// Picks the base level by k-fold cross-validation: each fold extrapolates
/// from the training rows at the candidate beta0 and is scored against the
/// sample-average CVaR at the target level computed on the full sample (the
/// held-out rows pooled with the training rows). Ties within 1e-12 break
/// toward the larger beta0.
inline double select_beta0(const Matrix& samples, std::span<const double> theta,
                           const LossModel& loss, double beta, const ExtrapolationConfig& config,
                           std::uint64_t seed) {
    const std::size_t n = samples.rows();
    const std::size_t folds = config.cv_folds;
    if (config.beta0_candidates.empty())
        throw std::invalid_argument("select_beta0: no candidates");
    if (folds < 2 || n < 2 * folds)
        throw std::invalid_argument("select_beta0: not enough samples for the requested folds");

    // Seeded shuffle of row indices; folds are contiguous blocks of the shuffle.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_stream(seed, 0x5e1ec7));
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
        std::swap(perm[i], perm[j]);
    }

    const auto full_losses = compute_loss_sample(samples, theta, loss).losses;
    const double reference = sa_cvar(full_losses, beta);

    const std::size_t n_train = n - n / folds;  // smallest training size across folds
    double best_score = 0.0;
    double best_candidate = -1.0;
    bool any_feasible = false;
    for (const double cand : config.beta0_candidates) {
        if (!(cand >= beta) || !(cand < 1.0))
            throw std::invalid_argument("select_beta0: candidates must satisfy beta <= beta0 < 1");
        if (static_cast<std::size_t>(std::floor(static_cast<double>(n_train) * cand)) < 5)
            continue;  // infeasible candidate: too few tail observations per fold
        const TailLevels lv(beta, cand);
        double score = 0.0;
        for (std::size_t f = 0; f < folds; ++f) {
            const std::size_t lo = f * n / folds;
            const std::size_t hi = (f + 1) * n / folds;
            Matrix train(n - (hi - lo), samples.cols());
            std::size_t r = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i >= lo && i < hi) continue;
                const auto src = samples.row(perm[i]);
                std::copy(src.begin(), src.end(), train.row(r).begin());
                ++r;
            }
            const double est = estimate_extrapolated(train, theta, loss, lv).cvar;
            score += (est - reference) * (est - reference);
        }
        score /= static_cast<double>(folds);
        if (!any_feasible || score < best_score - 1e-12 ||
            (std::abs(score - best_score) <= 1e-12 && cand > best_candidate)) {
            any_feasible = true;
            best_score = score;
            best_candidate = cand;
        }
    }
    if (!any_feasible)
        throw std::invalid_argument("select_beta0: no feasible candidate (all give fewer than 5 tail observations)");
    return best_candidate;
}

}  // namespace tailrisk
