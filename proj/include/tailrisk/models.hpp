#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "tailrisk/matrix.hpp"
#include "tailrisk/rng.hpp"

namespace tailrisk {

/// Marginal tail indices alpha_1..alpha_d; xi = 1/min_k alpha_k is the
/// extreme-value index of the heaviest coordinate.
struct TailIndexVector {
    std::vector<double> alphas;

    explicit TailIndexVector(std::vector<double> a) : alphas(std::move(a)) {
        if (alphas.empty())
            throw std::invalid_argument("TailIndexVector: empty");
        for (double v : alphas)
            if (!(v > 0.0) || !std::isfinite(v))
                throw std::invalid_argument("TailIndexVector: every alpha must be positive and finite");
    }

    std::size_t dim() const noexcept { return alphas.size(); }
    double min_alpha() const { return *std::min_element(alphas.begin(), alphas.end()); }
    double xi() const { return 1.0 / min_alpha(); }
};

namespace detail {
inline std::vector<double> default_scale(std::size_t d) { return std::vector<double>(d, 1.0); }

inline void check_scale(const std::vector<double>& scale, std::size_t d) {
    if (scale.size() != d)
        throw std::invalid_argument("model: scale dimension does not match alphas");
    for (double s : scale)
        if (!(s > 0.0) || !std::isfinite(s))
            throw std::invalid_argument("model: every scale must be positive and finite");
}
}  // namespace detail

/// Independent Pareto coordinates: P(X_k > x) = (x / scale_k)^{-alpha_k} for
/// x >= scale_k.
struct ParetoModel {
    TailIndexVector alphas;
    std::vector<double> scale;

    explicit ParetoModel(TailIndexVector a, std::vector<double> s = {})
        : alphas(std::move(a)),
          scale(s.empty() ? detail::default_scale(alphas.dim()) : std::move(s)) {
        detail::check_scale(scale, alphas.dim());
    }

    std::size_t dim() const noexcept { return alphas.dim(); }

    void sample_row(Rng& rng, std::span<double> out) const {
        for (std::size_t k = 0; k < dim(); ++k)
            out[k] = scale[k] * std::pow(rng.uniform(), -1.0 / alphas.alphas[k]);
    }
};

/// Pareto marginals coupled by a t-copula with the given correlation matrix
/// and degrees of freedom.
class TCopulaParetoModel {
public:
    TCopulaParetoModel(Matrix correlation, double dof, TailIndexVector a,
                       std::vector<double> s = {})
        : correlation_(std::move(correlation)),
          dof_(dof),
          alphas_(std::move(a)),
          scale_(s.empty() ? detail::default_scale(alphas_.dim()) : std::move(s)) {
        const std::size_t d = alphas_.dim();
        detail::check_scale(scale_, d);
        if (!(dof_ > 0.0)) throw std::invalid_argument("TCopulaParetoModel: dof must be > 0");
        if (correlation_.rows() != d || correlation_.cols() != d)
            throw std::invalid_argument("TCopulaParetoModel: correlation dimension mismatch");
        for (std::size_t i = 0; i < d; ++i) {
            if (std::abs(correlation_(i, i) - 1.0) > 1e-12)
                throw std::invalid_argument("TCopulaParetoModel: correlation diagonal must be 1");
            for (std::size_t j = 0; j < i; ++j)
                if (std::abs(correlation_(i, j) - correlation_(j, i)) > 1e-12)
                    throw std::invalid_argument("TCopulaParetoModel: correlation must be symmetric");
        }
        chol_ = cholesky_lower(correlation_);  // throws if not positive definite
        log_det_ = 0.0;
        for (std::size_t i = 0; i < d; ++i) log_det_ += 2.0 * std::log(chol_(i, i));
    }

    std::size_t dim() const noexcept { return alphas_.dim(); }
    const Matrix& correlation() const noexcept { return correlation_; }
    double dof() const noexcept { return dof_; }
    const TailIndexVector& alphas() const noexcept { return alphas_; }
    const std::vector<double>& scale() const noexcept { return scale_; }
    const Matrix& cholesky() const noexcept { return chol_; }
    double log_det_correlation() const noexcept { return log_det_; }

    /// One multivariate-t draw mapped through the t c.d.f. to uniforms and
    /// then through the inverse Pareto survival to the marginals.
    void sample_row(Rng& rng, std::span<double> out) const {
        const std::size_t d = dim();
        thread_local std::vector<double> z;
        z.assign(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) z[k] = rng.normal();
        const double g = std::sqrt(dof_ / rng.chi_square(dof_));
        const boost::math::students_t tdist(dof_);
        for (std::size_t k = 0; k < d; ++k) {
            double y = 0.0;
            for (std::size_t j = 0; j <= k; ++j) y += chol_(k, j) * z[j];
            const double t = y * g;
            // Survival 1 - F_t(t) evaluated via the complement for accuracy in
            // the upper tail, then inverted through the Pareto survival.
            double surv = boost::math::cdf(boost::math::complement(tdist, t));
            surv = std::clamp(surv, 0x1.0p-1022, 1.0);
            out[k] = scale_[k] * std::pow(surv, -1.0 / alphas_.alphas[k]);
        }
    }

private:
    Matrix correlation_;
    double dof_;
    TailIndexVector alphas_;
    std::vector<double> scale_;
    Matrix chol_;
    double log_det_ = 0.0;
};

template <typename Model>
Matrix sample_matrix(const Model& model, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_matrix: n must be >= 1");
    Matrix out(n, model.dim());
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) model.sample_row(rng, out.row(i));
    return out;
}

inline Matrix sample_pareto_matrix(const ParetoModel& model, std::size_t n, std::uint64_t seed) {
    return sample_matrix(model, n, seed);
}

inline Matrix sample_t_copula_matrix(const TCopulaParetoModel& model, std::size_t n,
                                     std::uint64_t seed) {
    return sample_matrix(model, n, seed);
}

/// Joint density of the independent-Pareto model:
/// prod_k alpha_k scale_k^{alpha_k} x_k^{-(alpha_k+1)} on the support, else 0.
inline double joint_pdf(const ParetoModel& model, std::span<const double> x) {
    if (x.size() != model.dim())
        throw std::invalid_argument("joint_pdf: dimension mismatch");
    double p = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double a = model.alphas.alphas[k];
        const double s = model.scale[k];
        if (x[k] < s) return 0.0;
        p *= a * std::pow(s, a) * std::pow(x[k], -(a + 1.0));
    }
    return p;
}

/// Joint density of the t-copula-Pareto model: copula density times the
/// Pareto marginal densities. Returns 0 off the support and at the corner
/// points where a marginal c.d.f. value rounds to 0 or 1.
inline double joint_pdf(const TCopulaParetoModel& model, std::span<const double> x) {
    const std::size_t d = model.dim();
    if (x.size() != d) throw std::invalid_argument("joint_pdf: dimension mismatch");
    if (d == 1) {
        // copula of a single variable is vacuous
        const double a = model.alphas().alphas[0];
        const double s = model.scale()[0];
        if (x[0] < s) return 0.0;
        return a * std::pow(s, a) * std::pow(x[0], -(a + 1.0));
    }
    const double nu = model.dof();
    const boost::math::students_t tdist(nu);

    double log_marginals = 0.0;
    std::vector<double> z(d);
    double log_t_marg = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double a = model.alphas().alphas[k];
        const double s = model.scale()[k];
        if (x[k] < s) return 0.0;
        const double surv = std::pow(x[k] / s, -a);  // Pareto survival in (0, 1]
        const double u = 1.0 - surv;
        if (u <= 0.0 || u >= 1.0) return 0.0;
        log_marginals += std::log(a / s) - (a + 1.0) * std::log(x[k] / s);
        z[k] = boost::math::quantile(tdist, u);
        log_t_marg += std::log(boost::math::pdf(tdist, z[k]));
    }

    // log density of the multivariate t at z (unit scales, correlation R)
    const auto w = cholesky_solve(model.cholesky(), z);
    const double quad = dot(z, w);
    const double half_log_2pi_like = 0.5 * static_cast<double>(d) * std::log(nu * 3.14159265358979323846);
    const double log_mvt = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
                           half_log_2pi_like - 0.5 * model.log_det_correlation() -
                           0.5 * (nu + d) * std::log1p(quad / nu);

    return std::exp(log_mvt - log_t_marg + log_marginals);
}

/// Quantile of the unit-scale Pareto(alpha) loss at tail level beta:
/// the (1-beta)-quantile equals beta^{-1/alpha}.
inline double pareto_var_closed_form(double alpha, double beta) {
    if (!(alpha > 0.0)) throw std::invalid_argument("pareto_var_closed_form: alpha must be > 0");
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::invalid_argument("pareto_var_closed_form: beta must be in (0, 1]");
    return std::pow(beta, -1.0 / alpha);
}

/// Conditional mean of unit-scale Pareto(alpha) above its (1-beta)-quantile:
/// (alpha / (alpha - 1)) * beta^{-1/alpha}. Requires alpha > 1.
inline double pareto_cvar_closed_form(double alpha, double beta) {
    if (!(alpha > 1.0))
        throw std::domain_error("pareto_cvar_closed_form: CVaR is infinite for alpha <= 1");
    if (!(beta > 0.0) || !(beta <= 1.0))
        throw std::invalid_argument("pareto_cvar_closed_form: beta must be in (0, 1]");
    return alpha / (alpha - 1.0) * std::pow(beta, -1.0 / alpha);
}

}  // namespace tailrisk
