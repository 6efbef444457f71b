#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace tailrisk {

/// Scalar loss ell applied to the portfolio exposure u = theta^T x, together
/// with its derivative. The derivative grows like c1 * u^rho for u above the
/// threshold u0; below u0 it is frozen at c1 * u0^rho, which keeps ell convex
/// and continuously differentiable.
///
/// linear  = power(c1=1, rho=0):  eval(u) = u,   deriv(u) = 1
/// squared = power(c1=2, rho=1):  eval(u) = u^2, deriv(u) = 2u
class LossModel {
public:
    enum class Kind { linear, squared, power };

    static LossModel linear() { return LossModel(Kind::linear, 1.0, 0.0, 0.0); }
    static LossModel squared() { return LossModel(Kind::squared, 2.0, 1.0, 0.0); }
    static LossModel power(double c1, double rho, double u0 = 0.0) {
        if (!(c1 > 0.0)) throw std::invalid_argument("LossModel: c1 must be > 0");
        if (rho < 0.0) throw std::invalid_argument("LossModel: rho must be >= 0");
        if (u0 < 0.0) throw std::invalid_argument("LossModel: u0 must be >= 0");
        return LossModel(Kind::power, c1, rho, u0);
    }

    double eval(double u) const {
        switch (kind_) {
            case Kind::linear: return u;
            case Kind::squared: return u * u;
            case Kind::power: break;
        }
        if (u <= 0.0) return 0.0;
        if (u <= u0_) return c1_ * std::pow(u0_, rho_) * u;
        const double head = c1_ * std::pow(u0_, rho_ + 1.0);
        return head + c1_ * (std::pow(u, rho_ + 1.0) - std::pow(u0_, rho_ + 1.0)) / (rho_ + 1.0);
    }

    double deriv(double u) const {
        switch (kind_) {
            case Kind::linear: return 1.0;
            case Kind::squared: return 2.0 * u;
            case Kind::power: break;
        }
        return c1_ * std::pow(std::max(std::max(u, 0.0), u0_), rho_);
    }

    Kind kind() const noexcept { return kind_; }
    double c1() const noexcept { return c1_; }
    double rho() const noexcept { return rho_; }
    double u0() const noexcept { return u0_; }

    std::string name() const {
        switch (kind_) {
            case Kind::linear: return "linear";
            case Kind::squared: return "squared";
            case Kind::power: return "power";
        }
        return "?";
    }

private:
    LossModel(Kind kind, double c1, double rho, double u0)
        : kind_(kind), c1_(c1), rho_(rho), u0_(u0) {}

    Kind kind_;
    double c1_;
    double rho_;
    double u0_;
};

}  // namespace tailrisk
