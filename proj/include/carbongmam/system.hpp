#pragma once

#include <array>
#include <limits>

#include "carbongmam/state.hpp"

namespace carbongmam {

/// Everything the path relaxation needs at one node.
struct LocalModel {
    State drift;
    Mat2 jacobian;
    Mat2 covariance;
    Mat2 inverse_metric;
    std::array<Mat2, 2> covariance_gradient;
};

/// Drift and metric at one point, enough for the action integrand.
struct ActionTerms {
    State drift;
    Mat2 inverse_metric;
};

/// A planar SDE dX = drift(X) dt + eps * diffusion(X) dB.
///
/// Everything the minimum action machinery and the simulators need is
/// reached through this interface, so the same solver runs on the carbonate
/// model and on analytic reference systems.
class StochasticSystem {
public:
    virtual ~StochasticSystem() = default;

    virtual State drift(const State& x) const = 0;
    /// d drift_i / d x_j
    virtual Mat2 jacobian(const State& x) const = 0;
    /// Noise amplitude eta(x), without the eps prefactor.
    virtual Mat2 diffusion(const State& x) const = 0;
    /// (eta eta^T)^{-1}
    virtual Mat2 inverse_metric(const State& x) const = 0;

    virtual Mat2 covariance(const State& x) const {
        const Mat2 eta = diffusion(x);
        return eta * eta.transposed();
    }

    /// d(eta eta^T)/d x_k for k = 0, 1. Zero for additive noise.
    virtual std::array<Mat2, 2> covariance_gradient(const State& /*x*/) const { return {}; }

    /// Throws if the metric is not defined at x.
    virtual void require_admissible(const State& /*x*/) const {}

    /// Lower bound on the first coordinate enforced by simulators (clamping).
    virtual double first_coordinate_floor() const { return -std::numeric_limits<double>::infinity(); }

    /// Batched evaluation; overridden where terms share subexpressions.
    virtual LocalModel local_model(const State& x) const {
        require_admissible(x);
        return {drift(x), jacobian(x), covariance(x), inverse_metric(x), covariance_gradient(x)};
    }

    virtual ActionTerms action_terms(const State& x) const {
        require_admissible(x);
        return {drift(x), inverse_metric(x)};
    }
};

/// Gradient system dX = -grad U dt + dB with U = (x^2 - 1)^2 + y^2.
class DoubleWellSystem final : public StochasticSystem {
public:
    static double potential(const State& x) {
        const double a = x.c * x.c - 1.0;
        return a * a + x.w * x.w;
    }

    State drift(const State& x) const override { return {-4.0 * x.c * (x.c * x.c - 1.0), -2.0 * x.w}; }
    Mat2 jacobian(const State& x) const override { return Mat2::diagonal(-12.0 * x.c * x.c + 4.0, -2.0); }
    Mat2 diffusion(const State&) const override { return Mat2::identity(); }
    Mat2 inverse_metric(const State&) const override { return Mat2::identity(); }
};

/// Linear system dX = M X dt + dB, identity noise.
class LinearSystem final : public StochasticSystem {
public:
    explicit LinearSystem(Mat2 m = Mat2::diagonal(-1.0, -1.0)) : m_(m) {}

    State drift(const State& x) const override { return m_ * x; }
    Mat2 jacobian(const State&) const override { return m_; }
    Mat2 diffusion(const State&) const override { return Mat2::identity(); }
    Mat2 inverse_metric(const State&) const override { return Mat2::identity(); }

private:
    Mat2 m_;
};

}  // namespace carbongmam
