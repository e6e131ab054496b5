#pragma once

#include <cmath>
#include <filesystem>
#include <optional>

#include "carbongmam/carbon_model.hpp"
#include "carbongmam/system.hpp"

namespace testing {

using carbongmam::Mat2;
using carbongmam::ModelParams;
using carbongmam::State;

inline std::filesystem::path reference_params_path() {
    return std::filesystem::path(CARBONGMAM_SOURCE_DIR) / "data" / "rothman-modern-ocean.json";
}

/// The shipped parameter file, if present. Tests that depend on its values
/// skip themselves otherwise.
inline std::optional<ModelParams> reference_params(double c_x = 62.0, double nu = 0.0) {
    const auto path = reference_params_path();
    if (!std::filesystem::exists(path)) return std::nullopt;
    ModelParams p = carbongmam::load_params(path);
    p.c_x = c_x;
    p.nu = nu;
    return p;
}

/// Arbitrary but well-behaved constants, unrelated to any published table.
inline ModelParams generic_params() {
    ModelParams p;
    p.mu = 200.0;
    p.b = 3.5;
    p.theta = 4.0;
    p.nu = 0.1;
    p.c_p = 100.0;
    p.c_x = 55.0;
    p.c_f = 40.0;
    p.f0 = 0.7;
    p.w0 = 1900.0;
    p.gamma = 3.0;
    p.beta = 2.0;
    p.tau_w_years = 1.0;
    return p;
}

/// r' = r (-a + r^2 - r^4), phi' = omega in polar form: an unstable cycle at
/// r^2 = (1 - sqrt(1 - 4a)) / 2 inside a stable one at r^2 = (1 + sqrt(1 - 4a)) / 2.
class PolarCycles final : public carbongmam::StochasticSystem {
public:
    explicit PolarCycles(double a = 0.1, double omega = 1.0) : a_(a), omega_(omega) {}

    double stable_radius() const { return std::sqrt(0.5 * (1.0 + std::sqrt(1.0 - 4.0 * a_))); }
    double unstable_radius() const { return std::sqrt(0.5 * (1.0 - std::sqrt(1.0 - 4.0 * a_))); }
    double period() const { return 2.0 * M_PI / omega_; }

    State drift(const State& x) const override {
        const double r2 = x.c * x.c + x.w * x.w;
        const double g = -a_ + r2 - r2 * r2;
        return {g * x.c - omega_ * x.w, g * x.w + omega_ * x.c};
    }
    Mat2 jacobian(const State& x) const override {
        const double r2 = x.c * x.c + x.w * x.w;
        const double g = -a_ + r2 - r2 * r2;
        const double dg = 1.0 - 2.0 * r2;
        return {g + 2.0 * x.c * x.c * dg, 2.0 * x.c * x.w * dg - omega_, 2.0 * x.c * x.w * dg + omega_,
                g + 2.0 * x.w * x.w * dg};
    }
    Mat2 diffusion(const State&) const override { return Mat2::identity(); }
    Mat2 inverse_metric(const State&) const override { return Mat2::identity(); }

private:
    double a_;
    double omega_;
};

inline double relative_error(double value, double expected) {
    return std::fabs(value - expected) / std::fabs(expected);
}

}  // namespace testing
