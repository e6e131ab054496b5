#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "carbongmam/state.hpp"
#include "carbongmam/system.hpp"

namespace carbongmam {

/// Lowest admissible carbonate-ion concentration (umol/kg).
inline constexpr double kMinConcentration = 1e-6;

/// Constants of the upper-ocean carbonate model. Concentrations are in
/// umol/kg, rates are dimensionless, time is in units of tau_w.
struct ModelParams {
    double mu = 0.0;
    double b = 0.0;
    double theta = 0.0;
    double nu = 0.0;
    double c_p = 0.0;
    double c_x = 0.0;
    double c_f = 0.0;
    double f0 = 0.0;
    double w0 = 0.0;
    double gamma = 0.0;
    double beta = 0.0;
    /// Metadata only; never enters a computation.
    double tau_w_years = 0.0;

    /// Throws ConfigError naming the first field that violates an invariant.
    void validate() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Strict parse of the flat JSON parameter document: every field present,
/// no unknown keys, finite numbers only.
ModelParams parse_params(std::string_view json_text);
ModelParams load_params(const std::filesystem::path& path);
std::string params_to_json(const ModelParams& params);

/// c^gamma / (c^gamma + c_half^gamma)
double sigmoid(double c, double c_half, double gamma);
/// d sigmoid / d c
double sigmoid_derivative(double c, double c_half, double gamma);
/// 1 - sigmoid
double sigmoid_complement(double c, double c_half, double gamma);

/// f(c) = f0 * sigmoid(c, c_f, beta)
double buffer(double c, const ModelParams& params);
double buffer_derivative(double c, const ModelParams& params);

State drift(const State& state, const ModelParams& params);
/// [[-mu f(c), 0], [0, mu]], noise amplitude without eps.
Mat2 diffusion(const State& state, const ModelParams& params);
/// diag(1 / (mu f(c))^2, 1 / mu^2)
Mat2 inverse_metric(const State& state, const ModelParams& params);
Mat2 jacobian(const State& state, const ModelParams& params);

/// Central finite-difference Jacobian, step rel_step * max(1, |x_j|).
Mat2 jacobian_fd(const State& state, const ModelParams& params, double rel_step = 1e-5);

/// Largest entrywise mismatch between the analytic and finite-difference
/// Jacobians, relative to the largest analytic entry.
double jacobian_self_check(const State& state, const ModelParams& params, double rel_step = 1e-5);

/// Location of the interior equilibrium: s(c*, c_p) = 1/b, w* from dw = 0.
/// Used as the default Newton guess.
State equilibrium_guess(const ModelParams& params);

class CarbonSystem final : public StochasticSystem {
public:
    explicit CarbonSystem(ModelParams params);

    const ModelParams& params() const noexcept { return params_; }

    State drift(const State& x) const override { return carbongmam::drift(x, params_); }
    Mat2 jacobian(const State& x) const override { return carbongmam::jacobian(x, params_); }
    Mat2 diffusion(const State& x) const override { return carbongmam::diffusion(x, params_); }
    Mat2 inverse_metric(const State& x) const override { return carbongmam::inverse_metric(x, params_); }
    Mat2 covariance(const State& x) const override;
    std::array<Mat2, 2> covariance_gradient(const State& x) const override;
    void require_admissible(const State& x) const override;
    LocalModel local_model(const State& x) const override;
    ActionTerms action_terms(const State& x) const override;
    double first_coordinate_floor() const override { return kMinConcentration; }

private:
    ModelParams params_;
    double f_floor_ = 0.0;
};

}  // namespace carbongmam
