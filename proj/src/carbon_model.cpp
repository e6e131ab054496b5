#include "carbongmam/carbon_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "carbongmam/error.hpp"

namespace carbongmam {

namespace {

using json = nlohmann::json;

constexpr std::array<std::pair<const char*, double ModelParams::*>, 12> kFields{{
    {"mu", &ModelParams::mu},
    {"b", &ModelParams::b},
    {"theta", &ModelParams::theta},
    {"nu", &ModelParams::nu},
    {"c_p", &ModelParams::c_p},
    {"c_x", &ModelParams::c_x},
    {"c_f", &ModelParams::c_f},
    {"f0", &ModelParams::f0},
    {"w0", &ModelParams::w0},
    {"gamma", &ModelParams::gamma},
    {"beta", &ModelParams::beta},
    {"tau_w_years", &ModelParams::tau_w_years},
}};

void require_positive_c(const State& s, const char* what) {
    if (!(s.c > 0.0) || !std::isfinite(s.c) || !std::isfinite(s.w)) {
        std::ostringstream msg;
        msg << what << ": state (" << s.c << ", " << s.w << ") outside the domain c > 0";
        throw DomainError(msg.str());
    }
}

}  // namespace

void ModelParams::validate() const {
    for (const auto& [name, member] : kFields) {
        if (!std::isfinite(this->*member)) throw ConfigError(name, "must be a finite number");
    }
    const auto positive = [](const char* name, double v) {
        if (!(v > 0.0)) throw ConfigError(name, "must be > 0 (got " + std::to_string(v) + ")");
    };
    positive("mu", mu);
    positive("c_p", c_p);
    positive("c_x", c_x);
    positive("c_f", c_f);
    positive("f0", f0);
    positive("gamma", gamma);
    positive("beta", beta);
    if (nu < 0.0) throw ConfigError("nu", "must be >= 0 (got " + std::to_string(nu) + ")");
}

ModelParams parse_params(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("parameter file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("", "parameter file must be a JSON object");

    for (const auto& item : doc.items()) {
        const bool known = std::any_of(kFields.begin(), kFields.end(),
                                       [&](const auto& f) { return item.key() == f.first; });
        if (!known) throw ConfigError(item.key(), "unknown parameter key");
    }

    ModelParams p;
    for (const auto& [name, member] : kFields) {
        const auto it = doc.find(name);
        if (it == doc.end()) throw ConfigError(name, "missing parameter");
        if (!it->is_number()) throw ConfigError(name, "must be a number");
        p.*member = it->get<double>();
    }
    p.validate();
    return p;
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("params_file", "cannot open parameter file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_params(buf.str());
}

std::string params_to_json(const ModelParams& params) {
    json doc = json::object();
    for (const auto& [name, member] : kFields) doc[name] = params.*member;
    return doc.dump(2);
}

double sigmoid(double c, double c_half, double gamma) {
    if (!(c >= 0.0) || !(c_half > 0.0) || !(gamma > 0.0)) {
        throw DomainError("sigmoid: requires c >= 0, c_half > 0, gamma > 0");
    }
    if (c == 0.0) return 0.0;
    return 1.0 / (1.0 + std::pow(c_half / c, gamma));
}

double sigmoid_complement(double c, double c_half, double gamma) { return 1.0 - sigmoid(c, c_half, gamma); }

double sigmoid_derivative(double c, double c_half, double gamma) {
    const double s = sigmoid(c, c_half, gamma);
    if (c == 0.0) return gamma > 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return gamma / c * s * (1.0 - s);
}

double buffer(double c, const ModelParams& params) {
    if (!(c >= 0.0)) throw DomainError("buffer: requires c >= 0");
    return params.f0 * sigmoid(c, params.c_f, params.beta);
}

double buffer_derivative(double c, const ModelParams& params) {
    if (!(c >= 0.0)) throw DomainError("buffer_derivative: requires c >= 0");
    return params.f0 * sigmoid_derivative(c, params.c_f, params.beta);
}

State drift(const State& state, const ModelParams& p) {
    require_positive_c(state, "drift");
    const double sp = sigmoid(state.c, p.c_p, p.gamma);
    const double sx_bar = sigmoid_complement(state.c, p.c_x, p.gamma);
    const double f = buffer(state.c, p);
    const double dc = (p.mu * (1.0 - p.b * sp - p.theta * sx_bar - p.nu) + state.w - p.w0) * f;
    const double dw = p.mu * (1.0 - p.b * sp + p.theta * sx_bar + p.nu) - state.w + p.w0;
    return {dc, dw};
}

Mat2 diffusion(const State& state, const ModelParams& p) {
    require_positive_c(state, "diffusion");
    return Mat2::diagonal(-p.mu * buffer(state.c, p), p.mu);
}

Mat2 inverse_metric(const State& state, const ModelParams& p) {
    if (!(state.c >= kMinConcentration) || !std::isfinite(state.w)) {
        std::ostringstream msg;
        msg << "inverse_metric: c = " << state.c << " below the floor " << kMinConcentration;
        throw SingularityError(msg.str());
    }
    const double f = buffer(state.c, p);
    const double f_floor = buffer(kMinConcentration, p);
    if (f < f_floor) throw SingularityError("inverse_metric: buffer factor below its floor");
    const double mf = p.mu * f;
    return Mat2::diagonal(1.0 / (mf * mf), 1.0 / (p.mu * p.mu));
}

Mat2 jacobian(const State& state, const ModelParams& p) {
    require_positive_c(state, "jacobian");
    const double c = state.c;
    const double sp = sigmoid(c, p.c_p, p.gamma);
    const double sx = sigmoid(c, p.c_x, p.gamma);
    const double dsp = sigmoid_derivative(c, p.c_p, p.gamma);
    const double dsx = sigmoid_derivative(c, p.c_x, p.gamma);
    const double f = buffer(c, p);
    const double df = buffer_derivative(c, p);

    const double g = p.mu * (1.0 - p.b * sp - p.theta * (1.0 - sx) - p.nu) + state.w - p.w0;
    const double dg_dc = p.mu * (-p.b * dsp + p.theta * dsx);

    Mat2 j;
    j.a11 = dg_dc * f + g * df;
    j.a12 = f;
    j.a21 = p.mu * (-p.b * dsp - p.theta * dsx);
    j.a22 = -1.0;
    return j;
}

Mat2 jacobian_fd(const State& state, const ModelParams& params, double rel_step) {
    require_positive_c(state, "jacobian_fd");
    const double hc = std::min(rel_step * std::max(1.0, std::fabs(state.c)), 0.5 * state.c);
    const double hw = rel_step * std::max(1.0, std::fabs(state.w));
    const State dc = (drift({state.c + hc, state.w}, params) - drift({state.c - hc, state.w}, params)) / (2.0 * hc);
    const State dw = (drift({state.c, state.w + hw}, params) - drift({state.c, state.w - hw}, params)) / (2.0 * hw);
    return {dc.c, dw.c, dc.w, dw.w};
}

double jacobian_self_check(const State& state, const ModelParams& params, double rel_step) {
    const Mat2 a = jacobian(state, params);
    const Mat2 n = jacobian_fd(state, params, rel_step);
    const double scale = std::max({std::fabs(a.a11), std::fabs(a.a12), std::fabs(a.a21), std::fabs(a.a22)});
    const double diff = std::max({std::fabs(a.a11 - n.a11), std::fabs(a.a12 - n.a12), std::fabs(a.a21 - n.a21),
                                  std::fabs(a.a22 - n.a22)});
    return scale > 0.0 ? diff / scale : diff;
}

State equilibrium_guess(const ModelParams& p) {
    // Summing both drift components at equilibrium leaves 2 mu (1 - b s(c, c_p)) = 0.
    double c = p.c_p;
    if (p.b > 1.0) c = p.c_p * std::pow(1.0 / (p.b - 1.0), 1.0 / p.gamma);
    const double w = p.w0 + p.mu * (1.0 - p.b * sigmoid(c, p.c_p, p.gamma) +
                                    p.theta * sigmoid_complement(c, p.c_x, p.gamma) + p.nu);
    return {c, w};
}

CarbonSystem::CarbonSystem(ModelParams params) : params_(std::move(params)) {
    params_.validate();
    f_floor_ = buffer(kMinConcentration, params_);
}

Mat2 CarbonSystem::covariance(const State& x) const {
    const double mf = params_.mu * buffer(x.c, params_);
    return Mat2::diagonal(mf * mf, params_.mu * params_.mu);
}

std::array<Mat2, 2> CarbonSystem::covariance_gradient(const State& x) const {
    const double f = buffer(x.c, params_);
    const double df = buffer_derivative(x.c, params_);
    const double mu2 = params_.mu * params_.mu;
    return {Mat2::diagonal(2.0 * mu2 * f * df, 0.0), Mat2{}};
}

void CarbonSystem::require_admissible(const State& x) const {
    if (!(x.c >= kMinConcentration) || !std::isfinite(x.w)) {
        std::ostringstream msg;
        msg << "state (" << x.c << ", " << x.w << ") violates the concentration floor " << kMinConcentration;
        throw SingularityError(msg.str());
    }
}

LocalModel CarbonSystem::local_model(const State& x) const {
    require_admissible(x);
    const ModelParams& p = params_;
    const double c = x.c;
    const double sp = sigmoid(c, p.c_p, p.gamma);
    const double sx = sigmoid(c, p.c_x, p.gamma);
    const double sf = sigmoid(c, p.c_f, p.beta);
    const double dsp = p.gamma / c * sp * (1.0 - sp);
    const double dsx = p.gamma / c * sx * (1.0 - sx);
    const double f = p.f0 * sf;
    const double df = p.f0 * p.beta / c * sf * (1.0 - sf);
    if (f < f_floor_) throw SingularityError("buffer factor below its floor");

    const double g = p.mu * (1.0 - p.b * sp - p.theta * (1.0 - sx) - p.nu) + x.w - p.w0;
    LocalModel m;
    m.drift = {g * f, p.mu * (1.0 - p.b * sp + p.theta * (1.0 - sx) + p.nu) - x.w + p.w0};
    m.jacobian = {p.mu * (-p.b * dsp + p.theta * dsx) * f + g * df, f, p.mu * (-p.b * dsp - p.theta * dsx), -1.0};
    const double mu2 = p.mu * p.mu;
    const double mf2 = mu2 * f * f;
    m.covariance = Mat2::diagonal(mf2, mu2);
    m.inverse_metric = Mat2::diagonal(1.0 / mf2, 1.0 / mu2);
    m.covariance_gradient = {Mat2::diagonal(2.0 * mu2 * f * df, 0.0), Mat2{}};
    return m;
}

ActionTerms CarbonSystem::action_terms(const State& x) const {
    require_admissible(x);
    const ModelParams& p = params_;
    const double sp = sigmoid(x.c, p.c_p, p.gamma);
    const double sx_bar = 1.0 - sigmoid(x.c, p.c_x, p.gamma);
    const double f = buffer(x.c, p);
    if (f < f_floor_) throw SingularityError("buffer factor below its floor");
    const double g = p.mu * (1.0 - p.b * sp - p.theta * sx_bar - p.nu) + x.w - p.w0;
    const double mf = p.mu * f;
    return {{g * f, p.mu * (1.0 - p.b * sp + p.theta * sx_bar + p.nu) - x.w + p.w0},
            Mat2::diagonal(1.0 / (mf * mf), 1.0 / (p.mu * p.mu))};
}

}  // namespace carbongmam
