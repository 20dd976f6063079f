// Fully explicit space-time discretization: exact per-mode semigroup
// factors, exact exponential drift weights, the taming indicator that
// switches the nonlinearity off above the h^(-chi) norm budget, and the
// trajectory runner.
#pragma once

#include "torusns/noise.hpp"
#include "torusns/nonlinearity.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace torusns {

struct SchemeParams {
    int n = 8;
    double h = 1.0 / 256.0;
    double T = 1.0;
    double chi = 0.05;
    double rho_bar = 0.75;
    double gamma = 2.0;
    NonlinearityParams nonlin; // carries rho
    NoiseParams noise;
    SpectralField xi;

    double rho() const { return nonlin.rho; }
};

inline void validate(const SchemeParams& p) {
    validate(p.nonlin);
    validate(p.noise);
    if (p.n < 1) throw std::invalid_argument("SchemeParams: n must satisfy n >= 1");
    const double rho = p.nonlin.rho;
    if (!(rho < p.rho_bar))
        throw std::invalid_argument("SchemeParams: must satisfy rho < rho_bar");
    if (!(p.rho_bar < 1.0))
        throw std::invalid_argument("SchemeParams: rho_bar must satisfy rho_bar < 1");
    if (!(p.noise.delta > p.rho_bar))
        throw std::invalid_argument("SchemeParams: delta must satisfy delta > rho_bar");
    if (!(p.gamma > p.rho_bar))
        throw std::invalid_argument("SchemeParams: gamma must satisfy gamma > rho_bar");
    const double chi_max = std::min((1.0 - rho) / 5.0, (p.rho_bar - rho) / 3.0);
    if (!(p.chi > 0.0 && p.chi <= chi_max))
        throw std::invalid_argument(
            "SchemeParams: chi must satisfy 0 < chi <= min{(1-rho)/5, (rho_bar-rho)/3} = " +
            std::to_string(chi_max));
    if (!(p.T > 0.0)) throw std::invalid_argument("SchemeParams: T must satisfy T > 0");
    if (!(p.h > 0.0 && p.h <= p.T))
        throw std::invalid_argument("SchemeParams: h must satisfy 0 < h <= T");
}

// Grid {0, h, 2h, ...} up to T, with a final partial step when h does not
// divide T.
inline std::vector<double> make_time_grid(double T, double h) {
    if (!(h > 0.0 && h <= T)) throw std::invalid_argument("make_time_grid: need 0 < h <= T");
    std::vector<double> times{0.0};
    for (std::size_t k = 1;; ++k) {
        const double t = double(k) * h;
        if (t >= T * (1.0 - 1e-12)) break;
        times.push_back(t);
    }
    times.push_back(T);
    return times;
}

// exp(t A): every coefficient contracts by exp(-lambda_h t).
inline SpectralField semigroup_apply(const SpectralField& field, double t,
                                     const SpectralParams& params) {
    if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: t must satisfy t >= 0");
    SpectralField out = field;
    const auto& modes = *field.mode_set.modes;
    for (std::size_t i = 0; i < modes.size(); ++i)
        out.coeffs[i] *= std::exp(-eigenvalue(modes[i], params) * t);
    return out;
}

// Exact drift-integral weight over one step: (1 - exp(-lambda h)) / lambda,
// in (0, min{h, 1/lambda}].  expm1 keeps small lambda h free of cancellation.
inline double drift_weight(double lambda, double h) {
    if (!(lambda > 0.0 && h > 0.0))
        throw std::invalid_argument("drift_weight: need lambda > 0 and h > 0");
    return -std::expm1(-lambda * h) / lambda;
}

// 1 iff ||x||_{H_rho_bar} + ||ou + e^{tA} P_n xi||_{H_rho_bar} <= h^(-chi)
// (inclusive inequality).
inline bool truncation_indicator(const SpectralField& x_state, const SpectralField& ou_plus_xi,
                                 double h, double chi, double rho_bar,
                                 const SpectralParams& params) {
    if (!(x_state.mode_set == ou_plus_xi.mode_set))
        throw std::invalid_argument("truncation_indicator: fields must share a mode set");
    const double budget = std::pow(h, -chi);
    return norm_hr(x_state, rho_bar, params) + norm_hr(ou_plus_xi, rho_bar, params) <= budget;
}

// Precomputed per-mode factors for stepping a fixed configuration.  The
// state update is
//   x_{k+1} = e^{dt A}(x_k - ou_k) + ou_{k+1} + 1_{...} w(dt) F(x_k),
// algebraically the one-step form of the global scheme formula (the OU
// increment ou_{k+1} - e^{dt A} ou_k is the fresh convolution increment,
// and grouping the contraction on x_k - ou_k makes the linear case exact).
class SchemeStepper {
public:
    explicit SchemeStepper(const SchemeParams& params)
        : params_(params), set_(build_mode_set(params.n)) {
        validate(params);
        const std::size_t count = set_.size();
        lambdas_.resize(count);
        hr_weight_.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            lambdas_[i] = eigenvalue(set_[i], params.noise.spectral);
            hr_weight_[i] = std::pow(params.noise.spectral.kappa + lambdas_[i],
                                     2.0 * params.rho_bar);
        }
        const SpectralField& xi = params.xi;
        xi_ = ((xi.n() >= params.n) ? project(xi, params.n) : embed(xi, params.n)).coeffs;
        budget_ = std::pow(params.h, -params_.chi);
        set_dt(params.h);
    }

    const ModeSet& mode_set() const { return set_; }
    std::span<const double> xi_coeffs() const { return xi_; }

    // State at t = 0: P_n xi (the convolution starts at zero).
    std::vector<double> initial_state() const { return xi_; }

    // Advances x in place; returns the indicator value used for the step.
    bool advance(std::vector<double>& x, std::span<const double> ou0,
                 std::span<const double> ou1, double t_k, double dt) {
        if (x.size() != set_.size() || ou0.size() != x.size() || ou1.size() != x.size())
            throw std::invalid_argument("SchemeStepper: mode-set size mismatch");
        set_dt(dt);
        const bool ind = indicator_at(x, ou0, t_k);
        if (ind) {
            const SpectralField f =
                nonlinearity(SpectralField(set_, x), params_.nonlin, params_.n);
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = decay_[i] * (x[i] - ou0[i]) + ou1[i] + weight_[i] * f.coeffs[i];
        } else {
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = decay_[i] * (x[i] - ou0[i]) + ou1[i];
        }
        for (double v : x)
            if (!std::isfinite(v)) throw numeric_error("scheme state became non-finite");
        return ind;
    }

    bool indicator_at(std::span<const double> x, std::span<const double> ou0, double t_k) const {
        double sx = 0.0, so = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double o = ou0[i] + std::exp(-lambdas_[i] * t_k) * xi_[i];
            sx += hr_weight_[i] * x[i] * x[i];
            so += hr_weight_[i] * o * o;
        }
        return std::sqrt(sx) + std::sqrt(so) <= budget_;
    }

private:
    void set_dt(double dt) {
        if (dt == cached_dt_) return;
        const std::size_t count = set_.size();
        decay_.resize(count);
        weight_.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            decay_[i] = std::exp(-lambdas_[i] * dt);
            weight_[i] = drift_weight(lambdas_[i], dt);
        }
        cached_dt_ = dt;
    }

    SchemeParams params_;
    ModeSet set_;
    std::vector<double> lambdas_, hr_weight_, xi_, decay_, weight_;
    double budget_ = 0.0;
    double cached_dt_ = -1.0;
};

// Single scheme step with the nominal step size.
inline SpectralField scheme_step(const SpectralField& x_k, const SpectralField& ou_k,
                                 const SpectralField& ou_k1, double t_k,
                                 const SchemeParams& params) {
    if (!(x_k.mode_set == ou_k.mode_set) || !(x_k.mode_set == ou_k1.mode_set))
        throw std::invalid_argument("scheme_step: mode-set mismatch");
    if (x_k.n() != params.n) throw std::invalid_argument("scheme_step: state resolution mismatch");
    SchemeStepper stepper(params);
    std::vector<double> x = x_k.coeffs;
    stepper.advance(x, ou_k.coeffs, ou_k1.coeffs, t_k, params.h);
    return SpectralField(x_k.mode_set, std::move(x));
}

struct Trajectory {
    std::vector<double> times;
    ModeSet mode_set;
    std::vector<SpectralField> states;
    std::vector<std::uint8_t> indicator_log; // one entry per step
};

// Iterates the scheme from x_0 = P_n xi across the grid {0, h, ...} up to T,
// reading the coupled convolution values from the supplied path.
inline Trajectory run_trajectory(const SchemeParams& params, const OUPath& path) {
    validate(params);
    const std::vector<double> times = make_time_grid(params.T, params.h);
    const OUPath ou = restrict_path(path, params.n, times);

    SchemeStepper stepper(params);
    Trajectory traj{times, stepper.mode_set(), {}, {}};
    traj.states.reserve(times.size());

    const std::size_t count = stepper.mode_set().size();
    std::vector<double> x = stepper.initial_state();
    std::vector<double> ou0(count), ou1(count);
    traj.states.emplace_back(stepper.mode_set(), x);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        for (std::size_t i = 0; i < count; ++i) {
            ou0[i] = ou.at(i, k);
            ou1[i] = ou.at(i, k + 1);
        }
        const bool ind =
            stepper.advance(x, ou0, ou1, times[k], times[k + 1] - times[k]);
        traj.indicator_log.push_back(ind ? 1 : 0);
        traj.states.emplace_back(stepper.mode_set(), x);
    }
    return traj;
}

} // namespace torusns
