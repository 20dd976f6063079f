// Exact per-mode simulation of the stochastic convolution driven by
// (-A)^(-delta) noise: the two-term update is exact in law at every grid
// point, streams are keyed by mode identity so coarser resolutions couple
// to the same Wiener realization, and the truncation error has a certified
// closed form.
#pragma once

#include "torusns/field.hpp"
#include "torusns/lattice_series.hpp"
#include "torusns/rng.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

namespace torusns {

struct NoiseParams {
    double delta = 1.0;
    double eta = 0.0;
    std::uint64_t seed = 0;
    SpectralParams spectral;
};

inline void validate(const NoiseParams& p) {
    validate(p.spectral);
    if (!(p.delta > 0.0)) throw std::invalid_argument("NoiseParams: delta must satisfy delta > 0");
    if (!(p.eta >= 0.0)) throw std::invalid_argument("NoiseParams: eta must satisfy eta >= 0");
}

// Exact one-step update of the per-mode convolution chain:
//   value -> exp(-(lambda+eta) h) value
//            + lambda^(-delta) sqrt((1 - exp(-2 (lambda+eta) h)) / (2 (lambda+eta))) g.
inline double ou_step(double value, double lambda, const NoiseParams& params, double h,
                      double gaussian) {
    const double rate = lambda + params.eta;
    const double decay = std::exp(-rate * h);
    const double sd = std::pow(lambda, -params.delta) *
                      std::sqrt(-std::expm1(-2.0 * rate * h) / (2.0 * rate));
    return decay * value + sd * gaussian;
}

// Stationary-in-t marginal variance of the chain at time t.
inline double ou_variance(double lambda, double t, const NoiseParams& params) {
    const double rate = lambda + params.eta;
    return std::pow(lambda, -2.0 * params.delta) * (-std::expm1(-2.0 * rate * t)) / (2.0 * rate);
}

// Per-mode, per-time values of the stochastic convolution on a time grid.
// values are stored mode-major: values[mode * times.size() + time].
struct OUPath {
    ModeSet mode_set;
    std::vector<double> times;
    std::vector<double> values;

    double at(std::size_t mode, std::size_t time) const {
        return values[mode * times.size() + time];
    }
    std::span<const double> mode_row(std::size_t mode) const {
        return {values.data() + mode * times.size(), times.size()};
    }
};

inline void validate_time_grid(const std::vector<double>& times) {
    if (times.empty()) throw std::invalid_argument("time grid must be non-empty");
    if (times.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("time grid must be strictly increasing");
}

// Streams the chains column by column: visit(k, values) is called for every
// grid index with the per-mode values at times[k].  Gaussians are indexed
// by (mode identity, sample, step), so values are independent of scheduling
// and of which modes are present.
template <class Visit>
void simulate_ou_stream(const ModeSet& set, const std::vector<double>& times,
                        const NoiseParams& params, std::uint64_t sample, Visit&& visit) {
    validate(params);
    validate_time_grid(times);
    const std::size_t count = set.size();
    std::vector<double> lambdas(count), current(count, 0.0);
    std::vector<NormalStream> streams(count);
    for (std::size_t i = 0; i < count; ++i) {
        lambdas[i] = eigenvalue(set[i], params.spectral);
        streams[i] = NormalStream{derive_stream_key(params.seed, set[i], sample)};
    }
    visit(std::size_t{0}, std::span<const double>(current));
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double h = times[k] - times[k - 1];
        for (std::size_t i = 0; i < count; ++i)
            current[i] = ou_step(current[i], lambdas[i], params, h, streams[i](k - 1));
        visit(k, std::span<const double>(current));
    }
}

// Full path on the grid.  Chains are independent per mode, so work may be
// split across threads; the output does not depend on the split.
inline OUPath simulate_ou(const ModeSet& set, const std::vector<double>& times,
                          const NoiseParams& params, std::uint64_t sample = 0,
                          unsigned threads = 1) {
    validate(params);
    validate_time_grid(times);
    OUPath path{set, times, std::vector<double>(set.size() * times.size(), 0.0)};
    const std::size_t count = set.size();
    const std::size_t nt = times.size();
    auto run_range = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const double lambda = eigenvalue(set[i], params.spectral);
            const NormalStream stream{derive_stream_key(params.seed, set[i], sample)};
            double v = 0.0;
            double* row = path.values.data() + i * nt;
            row[0] = 0.0;
            for (std::size_t k = 1; k < nt; ++k) {
                v = ou_step(v, lambda, params, times[k] - times[k - 1], stream(k - 1));
                row[k] = v;
            }
        }
    };
    if (threads <= 1 || count < 64) {
        run_range(0, count);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (count + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(count, lo + chunk);
            if (lo < hi) pool.emplace_back(run_range, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return path;
}

// Drops modes outside the resolution-n set and subsamples the grid; values
// of retained modes are copied bit-exactly, so the result is the
// resolution-n convolution driven by the same Wiener realization.
inline OUPath restrict_path(const OUPath& path, int n, const std::vector<double>& coarse_times) {
    if (n > path.mode_set.n)
        throw std::invalid_argument("restrict_path: target mode set is not contained in the source");
    validate_time_grid(coarse_times);
    // locate each coarse time in the fine grid
    std::vector<std::size_t> where(coarse_times.size());
    std::size_t j = 0;
    for (std::size_t c = 0; c < coarse_times.size(); ++c) {
        const double t = coarse_times[c];
        const double tol = 1e-9 * (1.0 + std::abs(t));
        while (j < path.times.size() && path.times[j] < t - tol) ++j;
        if (j >= path.times.size() || std::abs(path.times[j] - t) > tol)
            throw std::invalid_argument("restrict_path: coarse grid is not nested in the source grid");
        where[c] = j;
    }
    const ModeSet target = build_mode_set(n);
    OUPath out{target, coarse_times,
               std::vector<double>(target.size() * coarse_times.size(), 0.0)};
    const std::size_t nt = path.times.size();
    std::size_t src = 0;
    for (std::size_t d = 0; d < target.size(); ++d) {
        while (!((*path.mode_set.modes)[src] == target[d])) ++src;
        const double* row = path.values.data() + src * nt;
        double* dst = out.values.data() + d * coarse_times.size();
        for (std::size_t c = 0; c < coarse_times.size(); ++c) dst[c] = row[where[c]];
    }
    return out;
}

// E || O_t - P_n O_t ||^2 in the rho_bar-weighted norm:
//   sum over excluded modes of (kappa+lambda)^(2 rho_bar) lambda^(-2 delta)
//   (1 - exp(-2 lambda t)) / (2 lambda),
// summed explicitly over lattice orbits up to an adaptive cutoff plus an
// analytic tail bound; the result overestimates the exact value by at most
// tail_tol.
inline double truncation_error_exact(int n, double t, double rho_bar, const NoiseParams& params,
                                     double tail_tol) {
    validate(params);
    if (n < 1) throw std::invalid_argument("truncation_error_exact: n must satisfy n >= 1");
    if (!(t >= 0.0)) throw std::invalid_argument("truncation_error_exact: t must satisfy t >= 0");
    if (!(params.delta > rho_bar))
        throw std::invalid_argument("truncation_error_exact: must satisfy delta > rho_bar");
    if (!(tail_tol > 0.0))
        throw std::invalid_argument("truncation_error_exact: tail_tol must satisfy tail_tol > 0");
    if (t == 0.0) return 0.0;

    const double eps = params.spectral.epsilon_shift;
    const double kappa = params.spectral.kappa;
    const double q_eff = 1.0 + 2.0 * params.delta - 2.0 * rho_bar;
    const double full = lattice::full_sum(q_eff, eps);

    const std::int64_t s_min = std::int64_t(n) * n;
    std::int64_t s_cut = std::max<std::int64_t>(s_min, 64);
    double explicit_part = 0.0;
    double power_below = lattice::partial_power_sum(q_eff, eps, 0, std::min(s_min, s_cut));
    auto extend = [&](std::int64_t lo, std::int64_t hi) {
        lattice::for_each_orbit(lo, hi, [&](std::int64_t s, int mult) {
            const double lam = eps + kFourPiSq * double(s);
            const double pw = std::pow(lam, -q_eff);
            power_below += mult * pw;
            explicit_part += mult * std::pow(kappa + lam, 2.0 * rho_bar) *
                             std::pow(lam, -1.0 - 2.0 * params.delta) *
                             (-std::expm1(-2.0 * lam * t)) / 2.0;
        });
    };
    extend(s_min, s_cut);
    for (;;) {
        const double lam_cut = eps + kFourPiSq * double(s_cut);
        const double majorant = std::pow(1.0 + kappa / lam_cut, 2.0 * rho_bar);
        const double power_tail = std::max(0.0, full - power_below);
        const double tail_bound = majorant * power_tail / 2.0;
        const double overestimate =
            ((majorant - 1.0) + majorant * std::exp(-2.0 * lam_cut * t)) * power_tail / 2.0;
        if (overestimate <= tail_tol || s_cut > (std::int64_t(1) << 40))
            return explicit_part + tail_bound;
        extend(s_cut, 4 * s_cut);
        s_cut *= 4;
    }
}

// Rate-style upper bound for the squared truncation error at moment order p:
//   (p(p-1)/4) (4 pi^2)^(-2 eps) [sum_h (kappa+lambda_h)^(2 rho_bar + 2 eps)
//   lambda_h^(-1-2 delta)] n^(-4 eps).
inline double truncation_rate_bound(int n, double epsilon, double p, double rho_bar,
                                    const NoiseParams& params, double tol = 1e-10) {
    validate(params);
    if (!(epsilon >= 0.0 && epsilon < params.delta - rho_bar))
        throw std::invalid_argument(
            "truncation_rate_bound: epsilon must satisfy 0 <= epsilon < delta - rho_bar");
    const double series = eigenvalue_series(2.0 * rho_bar + 2.0 * epsilon,
                                            1.0 + 2.0 * params.delta, params.spectral, tol);
    return (p * (p - 1.0) / 4.0) * std::pow(kFourPiSq, -2.0 * epsilon) * series *
           std::pow(double(n), -4.0 * epsilon);
}

// Shifted convolution from the unshifted one:
//   Q_t = O_t + exp(-lambda t) xi - exp(-(lambda+eta) t) xi
//         - eta int_0^t exp(-(lambda+eta)(t-s)) [O_s + exp(-lambda s) xi] ds,
// with O taken piecewise constant on grid cells (exact exponential weights)
// and the xi part integrated in closed form.  Diagnostic use only.
inline OUPath shifted_ou_from_unshifted(const OUPath& path, const SpectralField& xi, double eta,
                                        const NoiseParams& params) {
    if (!(eta >= 0.0))
        throw std::invalid_argument("shifted_ou_from_unshifted: eta must satisfy eta >= 0");
    const SpectralField xi_n = (xi.n() >= path.mode_set.n) ? project(xi, path.mode_set.n)
                                                           : embed(xi, path.mode_set.n);
    const std::size_t nt = path.times.size();
    OUPath out{path.mode_set, path.times, std::vector<double>(path.values.size(), 0.0)};
    for (std::size_t i = 0; i < path.mode_set.size(); ++i) {
        const double lambda = eigenvalue(path.mode_set[i], params.spectral);
        const double rate = lambda + eta;
        const double xi_c = xi_n.coeffs[i];
        const double* o = path.values.data() + i * nt;
        double* q = out.values.data() + i * nt;
        double integral = 0.0; // running int_0^t exp(-rate (t-s)) O(s) ds
        for (std::size_t j = 0; j < nt; ++j) {
            const double t = path.times[j];
            if (j > 0) {
                const double hk = path.times[j] - path.times[j - 1];
                integral = std::exp(-rate * hk) * integral +
                           o[j - 1] * (-std::expm1(-rate * hk)) / rate;
            }
            const double xi_integral =
                (eta == 0.0) ? 0.0 : std::exp(-lambda * t) * (-std::expm1(-eta * t)) * xi_c;
            const double xi_terms =
                std::exp(-lambda * t) * xi_c - std::exp(-rate * t) * xi_c - xi_integral;
            q[j] = o[j] + (xi_terms - eta * integral);
        }
    }
    return out;
}

} // namespace torusns
