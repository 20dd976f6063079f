// The executable property sweep behind the `verify` command: every bound
// the modules promise, run at desk scale with fixed seeds, reporting
// pass/fail and the worst margin per check.  The spectral derivative rule
// is injectable so tests can confirm the sweep actually catches a broken
// derivative.
#pragma once

#include "torusns/nonlinearity.hpp"
#include "torusns/scheme.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace torusns::verification {

struct CheckResult {
    std::string id;
    bool pass = false;
    double margin = 0.0; // tolerance minus the worst observed value
    std::string detail;
};

using DerivRule = std::function<ModeDerivative(const ModeIndex&, int)>;

struct VerifyOptions {
    int n_max = 6;
    std::uint64_t seed = 0;
    DerivRule derivative = [](const ModeIndex& m, int j) { return derivative_mode(m, j); };
};

namespace detail {

inline SpectralField random_field(int n, std::uint64_t seed, double scale = 1.0) {
    SpectralField f(build_mode_set(n));
    NormalStream g{mix64(seed)};
    for (std::size_t i = 0; i < f.size(); ++i) f.coeffs[i] = scale * g(i);
    return f;
}

inline std::string io_format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3e", v);
    return buf;
}

inline CheckResult bounded(std::string id, double worst, double tol, std::string extra = "") {
    CheckResult r;
    r.id = std::move(id);
    r.pass = worst <= tol;
    r.margin = tol - worst;
    r.detail = "worst " + io_format(worst) + " vs tolerance " + io_format(tol) +
               (extra.empty() ? "" : " (" + extra + ")");
    return r;
}

} // namespace detail

inline CheckResult check_orthonormality(const VerifyOptions& opt) {
    double worst = 0.0;
    for (int n = 1; n <= opt.n_max; ++n) {
        auto set = build_mode_set(n);
        const int m = 4 * n;
        std::vector<std::vector<std::array<double, 2>>> vals(set.size());
        for (std::size_t h = 0; h < set.size(); ++h) {
            vals[h].resize(std::size_t(m) * m);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    vals[h][std::size_t(i) * m + j] = eval_basis(set[h], (i + 0.5) / m, (j + 0.5) / m);
        }
        const double w = 1.0 / (double(m) * m);
        for (std::size_t a = 0; a < set.size(); ++a)
            for (std::size_t b = a; b < set.size(); ++b) {
                double ip = 0.0;
                for (std::size_t i = 0; i < vals[a].size(); ++i)
                    ip += vals[a][i][0] * vals[b][i][0] + vals[a][i][1] * vals[b][i][1];
                worst = std::max(worst, std::abs(ip * w - (a == b ? 1.0 : 0.0)));
            }
    }
    return detail::bounded("basis.orthonormality", worst, 1e-10,
                           "gram deviation, n <= " + std::to_string(opt.n_max));
}

inline CheckResult check_sup_norm(const VerifyOptions&) {
    const int m = 256;
    double worst = 0.0;
    for (const auto& mode : build_mode_set(6)) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const auto v = eval_basis(mode, (i + 0.5) / m, (j + 0.5) / m);
                worst = std::max(worst, std::hypot(v[0], v[1]));
            }
    }
    return detail::bounded("basis.sup_norm", worst, 2.0 + 1e-12, "pointwise norm over 256^2 grid");
}

inline CheckResult check_divergence_free(const VerifyOptions& opt) {
    // spectral divergence assembled from the derivative rule, quadrature norm
    const int n = 4, m = 32;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto f = detail::random_field(n, opt.seed + 8000 + s);
        double acc = 0.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                const double x = (i + 0.5) / m, y = (j + 0.5) / m;
                double div = 0.0;
                for (std::size_t h = 0; h < f.size(); ++h) {
                    if (f.coeffs[h] == 0.0) continue;
                    const auto d1 = opt.derivative(f.mode_set[h], 1);
                    const auto d2 = opt.derivative(f.mode_set[h], 2);
                    div += f.coeffs[h] * (d1.coefficient * eval_basis(d1.target, x, y)[0] +
                                          d2.coefficient * eval_basis(d2.target, x, y)[1]);
                }
                acc += div * div;
            }
        worst = std::max(worst, std::sqrt(acc / (double(m) * m)));
    }
    return detail::bounded("basis.divergence_free", worst, 1e-10,
                           "quadrature norm of the spectral divergence, 50 random fields");
}

inline CheckResult check_derivative_bound(const VerifyOptions& opt) {
    SpectralParams sp;
    double worst = 0.0;
    for (const auto& mode : build_mode_set(8))
        for (int j : {1, 2})
            worst = std::max(worst, std::abs(opt.derivative(mode, j).coefficient) /
                                        std::sqrt(eigenvalue(mode, sp)));
    return detail::bounded("basis.derivative_bound", worst, 1.0 + 1e-12,
                           "|coefficient| lambda^(-1/2)");
}

inline CheckResult check_derivative_orthogonality(const VerifyOptions& opt) {
    auto set = build_mode_set(6);
    const int m = 24;
    const double w = 1.0 / (double(m) * m);
    // synthesized derivative grids per mode and direction
    double worst = 0.0;
    for (int j : {1, 2}) {
        std::vector<std::vector<std::array<double, 2>>> grids(set.size());
        std::vector<double> coefs(set.size());
        for (std::size_t h = 0; h < set.size(); ++h) {
            const auto d = opt.derivative(set[h], j);
            coefs[h] = d.coefficient;
            if (d.coefficient == 0.0) continue;
            grids[h].resize(std::size_t(m) * m);
            for (int i = 0; i < m; ++i)
                for (int jj = 0; jj < m; ++jj)
                    grids[h][std::size_t(i) * m + jj] =
                        eval_basis(d.target, (i + 0.5) / m, (jj + 0.5) / m);
        }
        for (std::size_t a = 0; a < set.size(); ++a) {
            if (coefs[a] == 0.0) continue;
            for (std::size_t b = a + 1; b < set.size(); ++b) {
                if (coefs[b] == 0.0) continue;
                double ip = 0.0;
                for (std::size_t i = 0; i < grids[a].size(); ++i)
                    ip += grids[a][i][0] * grids[b][i][0] + grids[a][i][1] * grids[b][i][1];
                worst = std::max(worst, std::abs(coefs[a] * coefs[b] * ip * w));
            }
        }
    }
    return detail::bounded("basis.derivative_orthogonality", worst, 1e-10,
                           "cross inner products of derivatives, n = 6");
}

inline CheckResult check_summability(const VerifyOptions&) {
    SpectralParams sp;
    std::vector<double> partial;
    for (int n : {2, 4, 8, 16, 32, 64}) {
        double s = 0.0;
        for (const auto& mode : build_mode_set(n)) s += std::pow(eigenvalue(mode, sp), -1.5);
        partial.push_back(s);
    }
    bool ok = true;
    for (std::size_t i = 1; i < partial.size(); ++i) ok = ok && partial[i] >= partial[i - 1];
    for (std::size_t i = 2; i < partial.size(); ++i)
        ok = ok && (partial[i] - partial[i - 1] < partial[i - 1] - partial[i - 2]);
    CheckResult r;
    r.id = "basis.eigenvalue_summability";
    r.pass = ok;
    r.margin = ok ? 1.0 : -1.0;
    r.detail = "partial sums monotone with shrinking increments";
    return r;
}

inline CheckResult check_transform_roundtrip(const VerifyOptions& opt) {
    double worst = 0.0;
    for (int n : {2, 4, 12}) {
        const auto f = detail::random_field(n, opt.seed + 100 + n);
        const auto back = analyze(synthesize(f, 4 * n), n);
        for (std::size_t i = 0; i < f.size(); ++i)
            worst = std::max(worst, std::abs(back.coeffs[i] - f.coeffs[i]));
    }
    return detail::bounded("fields.transform_roundtrip", worst, 1e-12,
                           "analyze(synthesize(f)) - f per coefficient");
}

inline CheckResult check_projection_tail(const VerifyOptions& opt) {
    SpectralParams sp;
    const double r = 0.25, e = 0.5;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const int n = 2 + int(s % 3);
        const auto f = detail::random_field(2 * n, opt.seed + 600 + s);
        SpectralField diff = f;
        const auto proj = embed(project(f, n), 2 * n);
        for (std::size_t i = 0; i < diff.size(); ++i) diff.coeffs[i] -= proj.coeffs[i];
        const double bound = projection_tail_bound(n, e, sp) * norm_hr(f, r + e, sp);
        worst = std::max(worst, norm_hr(diff, r, sp) / bound);
    }
    return detail::bounded("operator.projection_tail", worst, 1.0 + 1e-12,
                           "tail norm over the operator bound");
}

inline CheckResult check_oracle_agreement(const VerifyOptions& opt) {
    const NonlinearityParams params{1.0, 0.0, 0.6};
    double worst = 0.0;
    for (int n : {2, 3, 4})
        for (std::uint64_t s = 0; s < 100; ++s) {
            const auto v = detail::random_field(n, opt.seed + 1000 * n + s);
            const auto fast = nonlinearity_with(v, params, n, opt.derivative);
            const auto slow = nonlinearity_oracle(v, params, n);
            for (std::size_t i = 0; i < fast.size(); ++i)
                worst = std::max(worst, std::abs(fast.coeffs[i] - slow.coeffs[i]));
        }
    return detail::bounded("nonlinearity.oracle_agreement", worst, 1e-10,
                           "100 random fields per n in {2,3,4}");
}

inline CheckResult check_energy_orthogonality(const VerifyOptions& opt) {
    const NonlinearityParams params{1.0, 0.0, 0.6};
    SpectralParams sp;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto v = detail::random_field(4, opt.seed + 4000 + s);
        const auto fv = nonlinearity_with(v, params, 4, opt.derivative);
        double inner = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) inner += v.coeffs[i] * fv.coeffs[i];
        const double scale = norm_hr(v, 0.0, sp) * norm_hr(fv, 0.0, sp) + 1e-300;
        worst = std::max(worst, std::abs(inner) / scale);
    }
    return detail::bounded("nonlinearity.energy_orthogonality", worst, 1e-10,
                           "|<v, F(v)>| / (||v|| ||F(v)||), c2 = 0");
}

inline CheckResult check_coercivity(const VerifyOptions& opt) {
    SpectralParams sp;
    const NonlinearityParams params{1.0, 0.3, 0.6};
    double worst = -1e300;
    for (double eps : {0.25, 1.0}) {
        for (std::uint64_t s = 0; s < 100; ++s) {
            auto v = detail::random_field(4, opt.seed + 7000 + s);
            const auto w = detail::random_field(4, opt.seed + 7500 + s, 0.5);
            if (s % 10 == 0)
                for (double& c : v.coeffs) c *= 20.0; // amplified trials
            SpectralField sum = v;
            for (std::size_t i = 0; i < sum.size(); ++i) sum.coeffs[i] += w.coeffs[i];
            const auto fv = nonlinearity_with(sum, params, 4, opt.derivative);
            double inner = 0.0;
            for (std::size_t i = 0; i < fv.size(); ++i) inner += v.coeffs[i] * fv.coeffs[i];
            const double s2 = [&] {
                const double sn = sup_norm(w, 64);
                return sn * sn;
            }();
            const double nh = norm_hr(v, 0.0, sp), nhalf = norm_hr(v, 0.5, sp);
            const double c1sq = params.c1 * params.c1;
            const double rhs = (1.5 * std::abs(params.c2) + c1sq / (2.0 * eps) * s2) * nh * nh +
                               2.0 * eps * nhalf * nhalf + 0.5 * std::abs(params.c2) * s2 +
                               c1sq / (2.0 * eps) * s2 * s2;
            worst = std::max(worst, std::abs(inner) - rhs);
        }
    }
    return detail::bounded("nonlinearity.coercivity", worst, 1e-9,
                           "lhs - rhs over 200 random pairs, eps in {1/4, 1}");
}

inline CheckResult check_lipschitz(const VerifyOptions& opt) {
    SpectralParams sp;
    const NonlinearityParams params{1.0, 0.5, 0.6};
    const double theta = lipschitz_constant(params, sp, 1e-8);
    double worst = -1e300;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto v = detail::random_field(4, opt.seed + 9000 + s);
        const auto w = detail::random_field(4, opt.seed + 9500 + s);
        auto fv = nonlinearity_with(v, params, 4, opt.derivative);
        const auto fw = nonlinearity_with(w, params, 4, opt.derivative);
        SpectralField dv = v;
        for (std::size_t i = 0; i < dv.size(); ++i) {
            dv.coeffs[i] -= w.coeffs[i];
            fv.coeffs[i] -= fw.coeffs[i];
        }
        const double lhs = norm_hr(fv, 0.0, sp);
        const double rhs = theta * (1.0 + norm_hr(v, params.rho, sp) + norm_hr(w, params.rho, sp)) *
                           norm_hr(dv, params.rho, sp);
        worst = std::max(worst, lhs - rhs);
    }
    return detail::bounded("nonlinearity.lipschitz", worst, 1e-9,
                           "||F(v)-F(w)|| minus the theta bound, 200 pairs");
}

inline CheckResult check_ou_variance(const VerifyOptions& opt) {
    NoiseParams p;
    p.delta = 1.0;
    p.seed = opt.seed + 2024;
    auto set = build_mode_set(2);
    const int samples = 10000;
    const double t = 0.5;
    double worst = 0.0;
    for (std::size_t mi : {std::size_t(0), std::size_t(3), std::size_t(7)}) {
        const double lambda = eigenvalue(set[mi], p.spectral);
        double sum = 0.0, sum2 = 0.0;
        for (int s = 0; s < samples; ++s) {
            const NormalStream stream{derive_stream_key(p.seed, set[mi], std::uint64_t(s))};
            double v = 0.0;
            for (int k = 0; k < 4; ++k) v = ou_step(v, lambda, p, t / 4.0, stream(k));
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / samples;
        const double var = sum2 / samples - mean * mean;
        const double expected = ou_variance(lambda, t, p);
        const double se = expected * std::sqrt(2.0 / samples);
        worst = std::max(worst, std::abs(var - expected) / (4.0 * se));
    }
    return detail::bounded("noise.ou_variance", worst, 1.0,
                           "|sample - closed form| over 4 standard errors, 10^4 samples");
}

inline CheckResult check_truncation_rate(const VerifyOptions&) {
    NoiseParams p;
    p.delta = 1.0;
    const double rb = 0.75;
    double worst = 0.0;
    for (double eps : {0.05, 0.1, 0.2})
        for (int n : {2, 4, 8, 16}) {
            const double closed = truncation_error_exact(n, 1.0, rb, p, 1e-9);
            const double bound = truncation_rate_bound(n, eps, 2.0, rb, p);
            worst = std::max(worst, closed / bound);
        }
    return detail::bounded("noise.truncation_rate", worst, 1.0,
                           "closed form over the rate bound");
}

inline CheckResult check_scheme_consistency(const VerifyOptions& opt) {
    SchemeParams p;
    p.n = 4;
    p.h = 0.125;
    p.T = 1.0;
    p.chi = 0.05;
    p.rho_bar = 0.75;
    p.nonlin = {1.0, 0.0, 0.6};
    p.noise.delta = 1.0;
    p.noise.seed = opt.seed + 300;
    p.xi = detail::random_field(4, opt.seed + 301, 0.25);
    const auto grid = make_time_grid(p.T, p.h);
    const auto path = simulate_ou(build_mode_set(4), grid, p.noise);
    const auto traj = run_trajectory(p, path);
    const SpectralParams sp = p.noise.spectral;
    double worst = 0.0;
    for (std::size_t K : {std::size_t(4), std::size_t(8)}) {
        SpectralField direct = semigroup_apply(p.xi, grid[K], sp);
        for (std::size_t i = 0; i < direct.size(); ++i) direct.coeffs[i] += path.at(i, K);
        for (std::size_t j = 0; j < K; ++j) {
            if (!traj.indicator_log[j]) continue;
            const auto f = nonlinearity(traj.states[j], p.nonlin, p.n);
            const double hj = grid[j + 1] - grid[j];
            for (std::size_t i = 0; i < direct.size(); ++i) {
                const double lam = eigenvalue(direct.mode_set[i], sp);
                direct.coeffs[i] += std::exp(-lam * (grid[K] - grid[j + 1])) *
                                    drift_weight(lam, hj) * f.coeffs[i];
            }
        }
        for (std::size_t i = 0; i < direct.size(); ++i)
            worst = std::max(worst, std::abs(direct.coeffs[i] - traj.states[K].coeffs[i]));
    }
    return detail::bounded("scheme.global_consistency", worst, 1e-10,
                           "iterated state vs direct assembly");
}

inline CheckResult check_linear_exactness(const VerifyOptions& opt) {
    SchemeParams p;
    p.n = 3;
    p.h = 1.0 / 16.0;
    p.T = 1.0;
    p.chi = 0.05;
    p.rho_bar = 0.75;
    p.nonlin = {0.0, 0.0, 0.6};
    p.noise.delta = 1.0;
    p.noise.seed = opt.seed + 555;
    p.xi = SpectralField(build_mode_set(3));
    const auto grid = make_time_grid(p.T, p.h);
    const auto path = simulate_ou(build_mode_set(3), grid, p.noise);
    const auto traj = run_trajectory(p, path);
    bool exact = true;
    for (std::size_t k = 0; k < grid.size() && exact; ++k)
        for (std::size_t i = 0; i < traj.states[k].size(); ++i)
            if (traj.states[k].coeffs[i] != path.at(i, k)) exact = false;
    CheckResult r;
    r.id = "scheme.linear_exactness";
    r.pass = exact;
    r.margin = exact ? 1.0 : -1.0;
    r.detail = "trajectory equals the convolution bitwise at c1 = c2 = 0, xi = 0";
    return r;
}

inline std::vector<CheckResult> run_all(const VerifyOptions& opt = {}) {
    return {
        check_orthonormality(opt),
        check_sup_norm(opt),
        check_divergence_free(opt),
        check_derivative_bound(opt),
        check_derivative_orthogonality(opt),
        check_summability(opt),
        check_transform_roundtrip(opt),
        check_projection_tail(opt),
        check_oracle_agreement(opt),
        check_energy_orthogonality(opt),
        check_coercivity(opt),
        check_lipschitz(opt),
        check_ou_variance(opt),
        check_truncation_rate(opt),
        check_scheme_consistency(opt),
        check_linear_exactness(opt),
    };
}

} // namespace torusns::verification
