// The Leray-projected convective nonlinearity R(c2 v - c1 sum_j v_j d_j v),
// its slow quadrature oracle, the explicit Lipschitz constant, and the
// coercivity inequality in executable form.  Analysis against the
// divergence-free basis realizes the orthogonal projection R and the mode
// truncation P_n in one step.
#pragma once

#include "torusns/field.hpp"
#include "torusns/lattice_series.hpp"

#include <cmath>
#include <utility>

namespace torusns {

struct NonlinearityParams {
    double c1 = 1.0;
    double c2 = 0.0;
    double rho = 0.6;
};

inline void validate(const NonlinearityParams& p) {
    if (!(p.rho > 0.5 && p.rho < 1.0))
        throw std::invalid_argument("NonlinearityParams: rho must satisfy 1/2 < rho < 1");
}

namespace detail {

template <class DerivFn>
GridField convective_term_with(const SpectralField& v, int m, TransformPath path, DerivFn&& rule) {
    const GridField gv = synthesize(v, m, path);
    const GridField g1 = synthesize(partial_derivative_with(v, 1, rule), m, path);
    const GridField g2 = synthesize(partial_derivative_with(v, 2, rule), m, path);
    GridField out(m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double v1 = gv.at(i, j, 0), v2 = gv.at(i, j, 1);
            out.at(i, j, 0) = v1 * g1.at(i, j, 0) + v2 * g2.at(i, j, 0);
            out.at(i, j, 1) = v1 * g1.at(i, j, 1) + v2 * g2.at(i, j, 1);
        }
    return out;
}

} // namespace detail

// Grid values of sum_j v_j(x) (d_j v)(x) on the m = 4n grid, where every
// quadrature against modes of resolution n is still exact.
inline GridField convective_term(const SpectralField& v) {
    return detail::convective_term_with(
        v, 4 * v.n(), TransformPath::Auto,
        [](const ModeIndex& m, int j) { return derivative_mode(m, j); });
}

// P_n R(c2 v - c1 sum_j v_j d_j v), returned on the resolution-n mode set.
// The derivative rule is injectable for verification purposes.
template <class DerivFn>
SpectralField nonlinearity_with(const SpectralField& v, const NonlinearityParams& params, int n,
                                DerivFn&& rule) {
    validate(params);
    if (v.n() > n)
        throw std::invalid_argument("nonlinearity: v must be supported on the resolution-n modes");
    const SpectralField vn = embed(v, n);
    const GridField conv = detail::convective_term_with(vn, 4 * n, TransformPath::Auto, rule);
    SpectralField out = analyze(conv, n);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.coeffs[i] = params.c2 * vn.coeffs[i] - params.c1 * out.coeffs[i];
    return out;
}

inline SpectralField nonlinearity(const SpectralField& v, const NonlinearityParams& params, int n) {
    return nonlinearity_with(v, params, n,
                             [](const ModeIndex& m, int j) { return derivative_mode(m, j); });
}

// Independent check of the same contract by dense direct quadrature
// (m >= 8n, no transform); test use only, so desk-scale n is enforced.
inline SpectralField nonlinearity_oracle(const SpectralField& v, const NonlinearityParams& params,
                                         int n) {
    validate(params);
    if (n > 6) throw std::invalid_argument("nonlinearity_oracle: n must satisfy n <= 6");
    if (v.n() > n)
        throw std::invalid_argument("nonlinearity_oracle: v must be supported on the resolution-n modes");
    const SpectralField vn = embed(v, n);
    const int m = 8 * n;
    const GridField conv = detail::convective_term_with(
        vn, m, TransformPath::Direct,
        [](const ModeIndex& mo, int j) { return derivative_mode(mo, j); });
    SpectralField out = analyze(conv, n, TransformPath::Direct);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.coeffs[i] = params.c2 * vn.coeffs[i] - params.c1 * out.coeffs[i];
    return out;
}

// theta = max{ |c2| sup ||u||_H / ||u||_{H_rho}, 4 |c1| (sum_h lambda_h^(-2 rho))^(1/2) }.
// The supremum is attained on the lowest eigenvalue; the lattice series is
// evaluated analytically, so the result overestimates the exact theta by
// far less than tail_tol.
inline double lipschitz_constant(const NonlinearityParams& params, const SpectralParams& spectral,
                                 double tail_tol) {
    validate(params);
    validate(spectral);
    if (!(tail_tol > 0.0))
        throw std::invalid_argument("lipschitz_constant: tail_tol must satisfy tail_tol > 0");
    const double sup_term =
        std::abs(params.c2) * std::pow(spectral.kappa + spectral.epsilon_shift, -params.rho);
    if (params.c1 == 0.0) return sup_term;
    const double series =
        eigenvalue_series(0.0, 2.0 * params.rho, spectral, std::min(tail_tol, 1e-6));
    return std::max(sup_term, 4.0 * std::abs(params.c1) * std::sqrt(series));
}

// Both sides of the coercivity inequality
//   |<v, F(v+w)>_H| <= (3/2 |c2| + c1^2/(2 eps) sup|w|^2) ||v||_H^2
//                      + 2 eps ||v||_{H_1/2}^2
//                      + |c2|/2 sup|w|^2 + c1^2/(2 eps) sup|w|^4,
// with the supremum taken over the m-point grid.
struct CoercivitySides {
    double lhs = 0.0;
    double rhs = 0.0;
};

inline CoercivitySides coercivity_sides(const SpectralField& v, const SpectralField& w, double eps,
                                        const NonlinearityParams& params,
                                        const SpectralParams& spectral, int m) {
    validate(params);
    if (!(eps > 0.0)) throw std::invalid_argument("coercivity_sides: eps must satisfy eps > 0");
    if (!(v.mode_set == w.mode_set))
        throw std::invalid_argument("coercivity_sides: v and w must share a mode set");
    const int n = v.n();
    SpectralField sum(v.mode_set);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.coeffs[i] = v.coeffs[i] + w.coeffs[i];
    const SpectralField fv = nonlinearity(sum, params, n);
    double inner = 0.0;
    for (std::size_t i = 0; i < fv.size(); ++i) inner += v.coeffs[i] * fv.coeffs[i];

    const double s2 = [&] {
        const double s = sup_norm(w, m);
        return s * s;
    }();
    const double norm_h = norm_hr(v, 0.0, spectral);
    const double norm_half = norm_hr(v, 0.5, spectral);
    const double c1sq = params.c1 * params.c1;
    const double rhs = (1.5 * std::abs(params.c2) + c1sq / (2.0 * eps) * s2) * norm_h * norm_h +
                       2.0 * eps * norm_half * norm_half +
                       0.5 * std::abs(params.c2) * s2 + c1sq / (2.0 * eps) * s2 * s2;
    return {std::abs(inner), rhs};
}

// phi(w) = zeta (1 + sup|w|^2), Phi(w) = zeta max{1, sup|w|^zeta}.
struct CoercivityCoefficients {
    double zeta = 0.0;
    double phi_value = 0.0;
    double big_phi_value = 0.0;
};

inline CoercivityCoefficients coercivity_coefficients(const SpectralField& w, double zeta, int m) {
    if (!(zeta >= 1.0))
        throw std::invalid_argument("coercivity_coefficients: zeta must satisfy zeta >= 1");
    const double s = sup_norm(w, m);
    return {zeta, zeta * (1.0 + s * s), zeta * std::max(1.0, std::pow(s, zeta))};
}

// zeta choice that dominates every coefficient in the coercivity argument.
inline double default_zeta(const NonlinearityParams& params) {
    return std::max({1.5 * std::abs(params.c2),
                     0.5 * std::abs(params.c2) + 2.0 * params.c1 * params.c1, 4.0});
}

} // namespace torusns
