// Sums over the eigenvalue lattice lambda(k,l) = eps + 4 pi^2 (k^2 + l^2).
// Pure power sums are evaluated analytically (Poisson summation turns each
// row into a closed-form term plus an exponentially convergent Bessel-K
// series); weighted sums with kappa > 0 fall back to an explicit partial
// sum plus a certified majorant tail.
#pragma once

#include "torusns/basis.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace torusns::lattice {

// Visits one representative per quadrant orbit of Z^2 \ {0} with
// s = k^2 + l^2 in [s_lo, s_hi): f(s, multiplicity).  The origin (s = 0)
// is visited only when s_lo == 0.
template <class F>
void for_each_orbit(std::int64_t s_lo, std::int64_t s_hi, F&& f) {
    if (s_lo <= 0 && 0 < s_hi) f(std::int64_t{0}, 1);
    for (std::int64_t k = 1; k * k < s_hi; ++k) {
        const std::int64_t kk = k * k;
        if (kk >= s_lo) f(kk, 4);
        for (std::int64_t l = 1; kk + l * l < s_hi; ++l) {
            const std::int64_t s = kk + l * l;
            if (s >= s_lo) f(s, 4);
        }
    }
}

// sum_{l in Z} (a + 4 pi^2 l^2)^(-q) for a > 0, q > 1/2.
// Poisson summation gives the closed-form integral term plus Bessel-K
// corrections decaying like exp(-m sqrt(a)).
inline double row_sum(double a, double q) {
    if (!(a > 0.0)) throw std::invalid_argument("row_sum: a must satisfy a > 0");
    if (!(q > 0.5)) throw std::invalid_argument("row_sum: q must satisfy q > 1/2");
    const double sqrt_pi = std::sqrt(kPi);
    const double nu = q - 0.5;
    const double gamma_q = std::tgamma(q);
    const double sqrt_a = std::sqrt(a);

    double value = std::tgamma(nu) / (2.0 * sqrt_pi * gamma_q) * std::pow(a, -nu);

    const double bessel_coef = 2.0 / (sqrt_pi * gamma_q);
    for (int m = 1; m <= 4096; ++m) {
        const double x = m * sqrt_a;
        if (x > 700.0) break; // K_nu underflows
        const double term =
            bessel_coef * std::pow(m / (2.0 * sqrt_a), nu) * std::cyl_bessel_k(nu, x);
        value += term;
        if (term < value * 1e-17) break;
    }
    return value;
}

// sum_{(k,l) in Z^2} (eps + 4 pi^2 (k^2 + l^2))^(-q) for q > 1.
// Row-wise Poisson summation; the aggregated row integrals form another
// 1D series of the same shape at exponent q - 1/2.
inline double full_sum(double q, double eps) {
    if (!(q > 1.0)) throw std::invalid_argument("full_sum: q must satisfy q > 1");
    if (!(eps > 0.0)) throw std::invalid_argument("full_sum: eps must satisfy eps > 0");
    const double sqrt_pi = std::sqrt(kPi);
    const double nu = q - 0.5;
    const double gamma_q = std::tgamma(q);
    const double c_integral = std::tgamma(nu) / (2.0 * sqrt_pi * gamma_q);

    double value = c_integral * row_sum(eps, nu);

    const double bessel_coef = 2.0 / (sqrt_pi * gamma_q);
    auto row_bessel = [&](double a) {
        const double sqrt_a = std::sqrt(a);
        double b = 0.0;
        for (int m = 1; m <= 4096; ++m) {
            const double x = m * sqrt_a;
            if (x > 700.0) break;
            const double term =
                bessel_coef * std::pow(m / (2.0 * sqrt_a), nu) * std::cyl_bessel_k(nu, x);
            b += term;
            if (term < (value + b) * 1e-17) break;
        }
        return b;
    };

    value += row_bessel(eps);
    for (std::int64_t k = 1; k <= (1 << 20); ++k) {
        const double b = row_bessel(eps + kFourPiSq * double(k) * k);
        value += 2.0 * b;
        if (b < value * 1e-17) break;
    }
    return value;
}

// Explicit sum over lattice orbits with k^2 + l^2 in [s_lo, s_hi) of
// (eps + 4 pi^2 s)^(-q).
inline double partial_power_sum(double q, double eps, std::int64_t s_lo, std::int64_t s_hi) {
    double acc = 0.0;
    for_each_orbit(s_lo, s_hi, [&](std::int64_t s, int mult) {
        acc += mult * std::pow(eps + kFourPiSq * double(s), -q);
    });
    return acc;
}

// Exact tail sum_{k^2+l^2 >= s_cut} (eps + 4 pi^2 s)^(-q).
inline double power_tail(double q, double eps, std::int64_t s_cut) {
    return full_sum(q, eps) - partial_power_sum(q, eps, 0, s_cut);
}

} // namespace torusns::lattice

namespace torusns {

// sum over the whole basis of (kappa + lambda_h)^w * lambda_h^(-p), with the
// returned value overestimating the exact sum by at most tol.
// Requires p - w > 1 (summability).  For kappa = 0 or w = 0 the sum is a
// pure power series and is evaluated analytically.
inline double eigenvalue_series(double w, double p, const SpectralParams& params, double tol) {
    validate(params);
    if (!(tol > 0.0)) throw std::invalid_argument("eigenvalue_series: tol must satisfy tol > 0");
    if (!(p - w > 1.0))
        throw std::invalid_argument("eigenvalue_series: exponents must satisfy p - w > 1");
    if (!(w >= 0.0)) throw std::invalid_argument("eigenvalue_series: w must satisfy w >= 0");
    const double eps = params.epsilon_shift;
    const double kappa = params.kappa;

    // e001 shares the lowest eigenvalue with the (0,0) vector mode.
    const double e001_term = std::pow(kappa + eps, w) * std::pow(eps, -p);

    if (kappa == 0.0 || w == 0.0) {
        const double q = p - (kappa == 0.0 ? w : 0.0);
        return e001_term + lattice::full_sum(q, eps);
    }

    // kappa > 0 and w > 0: explicit head, majorant tail
    // (kappa + lambda)^w <= (1 + kappa/lambda_cut)^w * lambda^w beyond the cut.
    const double q = p - w;
    const double full = lattice::full_sum(q, eps);
    std::int64_t s_cut = 64;
    double head = 0.0, head_power = 0.0;
    auto extend_head = [&](std::int64_t lo, std::int64_t hi) {
        lattice::for_each_orbit(lo, hi, [&](std::int64_t s, int mult) {
            const double lam = eps + kFourPiSq * double(s);
            head += mult * std::pow(kappa + lam, w) * std::pow(lam, -p);
            head_power += mult * std::pow(lam, -q);
        });
    };
    extend_head(0, s_cut);
    for (;;) {
        const double lam_cut = eps + kFourPiSq * double(s_cut);
        const double majorant = std::pow(1.0 + kappa / lam_cut, w);
        const double tail = std::max(0.0, full - head_power);
        if ((majorant - 1.0) * tail <= tol || s_cut > (std::int64_t(1) << 40))
            return e001_term + head + majorant * tail;
        extend_head(s_cut, 4 * s_cut);
        s_cut *= 4;
    }
}

} // namespace torusns
