#include <catch2/catch_amalgamated.hpp>

#include "torusns/nonlinearity.hpp"
#include "torusns/rng.hpp"

#include <cmath>

using namespace torusns;
using Catch::Approx;

namespace {

SpectralField random_field(int n, std::uint64_t seed, double scale = 1.0) {
    SpectralField f(build_mode_set(n));
    NormalStream g{mix64(seed)};
    for (std::size_t i = 0; i < f.size(); ++i) f.coeffs[i] = scale * g(i);
    return f;
}

SpectralField unit_on(int n, ModeIndex mode, double c = 1.0) {
    SpectralField f(build_mode_set(n));
    f.coeffs[mode_position(f.mode_set, mode)] = c;
    return f;
}

double max_coeff_diff(const SpectralField& a, const SpectralField& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.coeffs[i] - b.coeffs[i]));
    return worst;
}

} // namespace

TEST_CASE("convective term of simple fields", "[nonlinearity]") {
    auto e = unit_on(2, ModeIndex::e001());
    for (double v : convective_term(e).values) CHECK(v == 0.0);

    // v = a e(1,0) = (0, a sqrt2 sin(2 pi x)): v1 = 0 and no y dependence
    auto s = unit_on(2, ModeIndex::vec0(1, 0), 1.7);
    for (double v : convective_term(s).values) CHECK(std::abs(v) < 1e-14);

    auto two = unit_on(2, ModeIndex::vec0(1, 0));
    two.coeffs[mode_position(two.mode_set, ModeIndex::vec0(0, 1))] = 1.0;
    double biggest = 0.0;
    for (double v : convective_term(two).values) biggest = std::max(biggest, std::abs(v));
    CHECK(biggest > 0.1);
}

TEST_CASE("nonlinearity linear part", "[nonlinearity]") {
    NonlinearityParams lin{0.0, 2.5, 0.6};
    auto v = random_field(3, 42);
    auto f = nonlinearity(v, lin, 3);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(f.coeffs[i] == Approx(2.5 * v.coeffs[i]).margin(1e-13));

    NonlinearityParams conv{1.0, 0.0, 0.6};
    auto e = unit_on(2, ModeIndex::e001());
    for (double c : nonlinearity(e, conv, 2).coeffs) CHECK(std::abs(c) < 1e-14);
}

TEST_CASE("nonlinearity agrees with the dense quadrature oracle", "[nonlinearity]") {
    NonlinearityParams params{1.0, 0.0, 0.6};
    auto two = unit_on(2, ModeIndex::vec0(1, 0));
    two.coeffs[mode_position(two.mode_set, ModeIndex::vec0(0, 1))] = 1.0;
    CHECK(max_coeff_diff(nonlinearity(two, params, 2), nonlinearity_oracle(two, params, 2)) <
          1e-10);

    for (int n : {2, 3, 4})
        for (std::uint64_t s = 0; s < 25; ++s) {
            auto v = random_field(n, 1000 * n + s);
            INFO("n=" << n << " seed=" << s);
            CHECK(max_coeff_diff(nonlinearity(v, params, n), nonlinearity_oracle(v, params, n)) <
                  1e-10);
        }

    // linear-part scaling of the oracle
    NonlinearityParams l1{0.0, 1.0, 0.6}, l2{0.0, 2.0, 0.6};
    auto v = random_field(3, 77);
    auto a = nonlinearity_oracle(v, l1, 3), b = nonlinearity_oracle(v, l2, 3);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(b.coeffs[i] == Approx(2.0 * a.coeffs[i]).margin(1e-13));

    SpectralField zero(build_mode_set(3));
    for (double c : nonlinearity_oracle(zero, params, 3).coeffs) CHECK(c == 0.0);
    CHECK_THROWS_AS(nonlinearity_oracle(random_field(7, 1), params, 7), std::invalid_argument);
}

TEST_CASE("quadratic part is bilinear", "[nonlinearity]") {
    NonlinearityParams params{1.0, 0.0, 0.6};
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto v = random_field(3, 300 + s);
        SpectralField scaled = v;
        for (double& c : scaled.coeffs) c *= 1.75;
        auto f = nonlinearity(v, params, 3);
        auto g = nonlinearity(scaled, params, 3);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(g.coeffs[i] == Approx(1.75 * 1.75 * f.coeffs[i]).margin(1e-11));
    }
}

TEST_CASE("energy orthogonality of the convection term", "[nonlinearity]") {
    NonlinearityParams params{1.0, 0.0, 0.6};
    SpectralParams sp;
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto v = random_field(4, 500 + s);
        auto fv = nonlinearity(v, params, 4);
        double inner = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) inner += v.coeffs[i] * fv.coeffs[i];
        CHECK(std::abs(inner) <=
              1e-10 * norm_hr(v, 0.0, sp) * norm_hr(fv, 0.0, sp) + 1e-14);
    }
}

TEST_CASE("lipschitz_constant", "[nonlinearity]") {
    SpectralParams sp{1.0, 0.0};
    NonlinearityParams only_c2{0.0, 1.0, 0.6};
    CHECK(lipschitz_constant(only_c2, sp, 1e-8) == Approx(1.0).epsilon(1e-12));

    NonlinearityParams zero{0.0, 0.0, 0.6};
    CHECK(lipschitz_constant(zero, sp, 1e-8) == 0.0);

    NonlinearityParams c1a{1.0, 0.0, 0.55}, c1b{1.0, 0.0, 0.7}, c1c{1.0, 0.0, 0.9};
    const double ta = lipschitz_constant(c1a, sp, 1e-8);
    const double tb = lipschitz_constant(c1b, sp, 1e-8);
    const double tc = lipschitz_constant(c1c, sp, 1e-8);
    CHECK(ta > tb);
    CHECK(tb > tc); // monotone decreasing in rho
    // against the analytic series evaluation
    CHECK(tb == Approx(4.0 * std::sqrt(eigenvalue_series(0.0, 1.4, sp, 1e-10))).epsilon(1e-12));
    CHECK_THROWS_AS(lipschitz_constant(c1a, sp, 0.0), std::invalid_argument);
}

TEST_CASE("lipschitz bound holds on random pairs", "[nonlinearity]") {
    SpectralParams sp{1.0, 0.0};
    NonlinearityParams params{1.0, 0.5, 0.6};
    const double theta = lipschitz_constant(params, sp, 1e-8);
    for (std::uint64_t s = 0; s < 60; ++s) {
        auto v = random_field(4, 2000 + s);
        auto w = random_field(4, 3000 + s);
        auto fv = nonlinearity(v, params, 4);
        auto fw = nonlinearity(w, params, 4);
        SpectralField dv = v;
        for (std::size_t i = 0; i < dv.size(); ++i) {
            dv.coeffs[i] -= w.coeffs[i];
            fv.coeffs[i] -= fw.coeffs[i];
        }
        const double lhs = norm_hr(fv, 0.0, sp);
        const double rhs = theta *
                           (1.0 + norm_hr(v, params.rho, sp) + norm_hr(w, params.rho, sp)) *
                           norm_hr(dv, params.rho, sp);
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("coercivity inequality on random pairs", "[nonlinearity]") {
    SpectralParams sp{1.0, 0.0};
    NonlinearityParams params{1.0, 0.3, 0.6};
    for (double eps : {0.25, 1.0}) {
        for (std::uint64_t s = 0; s < 50; ++s) {
            auto v = random_field(4, 4000 + s);
            auto w = random_field(4, 5000 + s, 0.5);
            auto sides = coercivity_sides(v, w, eps, params, sp, 64);
            INFO("eps=" << eps << " seed=" << s);
            CHECK(sides.lhs <= sides.rhs + 1e-9);
        }
    }
    // w = 0, c2 = 0: the convection term is energy orthogonal, lhs ~ 0
    NonlinearityParams pure{1.0, 0.0, 0.6};
    SpectralField zero(build_mode_set(4));
    auto v = random_field(4, 6000);
    auto sides = coercivity_sides(v, zero, 0.25, pure, sp, 64);
    CHECK(sides.lhs < 1e-10);
    // v = 0
    auto z = coercivity_sides(zero, v, 0.25, pure, sp, 64);
    CHECK(z.lhs == 0.0);
    CHECK(z.lhs <= z.rhs);
}

TEST_CASE("coercivity_coefficients", "[nonlinearity]") {
    SpectralField zero(build_mode_set(2));
    auto c = coercivity_coefficients(zero, 4.0, 64);
    CHECK(c.phi_value == Approx(4.0));
    CHECK(c.big_phi_value == Approx(4.0));

    auto w = unit_on(2, ModeIndex::e001(), 3.0); // constant field, sup = 3
    auto k = coercivity_coefficients(w, 4.0, 64);
    CHECK(k.phi_value == Approx(4.0 * (1.0 + 9.0)).epsilon(1e-12));
    CHECK(k.big_phi_value == Approx(4.0 * 81.0).epsilon(1e-12));

    // doubling w quadruples the quadratic term of phi
    SpectralField w2 = w;
    for (double& x : w2.coeffs) x *= 2.0;
    auto k2 = coercivity_coefficients(w2, 4.0, 64);
    CHECK(k2.phi_value - 4.0 == Approx(4.0 * (k.phi_value - 4.0)).epsilon(1e-12));
    CHECK_THROWS_AS(coercivity_coefficients(w, 0.5, 64), std::invalid_argument);
}

TEST_CASE("default_zeta", "[nonlinearity]") {
    CHECK(default_zeta({1.0, 0.0, 0.6}) == 4.0);
    CHECK(default_zeta({2.0, 0.0, 0.6}) == 8.0);
    CHECK(default_zeta({0.0, 10.0, 0.6}) == 15.0);
}
