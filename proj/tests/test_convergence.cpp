#include <catch2/catch_amalgamated.hpp>

#include "torusns/convergence.hpp"

#include <cmath>

using namespace torusns;
using Catch::Approx;

namespace {

SchemeParams study_template() {
    SchemeParams p;
    p.T = 1.0;
    p.chi = 0.05;
    p.rho_bar = 0.75;
    p.gamma = 2.0;
    p.nonlin = {1.0, 0.0, 0.6};
    p.noise.delta = 1.0;
    SpectralField xi(build_mode_set(2));
    xi.coeffs[mode_position(xi.mode_set, ModeIndex::vec0(1, 0))] = 0.5;
    xi.coeffs[mode_position(xi.mode_set, ModeIndex::vec0(0, 1))] = 0.5;
    p.xi = xi;
    p.n = 2;
    p.h = nested_step(p.T, 2);
    return p;
}

} // namespace

TEST_CASE("nested step rule", "[convergence]") {
    CHECK(nested_step(1.0, 4) == Approx(1.0 / 64.0));
    CHECK(nested_step(1.0, 8) == Approx(1.0 / 256.0));
    CHECK(nested_step(1.0, 16) == Approx(1.0 / 1024.0));
    CHECK(nested_step(2.0, 4) == Approx(2.0 / 64.0));
    // coarse grids are strided subsets of finer ones
    CHECK(nested_step(1.0, 4) / nested_step(1.0, 16) == Approx(16.0));
}

TEST_CASE("fit_rate", "[convergence]") {
    std::vector<std::pair<double, double>> power;
    for (int n : {2, 4, 8, 16}) power.emplace_back(double(n), std::pow(double(n), -2.0));
    auto [slope, residual] = fit_rate(power);
    CHECK(slope == Approx(-2.0).margin(1e-12));
    CHECK(residual == Approx(0.0).margin(1e-12));

    std::vector<std::pair<double, double>> flat{{2.0, 0.7}, {4.0, 0.7}, {8.0, 0.7}};
    CHECK(fit_rate(flat).first == Approx(0.0).margin(1e-12));

    CHECK_THROWS_AS(fit_rate({{2.0, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(fit_rate({{2.0, 0.0}, {4.0, 0.1}}), std::invalid_argument);
}

TEST_CASE("noise error study agrees with the closed form", "[convergence]") {
    NoiseStudyConfig cfg;
    cfg.reference_n = 16;
    cfg.samples = 2000;
    cfg.base_seed = 7;
    cfg.rho_bar = 0.75;
    cfg.noise.delta = 1.0;
    auto rows = noise_error_study({2, 4}, 0.5, cfg);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        INFO("n=" << row.n << " mc=" << row.mc_estimate
                  << " coupled=" << row.closed_form_coupled << " se=" << row.std_err);
        CHECK(std::abs(row.mc_estimate - row.closed_form_coupled) <= 4.0 * row.std_err);
        CHECK(row.closed_form > row.closed_form_coupled);
    }
    CHECK(rows[1].closed_form < rows[0].closed_form);

    // closed form sits below the rate bound at eps = (delta - rho_bar)/2
    const double eps = (cfg.noise.delta - cfg.rho_bar) / 2.0;
    for (const auto& row : rows)
        CHECK(row.closed_form <= truncation_rate_bound(row.n, eps, 2.0, cfg.rho_bar, cfg.noise));

    CHECK_THROWS_AS(noise_error_study({8}, 0.5, cfg), std::invalid_argument); // 16 < 4*8
}

TEST_CASE("reference-resolution study has zero error", "[convergence]") {
    StudyConfig cfg;
    cfg.resolutions = {4};
    cfg.reference_n = 4;
    cfg.samples = 3;
    cfg.base_seed = 21;
    cfg.params = study_template();
    auto res = strong_error_mc(cfg);
    REQUIRE(res.resolutions.size() == 1);
    CHECK(res.resolutions[0].error == 0.0);
    CHECK(res.resolutions[0].std_error == 0.0);
    CHECK_FALSE(res.rate_fitted);
}

TEST_CASE("linear case: common-mode error vanishes, tail decreases", "[convergence]") {
    StudyConfig cfg;
    cfg.resolutions = {2, 4};
    cfg.reference_n = 8;
    cfg.samples = 4;
    cfg.base_seed = 9;
    cfg.params = study_template();
    cfg.params.nonlin.c1 = 0.0;
    cfg.params.nonlin.c2 = 0.0;
    cfg.params.xi = SpectralField(build_mode_set(1));
    auto res = strong_error_mc(cfg);
    // with no drift both levels reproduce the coupled convolution exactly,
    // so the whole discrepancy is the reported spatial tail
    for (const auto& r : res.resolutions) CHECK(r.error == 0.0);
    CHECK(res.resolutions[1].tail_energy < res.resolutions[0].tail_energy);
    CHECK(res.resolutions[0].tail_energy > 0.0);
}

TEST_CASE("study errors decrease and reproduce across thread counts", "[convergence]") {
    StudyConfig cfg;
    cfg.resolutions = {2, 4};
    cfg.reference_n = 8;
    cfg.samples = 6;
    cfg.base_seed = 2024;
    cfg.params = study_template();
    cfg.threads = 1;
    auto a = strong_error_mc(cfg);
    cfg.threads = 4;
    auto b = strong_error_mc(cfg);
    REQUIRE(a.resolutions.size() == b.resolutions.size());
    for (std::size_t i = 0; i < a.resolutions.size(); ++i) {
        CHECK(a.resolutions[i].error == b.resolutions[i].error); // bitwise
        CHECK(a.resolutions[i].std_error == b.resolutions[i].std_error);
        CHECK(a.resolutions[i].tail_energy == b.resolutions[i].tail_energy);
    }
    CHECK(a.resolutions[1].error < a.resolutions[0].error);
    CHECK(a.rate_fitted);
    CHECK(a.slope < 0.0);
}

TEST_CASE("doubling samples moves estimates by little", "[convergence]") {
    StudyConfig cfg;
    cfg.resolutions = {2};
    cfg.reference_n = 4;
    cfg.samples = 8;
    cfg.base_seed = 5;
    cfg.params = study_template();
    auto small = strong_error_mc(cfg);
    cfg.samples = 16;
    auto big = strong_error_mc(cfg);
    const auto& s = small.resolutions[0];
    const auto& b = big.resolutions[0];
    const double combined = std::hypot(s.std_error, b.std_error);
    CHECK(std::abs(s.error - b.error) <= 3.0 * combined);
}

TEST_CASE("study validation", "[convergence]") {
    StudyConfig cfg;
    cfg.params = study_template();
    cfg.resolutions = {4, 2};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.resolutions = {4, 8};
    cfg.reference_n = 6; // smaller than max resolution
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.reference_n = 128; // desk-scale guard
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.reference_n = 16;
    cfg.samples = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}
