// Monte Carlo strong-error estimation against a fine coupled reference,
// log-log rate fitting, and closed-form-versus-MC noise truncation studies.
// Samples are independent work units; every aggregation runs in a fixed
// order, so results are identical for any thread count.
#pragma once

#include "torusns/scheme.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

namespace torusns {

// Nested step rule: h(n) = T / 4^(ceil(log2 n) + 1); h quarters every time n
// doubles, and every coarse grid is a subset of any finer one.
inline double nested_step(double T, int n) {
    if (n < 1) throw std::invalid_argument("nested_step: n must satisfy n >= 1");
    int level = 0;
    while ((1 << level) < n) ++level; // ceil(log2 n)
    double h = T;
    for (int j = 0; j <= level; ++j) h /= 4.0;
    return h;
}

struct StudyConfig {
    std::vector<int> resolutions{4, 8, 16};
    int reference_n = 32;
    int samples = 64;
    double p = 2.0;
    std::uint64_t base_seed = 0;
    SchemeParams params; // n and h are overridden per resolution
    unsigned threads = 0; // 0 = hardware concurrency
};

inline void validate(const StudyConfig& c) {
    if (c.resolutions.empty())
        throw std::invalid_argument("StudyConfig: resolutions must be non-empty");
    for (std::size_t i = 1; i < c.resolutions.size(); ++i)
        if (!(c.resolutions[i] > c.resolutions[i - 1]))
            throw std::invalid_argument("StudyConfig: resolutions must be strictly increasing");
    if (c.resolutions.front() < 1)
        throw std::invalid_argument("StudyConfig: resolutions must be positive");
    if (!(c.reference_n >= c.resolutions.back()))
        throw std::invalid_argument(
            "StudyConfig: reference_n must contain every study resolution");
    if (c.reference_n > 64)
        throw std::invalid_argument("StudyConfig: reference_n must satisfy reference_n <= 64");
    if (c.samples < 1) throw std::invalid_argument("StudyConfig: samples must satisfy samples >= 1");
    if (!(c.p >= 1.0)) throw std::invalid_argument("StudyConfig: p must satisfy p >= 1");
    SchemeParams probe = c.params;
    probe.n = c.reference_n;
    probe.h = nested_step(probe.T, c.reference_n);
    validate(probe);
}

struct ResolutionResult {
    int n = 0;
    double h = 0.0;
    double error = 0.0;     // (mean sup-error^p)^(1/p)
    double std_error = 0.0; // delta-method standard error on the same scale
    int samples = 0;
    double tail_energy = 0.0; // mean sup_t || (Id - P_n) X_ref(t) ||_H
};

struct StudyResult {
    std::vector<ResolutionResult> resolutions;
    bool rate_fitted = false;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares slope of log(error) against log(x); residual is the RMS
// deviation of the fit.
inline std::pair<double, double> fit_rate(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2) throw std::invalid_argument("fit_rate: need at least 2 points");
    for (const auto& [x, e] : pairs)
        if (!(x > 0.0) || !(e > 0.0))
            throw std::invalid_argument("fit_rate: values must be positive");
    const double n = double(pairs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [x, e] : pairs) {
        const double lx = std::log(x), ly = std::log(e);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (const auto& [x, e] : pairs) {
        const double r = std::log(e) - (intercept + slope * std::log(x));
        rss += r * r;
    }
    return {slope, std::sqrt(rss / n)};
}

namespace detail {

// Runs work(sample) for sample = 0..count-1 across a pool; outputs must be
// written to per-sample slots so the schedule cannot matter.
inline void parallel_samples(int count, unsigned threads, const std::function<void(int)>& work) {
    unsigned k = threads ? threads : std::thread::hardware_concurrency();
    if (k <= 1 || count <= 1) {
        for (int s = 0; s < count; ++s) work(s);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            const int s = next.fetch_add(1);
            if (s >= count) return;
            work(s);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<unsigned>(k, unsigned(count)); ++t)
        pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// Index of each coarse-set mode inside the fine canonical order.
inline std::vector<std::size_t> subset_positions(const ModeSet& fine, const ModeSet& coarse) {
    std::vector<std::size_t> pos(coarse.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        while (!((*fine.modes)[j] == coarse[i])) ++j;
        pos[i] = j++;
    }
    return pos;
}

} // namespace detail

// Coupled two-level strong error: one reference path and trajectory per
// sample, restrictions of the same realization for every coarse run, and
// the sup over coarse grid times of the common-mode H-difference.  The
// reference's extra-mode energy is reported separately per resolution.
inline StudyResult strong_error_mc(const StudyConfig& config) {
    validate(config);
    const double T = config.params.T;
    const int ref_n = config.reference_n;
    const double h_ref = nested_step(T, ref_n);
    const std::vector<double> fine_times = make_time_grid(T, h_ref);
    const ModeSet ref_set = build_mode_set(ref_n);

    SchemeParams ref_params = config.params;
    ref_params.n = ref_n;
    ref_params.h = h_ref;
    ref_params.noise.seed = config.base_seed;

    struct Level {
        int n;
        double h;
        std::size_t stride;
        std::vector<double> times;
        ModeSet set;
        std::vector<std::size_t> positions; // into the reference mode set
        SchemeParams params;
    };
    std::vector<Level> levels;
    for (int n : config.resolutions) {
        Level lv;
        lv.n = n;
        lv.h = nested_step(T, n);
        const double ratio = lv.h / h_ref;
        lv.stride = std::size_t(std::llround(ratio));
        if (std::abs(ratio - double(lv.stride)) > 1e-9)
            throw std::invalid_argument("strong_error_mc: study grid is not nested in the reference");
        lv.times = make_time_grid(T, lv.h);
        lv.set = build_mode_set(n);
        lv.positions = detail::subset_positions(ref_set, lv.set);
        lv.params = config.params;
        lv.params.n = n;
        lv.params.h = lv.h;
        lv.params.noise.seed = config.base_seed;
        levels.push_back(std::move(lv));
    }

    const int S = config.samples;
    std::vector<std::vector<double>> sup_err(levels.size(), std::vector<double>(S, 0.0));
    std::vector<std::vector<double>> sup_tail(levels.size(), std::vector<double>(S, 0.0));

    auto run_sample = [&](int sample) {
        // stream the reference convolution and trajectory across the fine grid
        SchemeStepper ref_stepper(ref_params);
        const std::size_t count = ref_set.size();
        std::vector<double> lambdas(count), decay(count), sd(count);
        std::vector<NormalStream> streams(count);
        for (std::size_t i = 0; i < count; ++i) {
            lambdas[i] = eigenvalue(ref_set[i], ref_params.noise.spectral);
            const double rate = lambdas[i] + ref_params.noise.eta;
            decay[i] = std::exp(-rate * h_ref);
            sd[i] = std::pow(lambdas[i], -ref_params.noise.delta) *
                    std::sqrt(-std::expm1(-2.0 * rate * h_ref) / (2.0 * rate));
            streams[i] =
                NormalStream{derive_stream_key(config.base_seed, ref_set[i], std::uint64_t(sample))};
        }

        // recorded per level: coarse OU columns, projected reference states,
        // reference tail norms
        std::vector<std::vector<double>> rec_ou(levels.size()), rec_state(levels.size());
        std::vector<std::vector<double>> rec_tail(levels.size());
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const std::size_t nt = levels[l].times.size();
            rec_ou[l].assign(nt * levels[l].set.size(), 0.0);
            rec_state[l].assign(nt * levels[l].set.size(), 0.0);
            rec_tail[l].assign(nt, 0.0);
        }

        std::vector<double> ou0(count, 0.0), ou1(count, 0.0);
        std::vector<double> x = ref_stepper.initial_state();
        auto record = [&](std::size_t fine_idx, const std::vector<double>& ou,
                          const std::vector<double>& state) {
            for (std::size_t l = 0; l < levels.size(); ++l) {
                if (fine_idx % levels[l].stride != 0) continue;
                const std::size_t c = fine_idx / levels[l].stride;
                const std::size_t nl = levels[l].set.size();
                double tail = 0.0;
                {
                    // complement positions: everything not mapped below
                    std::size_t inside = 0;
                    for (std::size_t i = 0; i < count; ++i) {
                        if (inside < nl && levels[l].positions[inside] == i) {
                            rec_ou[l][c * nl + inside] = ou[i];
                            rec_state[l][c * nl + inside] = state[i];
                            ++inside;
                        } else {
                            tail += state[i] * state[i];
                        }
                    }
                }
                rec_tail[l][c] = std::sqrt(tail);
            }
        };

        record(0, ou0, x);
        for (std::size_t k = 0; k + 1 < fine_times.size(); ++k) {
            const double dt = fine_times[k + 1] - fine_times[k];
            if (std::abs(dt - h_ref) < 1e-15 * (1.0 + h_ref)) {
                for (std::size_t i = 0; i < count; ++i)
                    ou1[i] = decay[i] * ou0[i] + sd[i] * streams[i](k);
            } else {
                for (std::size_t i = 0; i < count; ++i)
                    ou1[i] = ou_step(ou0[i], lambdas[i], ref_params.noise, dt, streams[i](k));
            }
            ref_stepper.advance(x, ou0, ou1, fine_times[k], dt);
            std::swap(ou0, ou1);
            record(k + 1, ou0, x);
        }

        // coarse runs against the recorded coupled noise
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const Level& lv = levels[l];
            const std::size_t nl = lv.set.size();
            SchemeStepper stepper(lv.params);
            std::vector<double> xc = stepper.initial_state();
            double worst = 0.0, worst_tail = rec_tail[l][0];
            auto compare = [&](std::size_t c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < nl; ++i) {
                    const double d = rec_state[l][c * nl + i] - xc[i];
                    acc += d * d;
                }
                worst = std::max(worst, std::sqrt(acc));
                worst_tail = std::max(worst_tail, rec_tail[l][c]);
            };
            compare(0);
            for (std::size_t c = 0; c + 1 < lv.times.size(); ++c) {
                stepper.advance(xc, {&rec_ou[l][c * nl], nl}, {&rec_ou[l][(c + 1) * nl], nl},
                                lv.times[c], lv.times[c + 1] - lv.times[c]);
                compare(c + 1);
            }
            sup_err[l][sample] = worst;
            sup_tail[l][sample] = worst_tail;
        }
    };

    detail::parallel_samples(S, config.threads, run_sample);

    StudyResult result;
    for (std::size_t l = 0; l < levels.size(); ++l) {
        double mean_p = 0.0, mean_tail = 0.0;
        for (int s = 0; s < S; ++s) {
            mean_p += std::pow(sup_err[l][s], config.p);
            mean_tail += sup_tail[l][s];
        }
        mean_p /= S;
        mean_tail /= S;
        double var_p = 0.0;
        for (int s = 0; s < S; ++s) {
            const double d = std::pow(sup_err[l][s], config.p) - mean_p;
            var_p += d * d;
        }
        var_p = (S > 1) ? var_p / (S - 1) : 0.0;
        const double se_mean = std::sqrt(var_p / S);
        ResolutionResult r;
        r.n = levels[l].n;
        r.h = levels[l].h;
        r.samples = S;
        r.error = std::pow(mean_p, 1.0 / config.p);
        r.std_error = (mean_p > 0.0)
                          ? se_mean * std::pow(mean_p, 1.0 / config.p - 1.0) / config.p
                          : 0.0;
        r.tail_energy = mean_tail;
        result.resolutions.push_back(r);
    }

    if (result.resolutions.size() >= 2) {
        bool positive = true;
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : result.resolutions) {
            if (!(r.error > 0.0)) positive = false;
            pts.emplace_back(double(r.n), r.error);
        }
        if (positive) {
            auto [slope, residual] = fit_rate(pts);
            result.rate_fitted = true;
            result.slope = slope;
            result.residual = residual;
        }
    }
    return result;
}

struct NoiseErrorRow {
    int n = 0;
    double closed_form = 0.0;         // E || O_t - P_n O_t ||^2 over all modes
    double closed_form_coupled = 0.0; // reference-resolution surrogate of the same
    double mc_estimate = 0.0;
    double std_err = 0.0;
};

struct NoiseStudyConfig {
    int reference_n = 32;
    int samples = 1000;
    std::uint64_t base_seed = 0;
    double rho_bar = 0.75;
    NoiseParams noise;
    double tail_tol = 1e-9;
    unsigned threads = 0;
};

// Monte Carlo estimate of the coupled truncation error at a single time
// against the closed form.  The simulated difference P_ref O - P_n O has
// expectation trunc(n) - trunc(ref); that surrogate is what the agreement
// contract checks, and both closed forms are reported.
inline std::vector<NoiseErrorRow> noise_error_study(const std::vector<int>& n_list, double t,
                                                    const NoiseStudyConfig& config) {
    validate(config.noise);
    if (n_list.empty()) throw std::invalid_argument("noise_error_study: n_list must be non-empty");
    int max_n = 0;
    for (int n : n_list) {
        if (n < 1) throw std::invalid_argument("noise_error_study: resolutions must be positive");
        max_n = std::max(max_n, n);
    }
    if (config.reference_n < 4 * max_n)
        throw std::invalid_argument(
            "noise_error_study: reference_n must satisfy reference_n >= 4 max(n_list)");
    if (!(t > 0.0)) throw std::invalid_argument("noise_error_study: t must satisfy t > 0");

    const ModeSet ref_set = build_mode_set(config.reference_n);
    const std::size_t count = ref_set.size();
    std::vector<double> weight(count), sd(count);
    std::vector<std::int64_t> mode_s(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double lambda = eigenvalue(ref_set[i], config.noise.spectral);
        weight[i] = std::pow(config.noise.spectral.kappa + lambda, 2.0 * config.rho_bar);
        sd[i] = std::sqrt(ou_variance(lambda, t, config.noise));
        const auto& m = ref_set[i];
        mode_s[i] = (m.variant == Variant::E001)
                        ? -1 // always retained
                        : std::int64_t(m.k) * m.k + std::int64_t(m.l) * m.l;
    }

    const int S = config.samples;
    std::vector<std::vector<double>> per_sample(n_list.size(), std::vector<double>(S, 0.0));
    detail::parallel_samples(S, config.threads, [&](int sample) {
        std::vector<double> vals(count);
        for (std::size_t i = 0; i < count; ++i) {
            const NormalStream stream{
                derive_stream_key(config.base_seed, ref_set[i], std::uint64_t(sample))};
            vals[i] = sd[i] * stream(0);
        }
        for (std::size_t j = 0; j < n_list.size(); ++j) {
            const std::int64_t cut = std::int64_t(n_list[j]) * n_list[j];
            double acc = 0.0;
            for (std::size_t i = 0; i < count; ++i)
                if (mode_s[i] >= cut) acc += weight[i] * vals[i] * vals[i];
            per_sample[j][sample] = acc;
        }
    });

    std::vector<NoiseErrorRow> rows;
    const double trunc_ref =
        truncation_error_exact(config.reference_n, t, config.rho_bar, config.noise, config.tail_tol);
    for (std::size_t j = 0; j < n_list.size(); ++j) {
        double mean = 0.0;
        for (int s = 0; s < S; ++s) mean += per_sample[j][s];
        mean /= S;
        double var = 0.0;
        for (int s = 0; s < S; ++s) {
            const double d = per_sample[j][s] - mean;
            var += d * d;
        }
        var = (S > 1) ? var / (S - 1) : 0.0;
        NoiseErrorRow row;
        row.n = n_list[j];
        row.closed_form =
            truncation_error_exact(n_list[j], t, config.rho_bar, config.noise, config.tail_tol);
        row.closed_form_coupled = row.closed_form - trunc_ref;
        row.mc_estimate = mean;
        row.std_err = std::sqrt(var / S);
        rows.push_back(row);
    }
    return rows;
}

} // namespace torusns
