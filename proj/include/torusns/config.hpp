// Flat, human-editable run configuration: one JSON document covering the
// scheme, noise, study, and output settings, re-validated on load with the
// violated inequality named in the error.
#pragma once

#include "torusns/convergence.hpp"
#include "torusns/io.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace torusns {

using nlohmann::json;

struct RunConfig {
    // resolution and stepping
    int n = 8;
    double h = 0.0; // 0 = derive from the nested rule
    double T = 1.0;
    // exponents
    double chi = 0.05;
    double rho = 0.6;
    double rho_bar = 0.75;
    double gamma = 2.0;
    double delta = 1.0;
    double eta = 0.0;
    // operator and nonlinearity coefficients
    double epsilon = 1.0;
    double kappa = 0.0;
    double c1 = 1.0;
    double c2 = 0.0;
    // initial condition: sparse mode list
    std::vector<std::tuple<std::string, int, int, double>> xi{
        {"vec0", 1, 0, 0.5}, {"vec0", 0, 1, 0.5}};
    // randomness
    std::uint64_t seed = 0;
    // convergence study
    std::vector<int> resolutions{4, 8, 16};
    int reference_n = 32;
    int samples = 64;
    double p = 2.0;
    // noise-error study
    std::vector<int> noise_resolutions{2, 4, 8};
    double noise_time = 1.0;
    int noise_reference_n = 32;
    int noise_samples = 1000;
    double tail_tol = 1e-9;
    // execution (not part of the simulation identity)
    std::string out_dir = "out";
    unsigned threads = 0;
    int verbosity = 1;
};

inline SpectralField config_xi(const RunConfig& c) {
    int n = 1;
    for (const auto& [variant, k, l, coeff] : c.xi) {
        (void)variant;
        (void)coeff;
        while (std::int64_t(n) * n <= std::int64_t(k) * k + std::int64_t(l) * l) ++n;
    }
    SpectralField xi(build_mode_set(n));
    for (const auto& [variant, k, l, coeff] : c.xi) {
        ModeIndex mode;
        if (variant == "e001")
            mode = ModeIndex::e001();
        else if (variant == "vec0")
            mode = ModeIndex::vec0(k, l);
        else
            throw std::invalid_argument("xi: unknown variant '" + variant + "'");
        xi.coeffs[mode_position(xi.mode_set, mode)] += coeff;
    }
    return xi;
}

inline double config_step(const RunConfig& c) { return c.h > 0.0 ? c.h : nested_step(c.T, c.n); }

inline SchemeParams scheme_params(const RunConfig& c) {
    SchemeParams p;
    p.n = c.n;
    p.h = config_step(c);
    p.T = c.T;
    p.chi = c.chi;
    p.rho_bar = c.rho_bar;
    p.gamma = c.gamma;
    p.nonlin = {c.c1, c.c2, c.rho};
    p.noise.delta = c.delta;
    p.noise.eta = c.eta;
    p.noise.seed = c.seed;
    p.noise.spectral = {c.epsilon, c.kappa};
    p.xi = config_xi(c);
    validate(p);
    return p;
}

inline StudyConfig study_config(const RunConfig& c) {
    StudyConfig s;
    s.resolutions = c.resolutions;
    s.reference_n = c.reference_n;
    s.samples = c.samples;
    s.p = c.p;
    s.base_seed = c.seed;
    s.params = scheme_params(c);
    s.threads = c.threads;
    validate(s);
    return s;
}

inline NoiseStudyConfig noise_study_config(const RunConfig& c) {
    NoiseStudyConfig s;
    s.reference_n = c.noise_reference_n;
    s.samples = c.noise_samples;
    s.base_seed = c.seed;
    s.rho_bar = c.rho_bar;
    s.noise.delta = c.delta;
    s.noise.eta = c.eta;
    s.noise.seed = c.seed;
    s.noise.spectral = {c.epsilon, c.kappa};
    s.tail_tol = c.tail_tol;
    s.threads = c.threads;
    return s;
}

// The resolved simulation identity: everything that determines outputs.
// Execution-only settings (threads, out_dir, verbosity) are excluded so
// reruns with different worker counts emit byte-identical results.
inline json config_to_json(const RunConfig& c, bool include_execution = false) {
    json j;
    j["n"] = c.n;
    j["h"] = config_step(c);
    j["T"] = c.T;
    j["chi"] = c.chi;
    j["rho"] = c.rho;
    j["rho_bar"] = c.rho_bar;
    j["gamma"] = c.gamma;
    j["delta"] = c.delta;
    j["eta"] = c.eta;
    j["epsilon"] = c.epsilon;
    j["kappa"] = c.kappa;
    j["c1"] = c.c1;
    j["c2"] = c.c2;
    j["seed"] = c.seed;
    j["xi"] = json::array();
    for (const auto& [variant, k, l, coeff] : c.xi)
        j["xi"].push_back({{"variant", variant}, {"k", k}, {"l", l}, {"coeff", coeff}});
    j["resolutions"] = c.resolutions;
    j["reference_n"] = c.reference_n;
    j["samples"] = c.samples;
    j["p"] = c.p;
    j["noise_resolutions"] = c.noise_resolutions;
    j["noise_time"] = c.noise_time;
    j["noise_reference_n"] = c.noise_reference_n;
    j["noise_samples"] = c.noise_samples;
    j["tail_tol"] = c.tail_tol;
    if (include_execution) {
        j["out_dir"] = c.out_dir;
        j["threads"] = c.threads;
        j["verbosity"] = c.verbosity;
    }
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    auto get = [&](const char* key, auto& slot) {
        if (j.contains(key)) slot = j.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("n", c.n);
    get("h", c.h);
    get("T", c.T);
    get("chi", c.chi);
    get("rho", c.rho);
    get("rho_bar", c.rho_bar);
    get("gamma", c.gamma);
    get("delta", c.delta);
    get("eta", c.eta);
    get("epsilon", c.epsilon);
    get("kappa", c.kappa);
    get("c1", c.c1);
    get("c2", c.c2);
    get("seed", c.seed);
    get("resolutions", c.resolutions);
    get("reference_n", c.reference_n);
    get("samples", c.samples);
    get("p", c.p);
    get("noise_resolutions", c.noise_resolutions);
    get("noise_time", c.noise_time);
    get("noise_reference_n", c.noise_reference_n);
    get("noise_samples", c.noise_samples);
    get("tail_tol", c.tail_tol);
    get("out_dir", c.out_dir);
    get("threads", c.threads);
    get("verbosity", c.verbosity);
    if (j.contains("xi")) {
        c.xi.clear();
        for (const auto& entry : j.at("xi"))
            c.xi.emplace_back(entry.at("variant").get<std::string>(), entry.at("k").get<int>(),
                              entry.at("l").get<int>(), entry.at("coeff").get<double>());
    }
    return c;
}

inline RunConfig load_config_file(const std::string& path) {
    return config_from_json(json::parse(io::read_file(path)));
}

// One-line provenance string embedded at the top of emitted CSV files.
inline std::string provenance_line(const RunConfig& c) {
    return "seed=" + std::to_string(c.seed) + " config=" + config_to_json(c).dump();
}

} // namespace torusns
