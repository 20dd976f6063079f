// torusns: spectral simulation and verification lab for the stochastic
// Navier-Stokes scheme on the unit torus.
//
// Commands: simulate, converge, noise-error, verify.  Exit codes: 0 success,
// 2 configuration violation, 3 numerical failure, 4 verification failure.

#include "torusns/config.hpp"
#include "torusns/verification.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace torusns;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;
    std::optional<int> samples;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON configuration file");
    cmd->add_option("--seed", flags.seed, "master seed (overrides the config)");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--threads", flags.threads, "worker thread cap (0 = hardware)");
    cmd->add_option("--samples", flags.samples, "Monte Carlo sample count");
}

RunConfig resolve(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = load_config_file(flags.config_path);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out_dir = *flags.out;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.samples) {
        cfg.samples = *flags.samples;
        cfg.noise_samples = *flags.samples;
    }
    return cfg;
}

io::RunManifest make_manifest(const RunConfig& cfg) {
    io::RunManifest m;
    m.timestamp = io::now_iso8601();
    m.resolved_config = config_to_json(cfg);
    m.seed = cfg.seed;
    return m;
}

int cmd_simulate(const RunConfig& cfg) {
    const SchemeParams params = scheme_params(cfg);
    const auto grid = make_time_grid(params.T, params.h);
    const auto path = simulate_ou(build_mode_set(params.n), grid, params.noise, 0,
                                  cfg.threads ? cfg.threads : 1);
    const Trajectory traj = run_trajectory(params, path);

    fs::create_directories(cfg.out_dir);
    io::RunManifest manifest = make_manifest(cfg);
    io::emit_file(manifest, cfg.out_dir, "trajectory.csv",
                  io::trajectory_to_csv(traj, provenance_line(cfg)));

    json meta;
    meta["schema_version"] = io::kSchemaVersion;
    meta["config"] = config_to_json(cfg);
    meta["seed"] = cfg.seed;
    meta["indicator_log"] = traj.indicator_log;
    io::emit_file(manifest, cfg.out_dir, "trajectory_meta.json", meta.dump(2) + "\n");
    io::write_manifest(manifest, cfg.out_dir);

    const auto& final_state = traj.states.back();
    const SpectralParams sp = params.noise.spectral;
    std::printf("final time %s: ||X||_H = %.6e, ||X||_{H_%g} = %.6e\n",
                io::format_double(traj.times.back()).c_str(), norm_hr(final_state, 0.0, sp),
                params.rho_bar, norm_hr(final_state, params.rho_bar, sp));
    std::printf("wrote %s/trajectory.csv\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_converge(const RunConfig& cfg) {
    const StudyConfig study = study_config(cfg);
    const StudyResult result = strong_error_mc(study);

    fs::create_directories(cfg.out_dir);
    io::RunManifest manifest = make_manifest(cfg);
    json j = io::study_result_to_json(result);
    j["config"] = config_to_json(cfg);
    j["seed"] = cfg.seed;
    io::emit_file(manifest, cfg.out_dir, "study.json", j.dump(2) + "\n");
    io::emit_file(manifest, cfg.out_dir, "study.csv",
                  io::study_result_to_csv(result, provenance_line(cfg)));
    io::write_manifest(manifest, cfg.out_dir);

    for (const auto& r : result.resolutions)
        std::printf("n=%2d h=%-10s error=%.6e +- %.2e (samples %d, tail %.3e)\n", r.n,
                    io::format_double(r.h).c_str(), r.error, r.std_error, r.samples,
                    r.tail_energy);
    if (result.rate_fitted)
        std::printf("fitted log-log slope %.3f (residual %.3f)\n", result.slope, result.residual);
    else
        std::printf("rate fit omitted (noted in study.json)\n");
    return 0;
}

int cmd_noise_error(const RunConfig& cfg) {
    const NoiseStudyConfig study = noise_study_config(cfg);
    const auto rows = noise_error_study(cfg.noise_resolutions, cfg.noise_time, study);

    fs::create_directories(cfg.out_dir);
    io::RunManifest manifest = make_manifest(cfg);
    io::emit_file(manifest, cfg.out_dir, "noise_error.csv",
                  io::noise_rows_to_csv(rows, provenance_line(cfg)));
    json j;
    j["schema_version"] = io::kSchemaVersion;
    j["config"] = config_to_json(cfg);
    j["seed"] = cfg.seed;
    j["rows"] = json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"n", r.n},
                             {"closed_form", r.closed_form},
                             {"closed_form_coupled", r.closed_form_coupled},
                             {"mc_estimate", r.mc_estimate},
                             {"std_err", r.std_err}});
    io::emit_file(manifest, cfg.out_dir, "noise_error.json", j.dump(2) + "\n");
    io::write_manifest(manifest, cfg.out_dir);

    bool all_within = true;
    std::printf("%4s %14s %14s %14s %12s\n", "n", "closed", "coupled", "mc", "stderr");
    for (const auto& r : rows) {
        const bool within = std::abs(r.mc_estimate - r.closed_form_coupled) <= 4.0 * r.std_err;
        all_within = all_within && within;
        std::printf("%4d %14.6e %14.6e %14.6e %12.4e %s\n", r.n, r.closed_form,
                    r.closed_form_coupled, r.mc_estimate, r.std_err,
                    within ? "ok" : "OUTSIDE 4 SE");
    }
    return all_within ? 0 : 4;
}

int cmd_verify(const RunConfig& cfg, const std::string& check_dir) {
    if (!check_dir.empty()) {
        const auto mismatches = io::verify_manifest(check_dir);
        if (mismatches.empty()) {
            std::printf("manifest ok: all digests match\n");
            return 0;
        }
        for (const auto& name : mismatches)
            std::printf("digest mismatch: %s\n", name.c_str());
        return 4;
    }
    verification::VerifyOptions opt;
    opt.seed = cfg.seed;
    const auto results = verification::run_all(opt);
    bool all = true;
    for (const auto& r : results) {
        std::printf("%-36s %s  margin %+.3e  %s\n", r.id.c_str(), r.pass ? "PASS" : "FAIL",
                    r.margin, r.detail.c_str());
        all = all && r.pass;
    }
    return all ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral stochastic Navier-Stokes simulation and verification lab"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string check_dir;
    auto* simulate = app.add_subcommand("simulate", "run one trajectory and write it out");
    auto* converge = app.add_subcommand("converge", "coupled Monte Carlo strong-error study");
    auto* noise_error =
        app.add_subcommand("noise-error", "noise truncation error: closed form vs Monte Carlo");
    auto* verify = app.add_subcommand("verify", "run the property-check sweep");
    for (auto* cmd : {simulate, converge, noise_error, verify}) add_common(cmd, flags);
    verify->add_option("--check", check_dir, "verify output-directory digests instead");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve(flags);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (converge->parsed()) return cmd_converge(cfg);
        if (noise_error->parsed()) return cmd_noise_error(cfg);
        if (verify->parsed()) return cmd_verify(cfg, check_dir);
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
