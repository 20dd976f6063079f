// Canonical CSV/JSON serialization with atomic writes, shortest-round-trip
// float formatting, and digest-carrying run manifests.
#pragma once

#include "torusns/convergence.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace torusns::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Shortest decimal string that round-trips the exact double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw std::invalid_argument("parse_double: malformed number '" + std::string(s) + "'");
    return v;
}

// FNV-1a over the file bytes; integrity marker for manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string digest_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

// Write-temp-rename; a crashed run never leaves a truncated file under the
// final name.
inline void atomic_write(const fs::path& path, std::string_view content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        out.write(content.data(), std::streamsize(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("atomic_write: rename to " + path.string() + " failed: " +
                                     ec.message());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- SpectralField CSV: header `variant,k,l,coeff`, canonical order ------

inline std::string field_to_csv(const SpectralField& field) {
    if (!all_finite(field.coeffs))
        throw numeric_error("field_to_csv: non-finite coefficient");
    std::string out = "variant,k,l,coeff\n";
    const auto& modes = *field.mode_set.modes;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        out += variant_name(modes[i].variant);
        out += ',';
        out += std::to_string(modes[i].k);
        out += ',';
        out += std::to_string(modes[i].l);
        out += ',';
        out += format_double(field.coeffs[i]);
        out += '\n';
    }
    return out;
}

inline void write_field_csv(const SpectralField& field, const fs::path& path) {
    atomic_write(path, field_to_csv(field));
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            parts.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

inline Variant parse_variant(std::string_view s, int line_no) {
    if (s == "e001") return Variant::E001;
    if (s == "vec0") return Variant::Vec0;
    throw std::invalid_argument("row " + std::to_string(line_no) + ": unknown variant '" +
                                std::string(s) + "'");
}

} // namespace detail

inline SpectralField field_from_csv(std::string_view text) {
    std::vector<std::pair<ModeIndex, double>> rows;
    int line_no = 0;
    std::size_t start = 0;
    bool saw_header = false;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!saw_header) {
            if (line != "variant,k,l,coeff")
                throw std::invalid_argument("field CSV: bad header '" + std::string(line) + "'");
            saw_header = true;
            continue;
        }
        auto parts = detail::split(line, ',');
        if (parts.size() != 4)
            throw std::invalid_argument("row " + std::to_string(line_no) + ": expected 4 columns");
        ModeIndex mode;
        mode.variant = detail::parse_variant(parts[0], line_no);
        mode.k = int(std::stol(std::string(parts[1])));
        mode.l = int(std::stol(std::string(parts[2])));
        validate(mode);
        const double coeff = parse_double(parts[3]);
        if (!std::isfinite(coeff))
            throw std::invalid_argument("row " + std::to_string(line_no) +
                                        ": non-finite coefficient");
        rows.emplace_back(mode, coeff);
    }
    if (!saw_header) throw std::invalid_argument("field CSV: missing header");

    // smallest resolution whose mode set matches the rows exactly
    std::int64_t max_s = 0;
    for (const auto& [mode, c] : rows)
        max_s = std::max(max_s, std::int64_t(mode.k) * mode.k + std::int64_t(mode.l) * mode.l);
    int n = 1;
    while (std::int64_t(n) * n <= max_s) ++n;
    SpectralField field(build_mode_set(n));
    std::vector<bool> seen(field.size(), false);
    int row_no = 0;
    for (const auto& [mode, c] : rows) {
        ++row_no;
        const std::size_t pos = mode_position(field.mode_set, mode);
        if (pos == std::size_t(-1))
            throw std::invalid_argument("row " + std::to_string(row_no) + ": mode outside set");
        if (seen[pos])
            throw std::invalid_argument("row " + std::to_string(row_no) + ": duplicate mode");
        seen[pos] = true;
        field.coeffs[pos] = c;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw std::invalid_argument("field CSV: missing mode at canonical index " +
                                        std::to_string(i));
    return field;
}

inline SpectralField read_field_csv(const fs::path& path) {
    try {
        return field_from_csv(read_file(path));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

// --- OUPath CSV + JSON sidecar -------------------------------------------

inline void write_ou_path(const OUPath& path, const NoiseParams& params, const fs::path& csv_path,
                          const fs::path& sidecar_path) {
    std::string out = "mode_index,time,value\n";
    for (std::size_t i = 0; i < path.mode_set.size(); ++i)
        for (std::size_t k = 0; k < path.times.size(); ++k) {
            out += std::to_string(i);
            out += ',';
            out += format_double(path.times[k]);
            out += ',';
            out += format_double(path.at(i, k));
            out += '\n';
        }
    atomic_write(csv_path, out);

    json side;
    side["schema_version"] = kSchemaVersion;
    side["seed"] = params.seed;
    side["delta"] = params.delta;
    side["eta"] = params.eta;
    side["epsilon"] = params.spectral.epsilon_shift;
    side["kappa"] = params.spectral.kappa;
    side["n"] = path.mode_set.n;
    side["grid"] = path.times;
    atomic_write(sidecar_path, side.dump(2) + "\n");
}

// --- Trajectory CSV `time,variant,k,l,coeff` ------------------------------

inline std::string trajectory_to_csv(const Trajectory& traj, std::string_view provenance) {
    std::string out;
    if (!provenance.empty()) {
        out += "# ";
        out += provenance;
        out += '\n';
    }
    out += "time,variant,k,l,coeff\n";
    const auto& modes = *traj.mode_set.modes;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& state = traj.states[k];
        for (std::size_t i = 0; i < modes.size(); ++i) {
            out += format_double(traj.times[k]);
            out += ',';
            out += variant_name(modes[i].variant);
            out += ',';
            out += std::to_string(modes[i].k);
            out += ',';
            out += std::to_string(modes[i].l);
            out += ',';
            out += format_double(state.coeffs[i]);
            out += '\n';
        }
    }
    return out;
}

// --- StudyResult ------------------------------------------------------------

inline json study_result_to_json(const StudyResult& result) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["resolutions"] = json::array();
    for (const auto& r : result.resolutions) {
        json row;
        row["n"] = r.n;
        row["h"] = r.h;
        row["error"] = r.error;
        row["std_error"] = r.std_error;
        row["samples"] = r.samples;
        row["tail_energy"] = r.tail_energy;
        j["resolutions"].push_back(row);
    }
    if (result.rate_fitted) {
        j["rate"] = {{"slope", result.slope}, {"residual", result.residual}};
    } else {
        j["rate"] = nullptr;
        j["rate_note"] = "fit omitted: fewer than two positive error estimates";
    }
    return j;
}

inline std::string study_result_to_csv(const StudyResult& result, std::string_view provenance) {
    std::string out;
    if (!provenance.empty()) {
        out += "# ";
        out += provenance;
        out += '\n';
    }
    out += "n,h,error,stderr,samples\n";
    for (const auto& r : result.resolutions) {
        out += std::to_string(r.n);
        out += ',';
        out += format_double(r.h);
        out += ',';
        out += format_double(r.error);
        out += ',';
        out += format_double(r.std_error);
        out += ',';
        out += std::to_string(r.samples);
        out += '\n';
    }
    return out;
}

inline std::string noise_rows_to_csv(const std::vector<NoiseErrorRow>& rows,
                                     std::string_view provenance) {
    std::string out;
    if (!provenance.empty()) {
        out += "# ";
        out += provenance;
        out += '\n';
    }
    out += "n,closed_form,closed_form_coupled,mc_estimate,std_err\n";
    for (const auto& r : rows) {
        out += std::to_string(r.n);
        out += ',';
        out += format_double(r.closed_form);
        out += ',';
        out += format_double(r.closed_form_coupled);
        out += ',';
        out += format_double(r.mc_estimate);
        out += ',';
        out += format_double(r.std_err);
        out += '\n';
    }
    return out;
}

// --- RunManifest --------------------------------------------------------------

struct RunManifest {
    int schema_version = kSchemaVersion;
    std::string timestamp;
    json resolved_config;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> files; // name -> digest
};

inline std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void write_manifest(const RunManifest& manifest, const fs::path& dir) {
    json j;
    j["schema_version"] = manifest.schema_version;
    j["timestamp"] = manifest.timestamp;
    j["config"] = manifest.resolved_config;
    j["seed"] = manifest.seed;
    j["files"] = json::array();
    for (const auto& [name, digest] : manifest.files)
        j["files"].push_back({{"name", name}, {"digest", digest}});
    atomic_write(dir / "manifest.json", j.dump(2) + "\n");
}

// Emits a file into the output directory and records its digest.
inline void emit_file(RunManifest& manifest, const fs::path& dir, const std::string& name,
                      std::string_view content) {
    atomic_write(dir / name, content);
    manifest.files.emplace_back(name, digest_hex(content));
}

// Re-reads every file listed in a manifest and returns the names whose
// digests no longer match.
inline std::vector<std::string> verify_manifest(const fs::path& dir) {
    const json j = json::parse(read_file(dir / "manifest.json"));
    std::vector<std::string> mismatches;
    for (const auto& entry : j.at("files")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::string want = entry.at("digest").get<std::string>();
        std::string got;
        try {
            got = digest_hex(read_file(dir / name));
        } catch (const std::exception&) {
            mismatches.push_back(name + " (missing)");
            continue;
        }
        if (got != want) mismatches.push_back(name);
    }
    return mismatches;
}

} // namespace torusns::io
