#include "ttiga/schema.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ttiga/driver.hpp"
#include "ttiga/tt_io.hpp"

namespace ttiga {

namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool is_number(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

void require(std::vector<std::string>& errs, const json& j, const std::string& key, json::value_t type,
             const std::string& where) {
    if (!j.contains(key)) {
        errs.push_back(fmt::format("{}: missing '{}'", where, key));
        return;
    }
    const auto t = j.at(key).type();
    const bool numeric = type == json::value_t::number_float &&
                         (t == json::value_t::number_integer || t == json::value_t::number_unsigned);
    const bool integral = type == json::value_t::number_integer && t == json::value_t::number_unsigned;
    if (t != type && !numeric && !integral) {
        errs.push_back(fmt::format("{}: '{}' has the wrong type", where, key));
    }
}

void check_report(const json& j, std::vector<std::string>& errs) {
    using vt = json::value_t;
    for (const auto& [k, t] : std::initializer_list<std::pair<const char*, vt>>{
             {"config", vt::object}, {"sizes", vt::array}, {"dofs", vt::number_integer}, {"ranks", vt::object},
             {"compression_ratio", vt::object}, {"solver", vt::object}, {"cross", vt::array},
             {"timings_s", vt::object}, {"reference", vt::object}, {"peak_rss_kb", vt::number_integer}}) {
        require(errs, j, k, t, "report");
    }
    if (!j.contains("l2_error") || !(j["l2_error"].is_null() || j["l2_error"].is_number())) {
        errs.emplace_back("report: 'l2_error' must be a number or null");
    }
    if (!errs.empty()) return;
    try {
        config_from_json(j["config"]);
    } catch (const std::exception& e) {
        errs.push_back(fmt::format("report.config: {}", e.what()));
    }
    const auto& sizes = j["sizes"];
    if (sizes.size() != 3) {
        errs.emplace_back("report: 'sizes' must have 3 entries");
    } else if (sizes[0].get<long long>() * sizes[1].get<long long>() * sizes[2].get<long long>() != j["dofs"].get<long long>()) {
        errs.emplace_back("report: dofs differs from the product of sizes");
    }
    for (const char* k : {"K", "f", "u"}) {
        require(errs, j["compression_ratio"], k, vt::number_float, "report.compression_ratio");
        require(errs, j["ranks"], k, vt::array, "report.ranks");
        if (j["compression_ratio"].contains(k) && j["compression_ratio"][k].is_number() &&
            !(j["compression_ratio"][k].get<double>() > 0.0)) {
            errs.push_back(fmt::format("report: compression ratio of {} must be positive", k));
        }
    }
    require(errs, j["solver"], "residual", vt::number_float, "report.solver");
    require(errs, j["solver"], "sweeps", vt::number_integer, "report.solver");
    require(errs, j["solver"], "converged", vt::boolean, "report.solver");
    require(errs, j["reference"], "status", vt::string, "report.reference");
}

void check_csv(const std::string& text, const std::string& header, std::vector<std::string>& errs) {
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != header) {
        errs.push_back(fmt::format("csv: header must be '{}'", header));
        return;
    }
    const auto cols = split(header, ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != cols.size()) {
            errs.push_back(fmt::format("csv line {}: {} fields, expected {}", i + 1, f.size(), cols.size()));
            continue;
        }
        for (std::size_t c = 0; c < f.size(); ++c) {
            const auto& name = cols[c];
            if (name == "geometry" || name == "status" || name == "reference_status" || name == "p" || name == "elems") {
                if (f[c].empty()) errs.push_back(fmt::format("csv line {}: empty '{}'", i + 1, name));
            } else if (!f[c].empty() && !is_number(f[c])) {
                errs.push_back(fmt::format("csv line {}: '{}' is not numeric", i + 1, name));
            }
        }
    }
}

void check_field(const std::string& text, std::vector<std::string>& errs) {
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != "# x y z u") {
        errs.emplace_back("field: first line must be '# x y z u'");
        return;
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ' ');
        if (f.size() != 4 || !std::all_of(f.begin(), f.end(), is_number)) {
            errs.push_back(fmt::format("field line {}: expected 4 numbers", i + 1));
            return;
        }
    }
}

} // namespace

std::string to_string(ArtifactKind kind) {
    switch (kind) {
    case ArtifactKind::report: return "report";
    case ArtifactKind::config: return "config";
    case ArtifactKind::csv: return "csv";
    case ArtifactKind::crossover_csv: return "crossover_csv";
    case ArtifactKind::field: return "field";
    case ArtifactKind::tt: return "tt";
    case ArtifactKind::bench_summary: return "bench_summary";
    case ArtifactKind::cache_manifest: return "cache_manifest";
    case ArtifactKind::unknown: break;
    }
    return "unknown";
}

ArtifactKind detect_artifact(const std::filesystem::path& path) {
    const auto ext = path.extension().string();
    if (ext == ".ttc") return ArtifactKind::tt;
    const std::string text = slurp(path);
    if (ext == ".csv") {
        return text.rfind(kCrossoverHeader, 0) == 0 ? ArtifactKind::crossover_csv : ArtifactKind::csv;
    }
    if (text.rfind("# x y z u", 0) == 0) return ArtifactKind::field;
    if (ext == ".json") {
        const auto j = json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object()) return ArtifactKind::unknown;
        if (j.contains("dofs") && j.contains("config")) return ArtifactKind::report;
        if (j.contains("crossover")) return ArtifactKind::bench_summary;
        if (j.contains("key") && j.contains("ranks_K")) return ArtifactKind::cache_manifest;
        return ArtifactKind::config;
    }
    return ArtifactKind::unknown;
}

std::vector<std::string> check_artifact(const std::filesystem::path& path) {
    std::vector<std::string> errs;
    if (!std::filesystem::is_regular_file(path)) {
        errs.push_back(fmt::format("{}: not a readable file", path.string()));
        return errs;
    }
    switch (detect_artifact(path)) {
    case ArtifactKind::tt:
        try {
            load_tt(path);
        } catch (const std::exception& e) {
            errs.emplace_back(e.what());
        }
        break;
    case ArtifactKind::csv:
        check_csv(slurp(path), std::string(csv_header().substr(0, csv_header().size() - 1)), errs);
        break;
    case ArtifactKind::crossover_csv: check_csv(slurp(path), kCrossoverHeader, errs); break;
    case ArtifactKind::field: check_field(slurp(path), errs); break;
    case ArtifactKind::report: check_report(json::parse(slurp(path)), errs); break;
    case ArtifactKind::bench_summary: {
        const auto j = json::parse(slurp(path));
        require(errs, j, "runs_ok", json::value_t::number_integer, "bench summary");
        require(errs, j, "runs_failed", json::value_t::number_integer, "bench summary");
        require(errs, j, "crossover", json::value_t::object, "bench summary");
        break;
    }
    case ArtifactKind::cache_manifest: {
        const auto j = json::parse(slurp(path));
        require(errs, j, "key", json::value_t::object, "cache manifest");
        require(errs, j, "ranks_K", json::value_t::array, "cache manifest");
        require(errs, j, "ranks_f", json::value_t::array, "cache manifest");
        break;
    }
    case ArtifactKind::config:
        try {
            experiment_from_json(json::parse(slurp(path)));
        } catch (const std::exception& e) {
            errs.emplace_back(e.what());
        }
        break;
    case ArtifactKind::unknown: errs.push_back(fmt::format("{}: unrecognized artifact", path.string())); break;
    }
    return errs;
}

} // namespace ttiga
