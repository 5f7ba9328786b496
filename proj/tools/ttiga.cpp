// ttiga: command-line front end for TT-format IGA Poisson solves.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ttiga/driver.hpp"
#include "ttiga/schema.hpp"
#include "ttiga/tt_io.hpp"

namespace {

using namespace ttiga;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct RunFlags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    int field_samples = 0;
    std::optional<double> eps_cross;
    std::optional<double> eps_solve;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "experiment or run config (JSON)")->required();
    cmd->add_option("--out", f.out, "output directory (default: file's 'out' or ./out)");
    cmd->add_option("--seed", f.seed, "random seed for cross and solver");
    cmd->add_option("--jobs", f.jobs, "concurrent runs")->check(CLI::PositiveNumber);
    cmd->add_option("--field-samples", f.field_samples, "write an m^3 field dump per run (0 = off)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--eps-cross", f.eps_cross, "cross tolerance");
    cmd->add_option("--eps-solve", f.eps_solve, "solver residual tolerance");
}

ExperimentFile load_experiment(const RunFlags& flags) {
    std::ifstream is(flags.config);
    if (!is) {
        throw ConfigError(fmt::format("cannot read config '{}'", flags.config));
    }
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("{}: invalid JSON: {}", flags.config, e.what()));
    }
    ExperimentFile exp = experiment_from_json(j);
    auto apply = [&](SolveConfig& c) {
        if (flags.seed) c.seed = *flags.seed;
        if (flags.eps_cross) c.eps_cross = *flags.eps_cross;
        if (flags.eps_solve) c.eps_solve = *flags.eps_solve;
        c.validate();
    };
    for (auto& c : exp.runs) apply(c);
    if (exp.crossover_base) apply(*exp.crossover_base);
    // unique names become file names
    std::set<std::string> seen;
    for (std::size_t i = 0; i < exp.runs.size(); ++i) {
        auto& name = exp.runs[i].name;
        if (!seen.insert(name).second) {
            name = fmt::format("{}_{}", name, i);
            seen.insert(name);
        }
    }
    return exp;
}

std::filesystem::path out_dir(const RunFlags& flags, const ExperimentFile& exp) {
    if (!flags.out.empty()) return flags.out;
    if (exp.out) return *exp.out;
    return "out";
}

SolveOptions solve_options() {
    SolveOptions o;
    if (const char* dir = std::getenv("TTIGA_CACHE_DIR"); dir != nullptr && *dir != '\0') {
        o.cache_dir = std::filesystem::path(dir);
    }
    return o;
}

struct RunOutcome {
    std::optional<SolutionReport> report;
    std::string status = "ok";
    std::string error;
};

// Runs every config with up to `jobs` threads; per-run files are written as runs finish.
std::vector<RunOutcome> run_all(const std::vector<SolveConfig>& cfgs, int jobs, const std::filesystem::path& dir,
                                int field_samples) {
    std::vector<RunOutcome> out(cfgs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    const SolveOptions sopts = solve_options();
    auto worker = [&]() {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) {
            const auto& cfg = cfgs[i];
            auto& o = out[i];
            try {
                o.report = solve_poisson(cfg, sopts);
                if (!o.report->converged) o.status = "not_converged";
                write_atomic(dir / (cfg.name + ".json"), report_to_json(*o.report).dump(2) + "\n");
                if (field_samples > 0) {
                    write_atomic(dir / (cfg.name + ".field.txt"), field_dump(*o.report, field_samples));
                }
            } catch (const std::exception& e) {
                o.status = "failed";
                o.error = e.what();
            }
            std::lock_guard lock(log_mutex);
            if (o.report) {
                std::cerr << fmt::format("[{}] dofs={} l2={} residual={:.3g} status={}\n", cfg.name, o.report->dofs,
                                         o.report->l2_error ? fmt::format("{:.4g}", *o.report->l2_error) : "n/a",
                                         o.report->residual, o.status);
            } else {
                std::cerr << fmt::format("[{}] failed: {}\n", cfg.name, o.error);
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cfgs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

std::string aggregate_csv(const std::vector<SolveConfig>& cfgs, const std::vector<RunOutcome>& outcomes) {
    std::string csv = csv_header();
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        csv += outcomes[i].report ? csv_row(*outcomes[i].report, outcomes[i].status)
                                  : csv_failure_row(cfgs[i], outcomes[i].status);
    }
    return csv;
}

int cmd_solve(const RunFlags& flags) {
    const ExperimentFile exp = load_experiment(flags);
    if (exp.runs.empty()) {
        throw ConfigError("solve needs at least one run");
    }
    const auto dir = out_dir(flags, exp);
    std::filesystem::create_directories(dir);
    const auto outcomes = run_all(exp.runs, flags.jobs, dir, flags.field_samples);
    write_atomic(dir / (exp.name + ".csv"), aggregate_csv(exp.runs, outcomes));
    bool failed = false, unconverged = false;
    for (const auto& o : outcomes) {
        failed |= o.status == "failed";
        unconverged |= o.status == "not_converged";
    }
    if (failed) return kExitError;
    return unconverged ? kExitNotConverged : kExitOk;
}

int cmd_bench(const RunFlags& flags) {
    const ExperimentFile exp = load_experiment(flags);
    const auto dir = out_dir(flags, exp);
    std::filesystem::create_directories(dir);
    const auto outcomes = run_all(exp.runs, flags.jobs, dir, flags.field_samples);
    write_atomic(dir / (exp.name + ".csv"), aggregate_csv(exp.runs, outcomes));
    int ok = 0, bad = 0;
    for (const auto& o : outcomes) {
        (o.status == "ok" ? ok : bad) += 1;
    }

    // TT vs full-grid comparison over a mesh ladder
    json cross = json::object();
    if (exp.crossover_base) {
        std::string csv = std::string(kCrossoverHeader) + "\n";
        long long largest = 0;
        double ratio = 0.0;
        std::vector<long long> refused;
        for (int e : exp.crossover_elements) {
            SolveConfig c = *exp.crossover_base;
            c.elements = {e, e, e};
            c.reference = true;
            c.name = default_run_name(c);
            try {
                const auto r = solve_poisson(c, solve_options());
                const double t_tt = r.times.assemble() + r.times.solve;
                const bool ran = r.reference.status == "ok";
                const double tr = ran ? r.reference.time_s / t_tt : 0.0;
                csv += fmt::format("{},{},{:.6g},{},{},{},{}\n", e, r.dofs, t_tt,
                                   ran ? fmt::format("{:.6g}", r.reference.time_s) : "", r.reference.status,
                                   ran ? fmt::format("{:.6g}", r.reference.u_error) : "",
                                   ran ? fmt::format("{:.6g}", tr) : "");
                if (ran && r.dofs > largest) {
                    largest = r.dofs;
                    ratio = tr;
                }
                if (!ran) refused.push_back(r.dofs);
                std::cerr << fmt::format("[crossover e={}] dofs={} t_tt={:.3g}s reference={}\n", e, r.dofs, t_tt,
                                         r.reference.status);
                ++ok;
            } catch (const std::exception& ex) {
                csv += fmt::format("{},,,,failed,,\n", e);
                std::cerr << fmt::format("[crossover e={}] failed: {}\n", e, ex.what());
                ++bad;
            }
        }
        write_atomic(dir / (exp.name + "_crossover.csv"), csv);
        cross = {{"largest_reference_dofs", largest},
                 {"time_ratio_reference_over_tt", ratio},
                 {"refused_dofs", refused}};
    }
    const json summary = {{"name", exp.name}, {"runs_ok", ok}, {"runs_failed", bad}, {"crossover", cross}};
    write_atomic(dir / (exp.name + "_summary.json"), summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return ok > 0 ? kExitOk : kExitError;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(std::stod(item));
    }
    return out;
}

struct DumpFlags {
    std::string what;
    std::string knots = "0,0,0,0.25,0.25,0.5,0.5,0.75,0.75,1,1,1";
    std::string weights = "1,0.7071067811865476,1,0.7071067811865476,1,0.7071067811865476,1,0.7071067811865476,1";
    int degree = 2;
    int samples = 201;
    bool derivative = false;
    std::string geometry = "ring";
    std::vector<std::string> params;
    std::string file;
    std::string output;
};

int cmd_dump(const DumpFlags& f) {
    std::string text;
    if (f.what == "basis") {
        const KnotVector kv(parse_list(f.knots), f.degree);
        const Basis1D basis(kv, f.weights.empty() ? std::vector<double>{} : parse_list(f.weights));
        if (f.samples < 2) throw ConfigError("--samples must be >= 2");
        std::vector<double> xs;
        for (int i = 0; i < f.samples; ++i) xs.push_back(static_cast<double>(i) / (f.samples - 1));
        const Eigen::MatrixXd t = tabulate(basis, xs, f.derivative);
        text = "xi";
        for (int i = 0; i < basis.size(); ++i) text += fmt::format(",{}{}", f.derivative ? "dR" : "R", i);
        text += "\n";
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            text += fmt::format("{:.10g}", xs[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < t.cols(); ++c) text += fmt::format(",{:.12g}", t(r, c));
            text += "\n";
        }
    } else if (f.what == "geometry") {
        GeometryParams params;
        for (const auto& p : f.params) {
            const auto eq = p.find('=');
            if (eq == std::string::npos) throw ConfigError(fmt::format("--param expects key=value, got '{}'", p));
            params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
        }
        text = patch_to_json(make_geometry(parse_geometry_kind(f.geometry), params)).dump(2) + "\n";
    } else if (f.what == "tt-info") {
        if (f.file.empty()) throw ConfigError("tt-info needs --file");
        const TtObject obj = load_tt(f.file);
        json j;
        std::visit(
            [&](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                j["kind"] = std::is_same_v<T, TtMatrix> ? "matrix" : "tensor";
                j["d"] = t.dim();
                j["ranks"] = t.ranks();
                j["parameter_count"] = t.parameter_count();
                j["compression_ratio"] = compression_ratio(t);
                if constexpr (std::is_same_v<T, TtMatrix>) {
                    j["row_modes"] = t.row_modes();
                    j["col_modes"] = t.col_modes();
                } else {
                    j["modes"] = t.modes();
                }
            },
            obj);
        text = j.dump(2) + "\n";
    } else {
        std::cerr << fmt::format("error: unknown dump target '{}' (expected basis, geometry, tt-info)\n", f.what);
        return kExitError;
    }
    if (f.output.empty()) {
        std::cout << text;
    } else {
        write_atomic(f.output, text);
    }
    return kExitOk;
}

int cmd_check(const std::vector<std::string>& files) {
    int rc = kExitOk;
    for (const auto& file : files) {
        const auto errs = check_artifact(file);
        if (errs.empty()) {
            std::cout << fmt::format("ok {} ({})\n", file, to_string(detect_artifact(file)));
        } else {
            rc = kExitError;
            for (const auto& e : errs) std::cout << fmt::format("invalid {}: {}\n", file, e);
        }
    }
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TT-format isogeometric Poisson solver"};
    app.require_subcommand(1);

    RunFlags solve_flags, bench_flags;
    auto* solve = app.add_subcommand("solve", "run the solves listed in a config file");
    add_run_flags(solve, solve_flags);
    auto* bench = app.add_subcommand("bench", "geometry ladder plus TT vs full-grid comparison");
    add_run_flags(bench, bench_flags);

    DumpFlags dump_flags;
    auto* dump = app.add_subcommand("dump", "basis tables, geometry patches, TT container summaries");
    dump->add_option("what", dump_flags.what, "basis | geometry | tt-info")->required();
    dump->add_option("--knots", dump_flags.knots, "comma-separated knot vector");
    dump->add_option("--weights", dump_flags.weights, "comma-separated weights (empty for B-splines)");
    dump->add_option("--degree", dump_flags.degree, "basis degree");
    dump->add_option("--samples", dump_flags.samples, "uniform samples on [0,1]");
    dump->add_flag("--derivative", dump_flags.derivative, "tabulate first derivatives");
    dump->add_option("--geometry", dump_flags.geometry, "geometry name");
    dump->add_option("--param", dump_flags.params, "geometry parameter key=value (repeatable)");
    dump->add_option("--file", dump_flags.file, "TT container for tt-info");
    dump->add_option("--output", dump_flags.output, "write to a file instead of stdout");

    std::vector<std::string> check_files;
    auto* check = app.add_subcommand("check", "validate emitted artifacts against their schemas");
    check->add_option("files", check_files, "files to check")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitError;
    }

    try {
        if (*solve) return cmd_solve(solve_flags);
        if (*bench) return cmd_bench(bench_flags);
        if (*dump) return cmd_dump(dump_flags);
        if (*check) return cmd_check(check_files);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
