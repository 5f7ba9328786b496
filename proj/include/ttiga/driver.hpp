#pragma once

// End-to-end Poisson solves: configuration, orchestration, error metrics and
// report serialization.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ttiga/assembly.hpp"
#include "ttiga/geometry.hpp"
#include "ttiga/tt.hpp"
#include "ttiga/tt_amen.hpp"

namespace ttiga {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Boundary value on one face: a constant or the analytic solution.
struct FaceSetting {
    bool dirichlet = false;
    bool analytic = false;
    double value = 0.0;
};

struct SolveConfig {
    std::string name;
    GeometryKind geometry = GeometryKind::unit_cube;
    GeometryParams geometry_params;
    std::array<int, 3> degree{2, 2, 2};
    std::array<int, 3> elements{4, 4, 4};
    double eps_cross = 1e-10;
    double eps_solve = 1e-8;
    double eps_round = 1e-10;
    int rank_cap = 64;
    std::string source = "zero";
    std::optional<std::string> analytic;
    std::map<std::string, double> analytic_params;
    /// Unset: the geometry's default Dirichlet faces with analytic (or zero) data.
    std::optional<std::array<FaceSetting, 6>> boundary;
    std::uint64_t seed = 0;
    /// Also run the full-grid oracle and compare.
    bool reference = false;
    int amen_max_sweeps = 50;
    int amen_enrichment_rank = 4;
    int amen_local_direct_max = 5000;
    int amen_max_rank = 512;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

struct PhaseTimes {
    double geometry = 0.0;
    double stiffness = 0.0;
    double load = 0.0;
    double dirichlet = 0.0;
    double solve = 0.0;
    double error = 0.0;
    double reference = 0.0;

    double assemble() const { return stiffness + load + dirichlet; }
};

struct ReferenceComparison {
    /// "ok", "refused" or "skipped".
    std::string status = "skipped";
    double k_error = 0.0;
    double f_error = 0.0;
    double u_error = 0.0;
    double time_s = 0.0;
    std::optional<double> l2_error;
};

struct SolutionReport {
    SolveConfig config;
    TtTensor u;
    /// Full (pre-boundary) stiffness and load.
    TtMatrix k;
    TtTensor f;
    std::array<int, 3> sizes{};
    long long dofs = 0;
    std::optional<double> l2_error;
    std::string l2_note;
    double cr_k = 0.0, cr_f = 0.0, cr_u = 0.0;
    double residual = 0.0;
    int sweeps = 0;
    bool converged = false;
    bool cross_warning = false;
    bool from_cache = false;
    std::vector<CrossLog> cross;
    PhaseTimes times;
    long peak_rss_kb = 0;
    ReferenceComparison reference;
    std::map<std::string, std::string> geometry_metadata;
};

/// Dense element count over TT parameter count.
double compression_ratio(const TtTensor& t);
/// Squared mode sizes over TT parameter count.
double compression_ratio(const TtMatrix& t);

using ScalarField = std::function<double(const Vec3&)>;

/// Named source term; throws ConfigError for unknown names.
ScalarField make_source(const std::string& name);
/// Named exact solution, parameterized by geometry and analytic parameters.
ScalarField make_analytic(const std::string& name, const GeometryParams& geometry_params,
                          const std::map<std::string, double>& params);

/// Faces carrying Dirichlet data by default for each solid.
std::array<bool, 6> default_dirichlet_faces(GeometryKind kind);

BoundarySpec make_boundary(const SolveConfig& cfg, const ScalarField& analytic);

/// Value of the spline field with TT coefficients u at a parametric point.
double eval_solution(const TtTensor& u, const Discretization& disc, const Param3& xi);

/// u on the quadrature grid as a TT tensor.
TtTensor solution_on_quadrature(const TtTensor& u, const Discretization& disc);

/// Relative error integral(|u - uh| J) / integral(|uh| J) on the quadrature grid,
/// where uh is the analytic solution.
double l2_error(const TtTensor& u, const ScalarField& analytic, const GeometryPatch& patch, const Discretization& disc);

/// Quadrature grids above this size skip the error integral.
inline constexpr long long kMaxErrorPoints = 40'000'000;

struct SolveOptions {
    std::optional<std::filesystem::path> cache_dir;
};

SolutionReport solve_poisson(const SolveConfig& cfg, const SolveOptions& opts = {});

/// Least-squares slope of log(y) against log(x).
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Peak resident set size of this process in KiB.
long peak_rss_kb();

nlohmann::json report_to_json(const SolutionReport& r);

/// Aggregate CSV columns.
std::string csv_header();
std::string csv_row(const SolutionReport& r, const std::string& status = "ok");
/// Row for a run that failed before producing a report.
std::string csv_failure_row(const SolveConfig& cfg, const std::string& status);

/// "x y z u" rows on an m^3 uniform parametric grid.
std::string field_dump(const SolutionReport& r, int m);

/// Writes via a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// "<geometry>_p<degree>_e<elements>".
std::string default_run_name(const SolveConfig& cfg);

/// Strict config parsing: unknown keys and invalid values throw ConfigError.
SolveConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SolveConfig& cfg);

struct ExperimentFile {
    std::string name = "experiment";
    std::vector<SolveConfig> runs;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    /// Element counts for the TT vs full-grid comparison (bench only).
    std::vector<int> crossover_elements;
    std::optional<SolveConfig> crossover_base;
};

/// Accepts either a single run object or {"runs": [...], ...}.
ExperimentFile experiment_from_json(const nlohmann::json& j);

} // namespace ttiga
