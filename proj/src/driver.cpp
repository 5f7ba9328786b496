#include "ttiga/driver.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "ttiga/reference.hpp"
#include "ttiga/tt_io.hpp"

namespace ttiga {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double param_or(const std::map<std::string, double>& m, const std::string& key, double fallback) {
    const auto it = m.find(key);
    return it == m.end() ? fallback : it->second;
}

std::string triple(const std::array<int, 3>& a) {
    if (a[0] == a[1] && a[1] == a[2]) {
        return std::to_string(a[0]);
    }
    return fmt::format("{}x{}x{}", a[0], a[1], a[2]);
}

std::string num(double v) { return fmt::format("{:.10g}", v); }

// Sum over quadrature points of g(u, uh) * J * w, with u supplied slab by slab (fixed q3).
template <class SlabFn>
std::pair<double, double> error_integrals(const SlabFn& slab, const ScalarField& analytic, const GeometryPatch& patch,
                                          const Discretization& disc) {
    GridEvaluator grid(patch, disc.points);
    const auto q = disc.quad_sizes();
    double num_int = 0.0, den_int = 0.0;
    for (int k = 0; k < q[2]; ++k) {
        const Eigen::MatrixXd s = slab(k);
        const double wk = disc.weights[2][static_cast<std::size_t>(k)];
        for (int j = 0; j < q[1]; ++j) {
            const double wj = disc.weights[1][static_cast<std::size_t>(j)];
            for (int i = 0; i < q[0]; ++i) {
                const double w = disc.weights[0][static_cast<std::size_t>(i)] * wj * wk;
                const double jd = std::abs(grid.metric(i, j, k).det);
                const double exact = analytic(grid.point(i, j, k));
                num_int += w * jd * std::abs(s(i, j) - exact);
                den_int += w * jd * std::abs(exact);
            }
        }
    }
    return {num_int, den_int};
}

double error_ratio(std::pair<double, double> ints) {
    if (!(ints.second > 0.0)) {
        throw std::domain_error("relative error undefined: the analytic solution integrates to zero");
    }
    return ints.first / ints.second;
}

double dense_error(const Eigen::VectorXd& u, const ScalarField& analytic, const GeometryPatch& patch,
                   const Discretization& disc) {
    const auto n = disc.sizes();
    const Eigen::MatrixXd n1 = disc.dense_table(0), n2 = disc.dense_table(1), n3 = disc.dense_table(2);
    auto slab = [&](int k) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n[0], n[1]);
        for (int c = 0; c < n[2]; ++c) {
            const double s = n3(k, c);
            if (s != 0.0) {
                acc += s * Eigen::Map<const Eigen::MatrixXd>(u.data() + static_cast<Eigen::Index>(c) * n[0] * n[1],
                                                             n[0], n[1]);
            }
        }
        return Eigen::MatrixXd(n1 * acc * n2.transpose());
    };
    return error_ratio(error_integrals(slab, analytic, patch, disc));
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

nlohmann::json ranks_json(const std::vector<int>& r) { return r; }

} // namespace

double compression_ratio(const TtTensor& t) {
    return static_cast<double>(t.full_size()) / static_cast<double>(t.parameter_count());
}

double compression_ratio(const TtMatrix& t) {
    return static_cast<double>(t.full_size()) / static_cast<double>(t.parameter_count());
}

ScalarField make_source(const std::string& name) {
    using std::numbers::pi;
    if (name == "zero") {
        return {};
    }
    if (name == "one") {
        return [](const Vec3&) { return 1.0; };
    }
    if (name == "sin_xy") {
        return [](const Vec3& x) { return std::sin(pi * x(0)) * std::sin(pi * x(1)); };
    }
    if (name == "sin_xyz") {
        return [](const Vec3& x) { return 3.0 * pi * pi * std::sin(pi * x(0)) * std::sin(pi * x(1)) * std::sin(pi * x(2)); };
    }
    throw ConfigError(fmt::format("unknown source '{}' (expected zero, one, sin_xy, sin_xyz)", name));
}

ScalarField make_analytic(const std::string& name, const GeometryParams& geometry_params,
                          const std::map<std::string, double>& params) {
    using std::numbers::pi;
    if (name == "sin_xy") {
        return [](const Vec3& x) { return std::sin(pi * x(0)) * std::sin(pi * x(1)) / (2.0 * pi * pi); };
    }
    if (name == "sin_xyz") {
        return [](const Vec3& x) { return std::sin(pi * x(0)) * std::sin(pi * x(1)) * std::sin(pi * x(2)); };
    }
    if (name == "ring_log") {
        const double r_in = param_or(geometry_params, "r_in", 0.5), r_out = param_or(geometry_params, "r_out", 1.0);
        const double u_in = param_or(params, "u_in", 1.0), u_out = param_or(params, "u_out", 2.0);
        const double scale = (u_out - u_in) / std::log(r_out / r_in);
        return [=](const Vec3& x) { return u_in + scale * std::log(std::hypot(x(0), x(1)) / r_in); };
    }
    if (name == "linear_x") {
        return [](const Vec3& x) { return x(0); };
    }
    throw ConfigError(fmt::format("unknown analytic solution '{}' (expected sin_xy, sin_xyz, ring_log, linear_x)", name));
}

std::array<bool, 6> default_dirichlet_faces(GeometryKind kind) {
    switch (kind) {
    case GeometryKind::unit_cube: return {true, true, true, true, true, true};
    case GeometryKind::lshape: return {true, true, true, true, false, false};
    case GeometryKind::hyperboloid: return {false, false, false, false, true, true};
    case GeometryKind::ring:
    case GeometryKind::closed_hemisphere:
    case GeometryKind::opened_hemisphere:
    case GeometryKind::quarter_torus: return {true, true, false, false, false, false};
    }
    return {true, true, false, false, false, false};
}

BoundarySpec make_boundary(const SolveConfig& cfg, const ScalarField& analytic) {
    std::array<FaceSetting, 6> faces;
    if (cfg.boundary) {
        faces = *cfg.boundary;
    } else {
        const auto dflt = default_dirichlet_faces(cfg.geometry);
        for (std::size_t f = 0; f < 6; ++f) {
            faces[f].dirichlet = dflt[f];
            faces[f].analytic = dflt[f] && static_cast<bool>(analytic);
        }
    }
    BoundarySpec bc;
    for (std::size_t f = 0; f < 6; ++f) {
        const auto& s = faces[f];
        bc.faces[f].dirichlet = s.dirichlet;
        if (!s.dirichlet) {
            continue;
        }
        if (s.analytic) {
            if (!analytic) {
                throw ConfigError(fmt::format("face {} uses the analytic solution but none is configured",
                                              to_string(static_cast<Face>(f))));
            }
            bc.faces[f].value = analytic;
        } else if (s.value != 0.0) {
            const double v = s.value;
            bc.faces[f].value = [v](const Vec3&) { return v; };
        }
    }
    return bc;
}

double eval_solution(const TtTensor& u, const Discretization& disc, const Param3& xi) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Ones(1);
    for (int d = 0; d < 3; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const auto e = eval_bspline(disc.bases[du].knot_vector(), xi[du]);
        const Core3& g = u.core(d);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.dimension(0), g.dimension(2));
        for (std::size_t a = 0; a < e.values.size(); ++a) {
            const int i = e.first() + static_cast<int>(a);
            for (Eigen::Index r1 = 0; r1 < g.dimension(2); ++r1) {
                for (Eigen::Index r0 = 0; r0 < g.dimension(0); ++r0) {
                    m(r0, r1) += e.values[a] * g(r0, i, r1);
                }
            }
        }
        acc = acc * m;
    }
    return acc(0);
}

TtTensor solution_on_quadrature(const TtTensor& u, const Discretization& disc) {
    return mode_product(u, {disc.dense_table(0), disc.dense_table(1), disc.dense_table(2)});
}

double l2_error(const TtTensor& u, const ScalarField& analytic, const GeometryPatch& patch, const Discretization& disc) {
    const TtTensor uq = solution_on_quadrature(u, disc);
    const Core3& a = uq.core(0);
    const Core3& b = uq.core(1);
    const Core3& c = uq.core(2);
    const Eigen::Map<const Eigen::MatrixXd> amat(a.data(), a.dimension(1), a.dimension(2));
    auto slab = [&](int k) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(b.dimension(0), b.dimension(1));
        for (Eigen::Index r = 0; r < b.dimension(2); ++r) {
            const double s = c(r, k, 0);
            for (Eigen::Index j = 0; j < b.dimension(1); ++j) {
                for (Eigen::Index l = 0; l < b.dimension(0); ++l) {
                    w(l, j) += s * b(l, j, r);
                }
            }
        }
        return Eigen::MatrixXd(amat * w);
    };
    return error_ratio(error_integrals(slab, analytic, patch, disc));
}

void SolveConfig::validate() const {
    for (int d = 0; d < 3; ++d) {
        if (degree[static_cast<std::size_t>(d)] < 1 || degree[static_cast<std::size_t>(d)] > 10) {
            throw ConfigError("degree must be in [1, 10]");
        }
        if (elements[static_cast<std::size_t>(d)] < 1) {
            throw ConfigError("elements must be >= 1 per direction");
        }
    }
    for (const auto& [key, v] : {std::pair{"eps_cross", eps_cross}, std::pair{"eps_solve", eps_solve},
                                 std::pair{"eps_round", eps_round}}) {
        if (!(v > 0.0 && v < 1.0)) {
            throw ConfigError(fmt::format("{} must lie in (0, 1), got {}", key, v));
        }
    }
    if (rank_cap < 1) throw ConfigError("rank_cap must be >= 1");
    if (amen_max_sweeps < 1) throw ConfigError("amen.max_sweeps must be >= 1");
    if (amen_enrichment_rank < 0) throw ConfigError("amen.enrichment_rank must be >= 0");
    if (amen_local_direct_max < 0) throw ConfigError("amen.local_direct_max must be >= 0");
    if (amen_max_rank < 1) throw ConfigError("amen.max_rank must be >= 1");
    if (boundary) {
        if (std::none_of(boundary->begin(), boundary->end(), [](const FaceSetting& f) { return f.dirichlet; })) {
            throw ConfigError("boundary needs at least one Dirichlet face");
        }
    }
}

SolutionReport solve_poisson(const SolveConfig& cfg, const SolveOptions& opts) {
    cfg.validate();
    SolutionReport rep;
    rep.config = cfg;

    auto t0 = Clock::now();
    const GeometryPatch patch = make_geometry(cfg.geometry, cfg.geometry_params);
    const Discretization disc = make_discretization(patch, cfg.degree, cfg.elements);
    const ScalarField source = make_source(cfg.source);
    const ScalarField analytic = cfg.analytic ? make_analytic(*cfg.analytic, cfg.geometry_params, cfg.analytic_params)
                                              : ScalarField{};
    const BoundarySpec bc = make_boundary(cfg, analytic);
    rep.geometry_metadata = patch.metadata;
    rep.sizes = disc.sizes();
    rep.dofs = disc.dofs();
    rep.times.geometry = seconds_since(t0);

    AssemblyOptions aopts;
    aopts.eps_cross = cfg.eps_cross;
    aopts.eps_round = cfg.eps_round;
    aopts.rank_cap = cfg.rank_cap;
    aopts.seed = cfg.seed;

    // operator cache keyed by everything that determines K and f
    std::optional<std::filesystem::path> k_path, f_path, manifest_path;
    nlohmann::json key;
    if (opts.cache_dir) {
        key = {{"geometry", to_string(cfg.geometry)}, {"geometry_params", cfg.geometry_params},
               {"degree", cfg.degree}, {"elements", cfg.elements}, {"eps_cross", cfg.eps_cross},
               {"eps_round", cfg.eps_round}, {"rank_cap", cfg.rank_cap}, {"seed", cfg.seed},
               {"source", cfg.source}};
        const std::string stem = fmt::format("{:016x}", fnv1a(key.dump()));
        std::filesystem::create_directories(*opts.cache_dir);
        k_path = *opts.cache_dir / (stem + ".K.ttc");
        f_path = *opts.cache_dir / (stem + ".f.ttc");
        manifest_path = *opts.cache_dir / (stem + ".json");
    }
    bool loaded = false;
    if (k_path && std::filesystem::exists(*k_path) && std::filesystem::exists(*f_path) &&
        std::filesystem::exists(*manifest_path)) {
        std::ifstream ms(*manifest_path);
        const auto manifest = nlohmann::json::parse(ms, nullptr, false);
        if (!manifest.is_discarded() && manifest.value("key", nlohmann::json()) == key) {
            t0 = Clock::now();
            rep.k = std::get<TtMatrix>(load_tt(*k_path));
            rep.f = std::get<TtTensor>(load_tt(*f_path));
            rep.times.stiffness = seconds_since(t0);
            loaded = true;
            rep.from_cache = true;
        }
    }
    if (!loaded) {
        t0 = Clock::now();
        rep.k = assemble_stiffness(patch, disc, aopts, &rep.cross);
        rep.times.stiffness = seconds_since(t0);
        t0 = Clock::now();
        CrossLog flog;
        rep.f = assemble_load(patch, disc, source, aopts, &flog);
        if (!flog.what.empty()) {
            rep.cross.push_back(flog);
        }
        rep.times.load = seconds_since(t0);
        if (k_path) {
            save_tt(*k_path, rep.k);
            save_tt(*f_path, rep.f);
            const nlohmann::json manifest = {{"key", key}, {"ranks_K", rep.k.ranks()}, {"ranks_f", rep.f.ranks()}};
            write_atomic(*manifest_path, manifest.dump(2) + "\n");
        }
    }
    rep.cross_warning = std::any_of(rep.cross.begin(), rep.cross.end(), [](const CrossLog& l) { return l.warning; });

    t0 = Clock::now();
    const TtTensor lift = dirichlet_lift(patch, disc, bc, 1e-2 * cfg.eps_round);
    const AssembledSystem sys = apply_dirichlet(rep.k, rep.f, lift, bc, disc, cfg.eps_round);
    rep.times.dirichlet = seconds_since(t0);

    t0 = Clock::now();
    AmenOptions am;
    am.eps = cfg.eps_solve;
    am.max_sweeps = cfg.amen_max_sweeps;
    am.enrichment_rank = cfg.amen_enrichment_rank;
    am.local_direct_max = cfg.amen_local_direct_max;
    am.max_rank = cfg.amen_max_rank;
    am.seed = cfg.seed;
    const AmenResult sol = amen_solve(sys.k, sys.f, am);
    rep.times.solve = seconds_since(t0);
    rep.residual = sol.residual;
    rep.sweeps = sol.sweeps;
    rep.converged = sol.converged;

    const auto& n = rep.sizes;
    const TtTensor padded =
        pad(sol.x, {sys.interior[0].begin, sys.interior[1].begin, sys.interior[2].begin}, {n[0], n[1], n[2]});
    rep.u = norm(lift) > 0.0 ? round(add(lift, padded), 1e-2 * cfg.eps_round) : padded;

    rep.cr_k = compression_ratio(rep.k);
    rep.cr_f = compression_ratio(rep.f);
    rep.cr_u = compression_ratio(rep.u);

    if (analytic) {
        const auto q = disc.quad_sizes();
        const long long points = static_cast<long long>(q[0]) * q[1] * q[2];
        if (points <= kMaxErrorPoints) {
            t0 = Clock::now();
            rep.l2_error = l2_error(rep.u, analytic, patch, disc);
            rep.times.error = seconds_since(t0);
        } else {
            rep.l2_note = fmt::format("skipped: {} quadrature points exceed {}", points, kMaxErrorPoints);
        }
    }

    if (cfg.reference) {
        t0 = Clock::now();
        try {
            const ReferenceSystem ref = reference_assemble(patch, disc, source, bc);
            const ReferenceSolution rs = reference_solve(ref);
            rep.reference.time_s = seconds_since(t0);
            rep.reference.status = "ok";
            if (rep.dofs <= 4000) {
                const Eigen::MatrixXd kd = rep.k.full();
                const Eigen::MatrixXd kr(ref.k);
                rep.reference.k_error = (kd - kr).norm() / kr.norm();
            } else {
                // action on a random rank-one probe
                std::mt19937_64 rng(cfg.seed + 17);
                const TtTensor probe = TtTensor::random({n[0], n[1], n[2]}, {1, 1}, rng);
                const Eigen::VectorXd pd = probe.full();
                const Eigen::VectorXd yr = ref.k * pd;
                rep.reference.k_error = (matvec(rep.k, probe).full() - yr).norm() / yr.norm();
            }
            const double fn = ref.f.norm();
            rep.reference.f_error = fn > 0 ? (rep.f.full() - ref.f).norm() / fn : rep.f.full().norm();
            const double un = rs.u.norm();
            rep.reference.u_error = un > 0 ? (rep.u.full() - rs.u).norm() / un : rep.u.full().norm();
            if (analytic) {
                rep.reference.l2_error = dense_error(rs.u, analytic, patch, disc);
            }
        } catch (const OracleRefusedError&) {
            rep.reference.status = "refused";
            rep.reference.time_s = seconds_since(t0);
        }
        rep.times.reference = rep.reference.time_s;
    }
    rep.peak_rss_kb = peak_rss_kb();
    return rep;
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("slope fit needs at least two matching points");
    }
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

long peak_rss_kb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return ru.ru_maxrss;
}

nlohmann::json report_to_json(const SolutionReport& r) {
    nlohmann::json j;
    j["config"] = config_to_json(r.config);
    j["sizes"] = r.sizes;
    j["dofs"] = r.dofs;
    j["l2_error"] = r.l2_error ? nlohmann::json(*r.l2_error) : nlohmann::json(nullptr);
    if (!r.l2_note.empty()) {
        j["l2_note"] = r.l2_note;
    }
    j["ranks"] = {{"K", ranks_json(r.k.ranks())}, {"f", ranks_json(r.f.ranks())}, {"u", ranks_json(r.u.ranks())}};
    j["compression_ratio"] = {{"K", r.cr_k}, {"f", r.cr_f}, {"u", r.cr_u}};
    j["solver"] = {{"residual", r.residual}, {"sweeps", r.sweeps}, {"converged", r.converged}};
    j["cross"] = nlohmann::json::array();
    for (const auto& c : r.cross) {
        j["cross"].push_back({{"what", c.what},
                              {"holdout_error", c.holdout_error},
                              {"rank", c.rank},
                              {"evaluations", c.evaluations},
                              {"warning", c.warning}});
    }
    j["cross_warning"] = r.cross_warning;
    j["from_cache"] = r.from_cache;
    j["timings_s"] = {{"geometry", r.times.geometry},   {"stiffness", r.times.stiffness},
                      {"load", r.times.load},           {"dirichlet", r.times.dirichlet},
                      {"assemble", r.times.assemble()}, {"solve", r.times.solve},
                      {"error", r.times.error},         {"reference", r.times.reference}};
    j["peak_rss_kb"] = r.peak_rss_kb;
    nlohmann::json ref = {{"status", r.reference.status}};
    if (r.reference.status == "ok") {
        ref["k_error"] = r.reference.k_error;
        ref["f_error"] = r.reference.f_error;
        ref["u_error"] = r.reference.u_error;
        ref["time_s"] = r.reference.time_s;
        ref["l2_error"] = r.reference.l2_error ? nlohmann::json(*r.reference.l2_error) : nlohmann::json(nullptr);
    }
    j["reference"] = ref;
    j["geometry_metadata"] = r.geometry_metadata;
    return j;
}

std::string csv_header() {
    return "geometry,p,elems,dofs,l2_error,cr_K,cr_f,cr_u,t_assemble_s,t_solve_s,residual,status\n";
}

std::string csv_row(const SolutionReport& r, const std::string& status) {
    const std::string status_out = status == "ok" && !r.converged ? "not_converged" : status;
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(r.config.geometry), triple(r.config.degree),
                       triple(r.config.elements), r.dofs, r.l2_error ? num(*r.l2_error) : "", num(r.cr_k), num(r.cr_f),
                       num(r.cr_u), num(r.times.assemble()), num(r.times.solve), num(r.residual), status_out);
}

std::string csv_failure_row(const SolveConfig& cfg, const std::string& status) {
    return fmt::format("{},{},{},,,,,,,,,{}\n", to_string(cfg.geometry), triple(cfg.degree), triple(cfg.elements),
                       status);
}

std::string field_dump(const SolutionReport& r, int m) {
    if (m < 2) {
        throw std::invalid_argument("field dump needs at least 2 samples per direction");
    }
    const GeometryPatch patch = make_geometry(r.config.geometry, r.config.geometry_params);
    const Discretization disc = make_discretization(patch, r.config.degree, r.config.elements);
    std::ostringstream os;
    os << "# x y z u\n";
    for (int k = 0; k < m; ++k) {
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < m; ++i) {
                const Param3 xi{static_cast<double>(i) / (m - 1), static_cast<double>(j) / (m - 1),
                                static_cast<double>(k) / (m - 1)};
                const Vec3 x = eval_point(patch, xi);
                os << fmt::format("{:.10g} {:.10g} {:.10g} {:.10g}\n", x(0), x(1), x(2), eval_solution(r.u, disc, xi));
            }
        }
    }
    return os.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = std::filesystem::path(fmt::format("{}.tmp{}", path.string(), ::getpid()));
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw std::runtime_error(fmt::format("cannot open {} for writing", tmp.string()));
        }
        os << content;
        if (!os) {
            throw std::runtime_error(fmt::format("failed writing {}", tmp.string()));
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ttiga
