#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ttiga/driver.hpp"
#include "ttiga/schema.hpp"
#include "ttiga/tt_io.hpp"

using namespace ttiga;
using nlohmann::json;

namespace {

SolveConfig cube_config() {
    SolveConfig c;
    c.name = "cube";
    c.geometry = GeometryKind::unit_cube;
    c.degree = {2, 2, 2};
    c.elements = {4, 4, 4};
    c.source = "sin_xyz";
    c.analytic = "sin_xyz";
    return c;
}

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("ttiga_driver_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("compression ratio counts dense entries over TT parameters") {
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(10);
    CHECK(compression_ratio(TtTensor::rank_one({v, v, v})) == doctest::Approx(1000.0 / 30.0));
    CHECK(compression_ratio(TtMatrix::identity({10, 10, 10})) == doctest::Approx(1e6 / 300.0));
}

TEST_CASE("error integral of the interpolant of an exactly representable field") {
    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {1, 1, 1}, {3, 3, 3});
    const auto exact = make_analytic("linear_x", {}, {});
    // nodal coefficients of u = x are the Greville abscissae of direction 1
    const auto g = greville(disc.bases[0].knot_vector());
    Eigen::VectorXd gx(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) gx(static_cast<Eigen::Index>(i)) = g[i];
    const auto u = TtTensor::rank_one({gx, Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4)});
    CHECK(l2_error(u, exact, cube, disc) < 1e-14);
    CHECK(l2_error(scale(u, 2.0), exact, cube, disc) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(eval_solution(u, disc, {0.3, 0.8, 0.1}) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("fitted slope recovers power laws") {
    CHECK(fitted_slope({4, 8, 16, 32}, {1.0, 0.25, 0.0625, 0.015625}) == doctest::Approx(-2.0));
    CHECK(fitted_slope({2, 3, 5}, {8, 27, 125}) == doctest::Approx(3.0));
}

TEST_CASE("cube solve converges and is deterministic") {
    const auto cfg = cube_config();
    const auto a = solve_poisson(cfg);
    const auto b = solve_poisson(cfg);
    CHECK(a.converged);
    CHECK(a.residual <= cfg.eps_solve);
    REQUIRE(a.l2_error.has_value());
    CHECK(*a.l2_error < 1e-2);
    CHECK((a.u.full() - b.u.full()).norm() == 0.0);
    CHECK(a.dofs == 216);

    auto finer = cfg;
    finer.elements = {8, 8, 8};
    const auto c = solve_poisson(finer);
    REQUIRE(c.l2_error.has_value());
    CHECK(*c.l2_error < *a.l2_error / 4);
}

TEST_CASE("reference comparison on a small ring") {
    SolveConfig c;
    c.geometry = GeometryKind::ring;
    c.degree = {2, 2, 2};
    c.elements = {4, 4, 4};
    c.analytic = "ring_log";
    c.reference = true;
    const auto r = solve_poisson(c);
    CHECK(r.reference.status == "ok");
    CHECK(r.reference.k_error < 1e-7);
    CHECK(r.reference.f_error < 1e-7);
    CHECK(r.reference.u_error < 1e-6);
}

TEST_CASE("config parsing is strict") {
    const json good = {{"geometry", "ring"}, {"degree", 2}, {"elements", {4, 4, 6}}, {"boundary", {{"xi1_min", 1.0}, {"xi1_max", "analytic"}}}};
    const auto c = config_from_json(good);
    CHECK(c.elements == std::array<int, 3>{4, 4, 6});
    CHECK(c.name == "ring_p2_e4x4x6");
    REQUIRE(c.boundary.has_value());
    CHECK((*c.boundary)[0].value == 1.0);
    CHECK((*c.boundary)[1].analytic);
    CHECK_FALSE((*c.boundary)[2].dirichlet);
    // round trip
    CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

    const auto bad = [&](json j) { CHECK_THROWS_AS(config_from_json(j), ConfigError); };
    bad({{"geometry", "ring"}, {"eps_solve", 0}});
    bad({{"geometry", "ring"}, {"colour", "red"}});
    bad({{"geometry", "ring"}, {"degree", "two"}});
    bad({{"geometry", "ring"}, {"elements", 0}});
    bad({{"geometry", "ring"}, {"source", "magic"}});
    bad({{"geometry", "blob"}});
    bad({{"degree", 2}});
    bad({{"geometry", "ring"}, {"boundary", {{"xi1_min", "sticky"}}}});
    bad({{"geometry", "ring"}, {"amen", {{"sweeps", 3}}}});

    const auto e = experiment_from_json({{"name", "x"}, {"seed", 9}, {"runs", {good, good}}});
    CHECK(e.runs.size() == 2);
    CHECK(e.runs[1].seed == 9);
    CHECK_THROWS_AS(experiment_from_json({{"name", "x"}, {"runs", json::array()}}), ConfigError);
}

TEST_CASE("default boundary faces per geometry") {
    const auto all = default_dirichlet_faces(GeometryKind::unit_cube);
    CHECK(std::all_of(all.begin(), all.end(), [](bool b) { return b; }));
    const auto ring = default_dirichlet_faces(GeometryKind::ring);
    CHECK(ring == std::array<bool, 6>{true, true, false, false, false, false});
    const auto l = default_dirichlet_faces(GeometryKind::lshape);
    CHECK(l == std::array<bool, 6>{true, true, true, true, false, false});
}

TEST_CASE("artifacts written by the driver pass the schema check") {
    const auto dir = scratch("artifacts");
    auto cfg = cube_config();
    cfg.elements = {3, 3, 3};
    const auto r = solve_poisson(cfg, {.cache_dir = dir / "cache"});
    write_atomic(dir / "cube.json", report_to_json(r).dump(2));
    write_atomic(dir / "cube.csv", csv_header() + csv_row(r));
    write_atomic(dir / "cube.field.txt", field_dump(r, 3));
    save_tt(dir / "u.ttc", r.u);
    for (const auto* f : {"cube.json", "cube.csv", "cube.field.txt", "u.ttc"}) {
        INFO(f);
        CHECK(check_artifact(dir / f).empty());
    }
    CHECK(detect_artifact(dir / "cube.json") == ArtifactKind::report);
    CHECK(detect_artifact(dir / "cube.csv") == ArtifactKind::csv);

    const auto j = report_to_json(r);
    for (const auto* key : {"/l2_error", "/compression_ratio/K", "/compression_ratio/f", "/compression_ratio/u",
                            "/solver/residual", "/solver/sweeps", "/solver/converged", "/dofs", "/timings_s/solve"}) {
        INFO(key);
        CHECK(j.contains(json::json_pointer(key)));
    }
    CHECK(csv_header().rfind("geometry,p,elems,dofs,l2_error,cr_K,cr_f,cr_u,t_assemble_s,t_solve_s,residual", 0) == 0);
    // field dump: header plus m^3 rows
    std::ifstream in(dir / "cube.field.txt");
    int lines = 0;
    for (std::string s; std::getline(in, s);) ++lines;
    CHECK(lines == 1 + 27);

    // a cached re-run reproduces the operators
    const auto again = solve_poisson(cfg, {.cache_dir = dir / "cache"});
    CHECK(again.from_cache);
    CHECK((again.u.full() - r.u.full()).norm() <= 1e-12 * r.u.full().norm());

    std::ofstream(dir / "broken.json") << "{\"geometry\": 3";
    CHECK_FALSE(check_artifact(dir / "broken.json").empty());
    std::filesystem::remove_all(dir);
}
