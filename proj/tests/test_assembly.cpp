#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "ttiga/assembly.hpp"
#include "ttiga/reference.hpp"

using namespace ttiga;

namespace {

const AssemblyOptions kTight{.eps_cross = 1e-10, .eps_round = 1e-10, .rank_cap = 64, .seed = 5};

BoundarySpec all_dirichlet() {
    BoundarySpec bc;
    for (auto& f : bc.faces) f.dirichlet = true;
    return bc;
}

} // namespace

TEST_CASE("Gauss-Legendre rules integrate polynomials exactly") {
    const auto [x2, w2] = gauss_legendre(2);
    CHECK(x2[0] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(w2[0] == doctest::Approx(1.0));
    for (int n = 1; n <= 8; ++n) {
        const auto [x, w] = gauss_legendre(n);
        for (int deg = 0; deg <= 2 * n - 1; ++deg) {
            double s = 0;
            for (int q = 0; q < n; ++q) s += w[static_cast<std::size_t>(q)] * std::pow(x[static_cast<std::size_t>(q)], deg);
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            CHECK(s == doctest::Approx(exact).epsilon(1e-14).scale(1.0));
        }
    }
}

TEST_CASE("single trilinear element reproduces the analytic element matrix") {
    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {1, 1, 1}, {1, 1, 1});
    const Eigen::MatrixXd k = assemble_stiffness(cube, disc, kTight).full();
    const Eigen::MatrixXd want = oracle::trilinear_stiffness();
    CHECK(oracle::rel(k, want) < 1e-12);
    // vertex pairs by Hamming distance: same, edge, face diagonal, body diagonal
    const double pattern[4] = {1.0 / 3, 0.0, -1.0 / 12, -1.0 / 12};
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            const int dist = __builtin_popcount(static_cast<unsigned>(a ^ b));
            CHECK(k(a, b) == doctest::Approx(pattern[dist]).epsilon(1e-12).scale(1.0));
        }
}

TEST_CASE("unit-cube load of a constant source") {
    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {1, 1, 1}, {1, 1, 1});
    const Eigen::VectorXd f = assemble_load(cube, disc, [](const Vec3&) { return 1.0; }, kTight).full();
    for (Eigen::Index i = 0; i < f.size(); ++i) CHECK(f(i) == doctest::Approx(0.125).epsilon(1e-14));
    const auto zero = assemble_load(cube, disc, {}, kTight);
    CHECK(zero.full().norm() == 0.0);
}

TEST_CASE("unit-cube stiffness is a low-rank Kronecker sum") {
    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {2, 2, 2}, {6, 6, 6});
    std::vector<CrossLog> logs;
    const auto k = assemble_stiffness(cube, disc, kTight, &logs);
    CHECK(k.max_rank() <= 4);
    for (const auto& l : logs) CHECK(l.rank == 1);
}

TEST_CASE("stiffness properties on curved solids") {
    for (auto kind : {GeometryKind::ring, GeometryKind::quarter_torus, GeometryKind::lshape}) {
        INFO(to_string(kind));
        const auto g = make_geometry(kind);
        const auto disc = make_discretization(g, {2, 2, 2}, {3, 3, 3});
        const auto ktt = assemble_stiffness(g, disc, kTight);
        const Eigen::MatrixXd k = ktt.full();
        CHECK((k - k.transpose()).norm() <= 1e-12 * k.norm());
        // constants lie in the kernel before boundary conditions
        CHECK((k * Eigen::VectorXd::Ones(k.cols())).norm() <= 1e-10 * k.norm());

        auto bc = all_dirichlet();
        const auto lift = dirichlet_lift(g, disc, bc, 1e-12);
        const auto sys = apply_dirichlet(ktt, TtTensor::zeros({k.rows() > 0 ? disc.sizes()[0] : 0, disc.sizes()[1], disc.sizes()[2]}),
                                         lift, bc, disc, 1e-12);
        const Eigen::MatrixXd kint = sys.k.full();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (kint + kint.transpose()));
        CHECK(es.eigenvalues().minCoeff() > 0);
    }
}

TEST_CASE("TT assembly matches the element-loop reference") {
    for (auto kind : {GeometryKind::ring, GeometryKind::opened_hemisphere, GeometryKind::hyperboloid}) {
        INFO(to_string(kind));
        const auto g = make_geometry(kind);
        const auto disc = make_discretization(g, {2, 2, 2}, {3, 3, 3});
        const SourceFn src = [](const Vec3& x) { return std::sin(x.x()) + x.y() * x.z(); };
        BoundarySpec bc;
        bc.face(Face::xi1_min) = {true, [](const Vec3& x) { return 1.0 + x.z(); }};
        bc.face(Face::xi1_max) = {true, {}};
        const auto ref = reference_assemble(g, disc, src, bc);
        const auto k = assemble_stiffness(g, disc, kTight);
        const auto f = assemble_load(g, disc, src, kTight);
        const auto lift = dirichlet_lift(g, disc, bc, 1e-13);
        const Eigen::MatrixXd kd(ref.k);
        CHECK(oracle::rel(k.full(), kd) < 1e-8);
        CHECK(oracle::rel(f.full(), ref.f) < 1e-8);
        CHECK(oracle::rel(lift.full(), ref.lift) < 1e-12);

        const auto sys = apply_dirichlet(k, f, lift, bc, disc, 1e-13);
        const Eigen::MatrixXd kint(ref.k_int);
        CHECK(oracle::rel(sys.k.full(), kint) < 1e-8);
        CHECK(oracle::rel(sys.f.full(), ref.f_int) < 1e-8);
    }
}

TEST_CASE("interior ranges and boundary errors") {
    BoundarySpec bc;
    bc.face(Face::xi1_min).dirichlet = true;
    bc.face(Face::xi3_max).dirichlet = true;
    const auto r = bc.interior({5, 6, 7});
    CHECK(r[0].begin == 1);
    CHECK(r[0].count == 4);
    CHECK(r[1].count == 6);
    CHECK(r[2].begin == 0);
    CHECK(r[2].count == 6);
    CHECK(bc.any_dirichlet());

    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {1, 1, 1}, {2, 2, 2});
    const auto k = assemble_stiffness(cube, disc, kTight);
    const auto f = TtTensor::zeros({3, 3, 3});
    CHECK_THROWS_AS(apply_dirichlet(k, f, f, BoundarySpec{}, disc, 1e-12), SingularSystemError);
    CHECK(parse_face("xi2_max") == Face::xi2_max);
    CHECK_THROWS(parse_face("top"));
}

TEST_CASE("reference solver refuses oversized problems") {
    const auto cube = make_geometry(GeometryKind::unit_cube);
    const auto disc = make_discretization(cube, {1, 1, 1}, {10, 10, 10});
    CHECK_THROWS_AS(reference_assemble(cube, disc, {}, all_dirichlet(), 1000), OracleRefusedError);
}
