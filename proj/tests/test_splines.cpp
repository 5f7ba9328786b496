#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ttiga/splines.hpp"

using namespace ttiga;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

// Quarter circle: degree 2, weights 1, 1/sqrt2, 1, plus a second quarter.
Basis1D circle_basis() {
    const double w = std::sqrt(0.5);
    return Basis1D(KnotVector({0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2), {1, w, 1, w, 1});
}

Eigen::MatrixXd circle_controls() {
    Eigen::MatrixXd p(5, 2);
    p << 1, 0, 1, 1, 0, 1, -1, 1, -1, 0;
    return p;
}

std::vector<KnotVector> sample_knot_vectors() {
    return {KnotVector::uniform(1, 4), KnotVector::uniform(2, 5), KnotVector::uniform(3, 3),
            KnotVector({0, 0, 0, 0.3, 0.3, 0.7, 1, 1, 1}, 2), KnotVector({0, 0, 0, 0, 0.25, 0.5, 0.5, 1, 1, 1, 1}, 3)};
}

} // namespace

TEST_CASE("basis values agree with the Cox-de Boor recursion") {
    for (const auto& kv : sample_knot_vectors()) {
        const auto t = to_vec(kv.knots());
        for (int s = 0; s <= 50; ++s) {
            const double x = s / 50.0;
            const auto e = eval_bspline(kv, x);
            for (int i = 0; i < kv.size(); ++i) {
                const int local = i - e.first();
                const double got = local >= 0 && local < static_cast<int>(e.values.size())
                                       ? e.values[static_cast<std::size_t>(local)]
                                       : 0.0;
                CHECK(got == doctest::Approx(oracle::cox_de_boor(t, i, kv.degree(), x)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("partition of unity and derivative sum zero") {
    std::vector<Basis1D> bases;
    for (const auto& kv : sample_knot_vectors()) bases.emplace_back(kv);
    bases.push_back(circle_basis());
    for (const auto& b : bases) {
        for (int s = 0; s <= 64; ++s) {
            const auto e = eval_basis(b, s / 64.0);
            double sum = 0, dsum = 0;
            for (std::size_t a = 0; a < e.values.size(); ++a) {
                sum += e.values[a];
                dsum += e.derivs[a];
                CHECK(e.values[a] >= -1e-15);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(std::abs(dsum) < 1e-11);
        }
    }
}

TEST_CASE("derivatives match central differences") {
    const double h = 1e-6;
    std::vector<Basis1D> bases{Basis1D(KnotVector::uniform(3, 4)), circle_basis()};
    for (const auto& b : bases) {
        const std::vector<double> pts{0.11, 0.37, 0.62, 0.93};
        const auto d = tabulate(b, pts, true);
        for (std::size_t q = 0; q < pts.size(); ++q) {
            const std::vector<double> lo{pts[q] - h}, hi{pts[q] + h};
            const Eigen::VectorXd fd = (tabulate(b, hi) - tabulate(b, lo)).row(0).transpose() / (2 * h);
            CHECK((fd - d.row(static_cast<Eigen::Index>(q)).transpose()).norm() < 1e-7);
        }
    }
}

TEST_CASE("NURBS quarter circles lie on the unit circle") {
    const auto b = circle_basis();
    const auto p = circle_controls();
    for (int s = 0; s <= 40; ++s) {
        const auto x = eval_curve(b, p, s / 40.0);
        CHECK(x.norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK((eval_curve(b, p, 0.5) - Eigen::Vector2d(0, 1)).norm() < 1e-15);
}

TEST_CASE("knot insertion leaves the curve unchanged") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    const Basis1D poly(KnotVector::uniform(3, 3));
    Eigen::MatrixXd c = Eigen::MatrixXd::Random(poly.size(), 3);
    for (const auto& [b0, c0] : {std::pair{poly, c}, std::pair{circle_basis(), circle_controls()}}) {
        auto [b1, c1] = insert_knot(b0, c0, 0.4);
        CHECK(b1.size() == b0.size() + 1);
        auto [b2, c2] = h_refine_uniform(b0, c0, 2);
        for (int s = 0; s < 30; ++s) {
            const double x = u(rng);
            CHECK((eval_curve(b1, c1, x) - eval_curve(b0, c0, x)).norm() < 1e-13);
            CHECK((eval_curve(b2, c2, x) - eval_curve(b0, c0, x)).norm() < 1e-13);
        }
    }
}

TEST_CASE("span lookup at interior knots and the right end") {
    const auto kv = KnotVector::uniform(2, 4);
    CHECK(find_span(kv, 0.0) == 2);
    CHECK(find_span(kv, 0.25) == 3);
    CHECK(find_span(kv, 0.2499) == 2);
    CHECK(find_span(kv, 1.0) == 5);
}

TEST_CASE("solution knots keep geometry breakpoints with reduced continuity") {
    const KnotVector geo({0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2);
    const auto s = solution_knots(geo, 2, 4);
    CHECK(s.multiplicity(0.5) == 2);
    CHECK(s.multiplicity(0.25) == 1);
    CHECK(s.span_count() == 4);
    const auto g = greville(KnotVector::uniform(2, 2));
    REQUIRE(g.size() == 4);
    CHECK(g[1] == doctest::Approx(0.25));
    CHECK(g[2] == doctest::Approx(0.75));
}

TEST_CASE("invalid knot vectors are rejected") {
    CHECK_THROWS_AS(KnotVector({0, 1, 0.5, 1}, 1), SplineError);
    CHECK_THROWS_AS(KnotVector({0, 0, 1, 1}, 2), SplineError);
    CHECK_THROWS_AS(Basis1D(KnotVector::uniform(1, 2), {1.0, -1.0, 1.0}), SplineError);
}
