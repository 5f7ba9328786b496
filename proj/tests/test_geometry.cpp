#include <doctest.h>

#include <cmath>

#include "ttiga/geometry.hpp"

using namespace ttiga;

namespace {

Mat3 fd_jacobian(const GeometryPatch& g, Param3 xi) {
    const double h = 1e-6;
    Mat3 j;
    for (int d = 0; d < 3; ++d) {
        Param3 a = xi, b = xi;
        a[static_cast<std::size_t>(d)] -= h;
        b[static_cast<std::size_t>(d)] += h;
        j.col(d) = (eval_point(g, b) - eval_point(g, a)) / (2 * h);
    }
    return j;
}

// Avoids 0.5, the C0 corner knot of the L-shape, where one-sided limits differ.
std::vector<Param3> interior_lattice() {
    std::vector<Param3> out;
    for (double a : {0.13, 0.47, 0.87})
        for (double b : {0.21, 0.49, 0.79})
            for (double c : {0.07, 0.55, 0.93}) out.push_back({a, b, c});
    return out;
}

std::vector<GeometryKind> all_kinds() {
    auto k = benchmark_geometries();
    k.push_back(GeometryKind::unit_cube);
    return k;
}

} // namespace

TEST_CASE("analytic Jacobians match finite differences") {
    for (auto kind : all_kinds()) {
        const auto g = make_geometry(kind);
        for (const auto& xi : interior_lattice()) {
            const auto m = eval_metric(g, xi);
            const Mat3 fd = fd_jacobian(g, xi);
            INFO(to_string(kind));
            CHECK((m.jacobian - fd).norm() <= 1e-6 * m.jacobian.norm());
            CHECK(m.det > 0);
            CHECK((m.metric - m.metric.transpose()).norm() < 1e-14 * m.metric.norm());
        }
    }
}

TEST_CASE("grid evaluation agrees with pointwise evaluation") {
    const auto g = make_geometry(GeometryKind::quarter_torus);
    GridEvaluator ev(g, {std::vector<double>{0.0, 0.3, 1.0}, std::vector<double>{0.2, 0.9}, std::vector<double>{0.5}});
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b) {
            const Param3 xi{ev.coords(0)[static_cast<std::size_t>(a)], ev.coords(1)[static_cast<std::size_t>(b)], 0.5};
            CHECK((ev.point(a, b, 0) - eval_point(g, xi)).norm() < 1e-14);
            CHECK((ev.metric(a, b, 0).metric - eval_metric(g, xi).metric).norm() < 1e-12);
        }
}

TEST_CASE("scaled cube metric is s times the identity") {
    const auto g = make_geometry(GeometryKind::unit_cube, {{"scale", 2.0}});
    const auto m = eval_metric(g, {0.3, 0.6, 0.1});
    CHECK(m.det == doctest::Approx(8.0));
    CHECK((m.metric - 2.0 * Mat3::Identity()).norm() < 1e-13);
}

TEST_CASE("ring and torus control nets reproduce exact circles") {
    const auto ring = make_geometry(GeometryKind::ring);
    for (double t : {0.0, 0.1, 0.45, 0.8, 1.0}) {
        const Vec3 inner = eval_point(ring, {0.0, t, 0.3});
        const Vec3 outer = eval_point(ring, {1.0, t, 0.7});
        CHECK(std::hypot(inner.x(), inner.y()) == doctest::Approx(0.5).epsilon(1e-13));
        CHECK(std::hypot(outer.x(), outer.y()) == doctest::Approx(1.0).epsilon(1e-13));
    }
    const auto torus = make_geometry(GeometryKind::quarter_torus);
    for (double t : {0.0, 0.33, 0.9}) {
        const Vec3 p = eval_point(torus, {1.0, t, 0.4});
        // distance from the tube centre circle of radius R = 3 in the xy-plane
        const double rho = std::hypot(p.x(), p.y()) - 3.0;
        CHECK(std::hypot(rho, p.z()) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("hemisphere outer surface has the outer radius") {
    for (auto kind : {GeometryKind::closed_hemisphere, GeometryKind::opened_hemisphere}) {
        const auto g = make_geometry(kind);
        for (double a : {0.2, 0.6})
            for (double b : {0.1, 0.5, 0.95}) {
                const Param3 xi{1.0, a, b};
                CHECK(eval_point(g, xi).norm() == doctest::Approx(1.0).epsilon(1e-12));
                const Param3 yi{0.0, a, b};
                CHECK(eval_point(g, yi).norm() == doctest::Approx(0.5).epsilon(1e-12));
            }
    }
}

TEST_CASE("knot refinement preserves the mapping") {
    const auto g = make_geometry(GeometryKind::hyperboloid);
    const auto r = refine_patch(refine_patch(g, 0, 0.37), 2, 0.61);
    CHECK(r.shape()[0] == g.shape()[0] + 1);
    for (const auto& xi : interior_lattice()) {
        CHECK((eval_point(r, xi) - eval_point(g, xi)).norm() < 1e-13);
    }
}

TEST_CASE("patch JSON round trip") {
    const auto g = make_geometry(GeometryKind::lshape);
    const auto back = patch_from_json(patch_to_json(g));
    CHECK(back.shape() == g.shape());
    for (const auto& xi : interior_lattice()) CHECK((eval_point(back, xi) - eval_point(g, xi)).norm() < 1e-15);
}

TEST_CASE("invalid parameters and singular maps are reported") {
    CHECK_THROWS_AS(make_geometry(GeometryKind::ring, {{"r_in", 2.0}}), GeometryError);
    CHECK_THROWS_AS(make_geometry(GeometryKind::ring, {{"radius", 1.0}}), GeometryError);
    CHECK_THROWS_AS(parse_geometry_kind("teapot"), std::exception);
    CHECK_THROWS_AS(make_metric(Mat3::Zero(), 1e-12, {0.5, 0.5, 0.5}), SingularMapError);
}
