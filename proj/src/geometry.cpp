#include "ttiga/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace ttiga {

namespace {

using std::numbers::pi;

struct Profile {
    KnotVector kv;
    std::vector<double> weights;
    std::vector<Eigen::Vector2d> points;
};

Profile line_profile(Eigen::Vector2d a, Eigen::Vector2d b) {
    return {KnotVector({0.0, 0.0, 1.0, 1.0}, 1), {1.0, 1.0}, {a, b}};
}

// Full unit circle from four 90-degree rational arcs.
Profile circle_profile() {
    const double s = std::sqrt(0.5);
    KnotVector kv({0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1}, 2);
    std::vector<double> w{1, s, 1, s, 1, s, 1, s, 1};
    std::vector<Eigen::Vector2d> p{{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}};
    return {std::move(kv), std::move(w), std::move(p)};
}

// Single rational quadratic arc of the unit circle, angles in radians, sweep < pi.
Profile arc_profile(double a0, double a1) {
    const double half = 0.5 * (a1 - a0);
    const double mid = 0.5 * (a0 + a1);
    const double c = std::cos(half);
    return {KnotVector({0, 0, 0, 1, 1, 1}, 2),
            {1.0, c, 1.0},
            {{std::cos(a0), std::sin(a0)}, Eigen::Vector2d(std::cos(mid), std::sin(mid)) / c, {std::cos(a1), std::sin(a1)}}};
}

double param(const GeometryParams& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void check_params(const GeometryParams& params, std::initializer_list<const char*> allowed, GeometryKind kind) {
    for (const auto& [k, v] : params) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
            throw GeometryError(fmt::format("unknown parameter '{}' for geometry {}", k, to_string(kind)));
        }
        if (!std::isfinite(v)) {
            throw GeometryError(fmt::format("parameter '{}' is not finite", k));
        }
    }
}

template <class F>
GeometryPatch tensor_patch(const std::array<KnotVector, 3>& kvs, F&& point_and_weight) {
    const int n1 = kvs[0].size(), n2 = kvs[1].size(), n3 = kvs[2].size();
    std::vector<Vec3> pts;
    std::vector<double> w;
    pts.reserve(static_cast<std::size_t>(n1 * n2 * n3));
    for (int k = 0; k < n3; ++k) {
        for (int j = 0; j < n2; ++j) {
            for (int i = 0; i < n1; ++i) {
                auto [x, wi] = point_and_weight(i, j, k);
                pts.push_back(x);
                w.push_back(wi);
            }
        }
    }
    return {kvs, std::move(pts), std::move(w)};
}

GeometryPatch reverse_dir3(const GeometryPatch& patch) {
    const auto s = patch.shape();
    const auto src = patch.knots(2).knots();
    std::vector<double> rev(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        rev[i] = 1.0 - src[src.size() - 1 - i];
    }
    std::array<KnotVector, 3> kvs{patch.knots(0), patch.knots(1), KnotVector(std::move(rev), patch.knots(2).degree())};
    GeometryPatch out = tensor_patch(kvs, [&](int i, int j, int k) {
        const auto f = patch.flat(i, j, s[2] - 1 - k);
        return std::pair{patch.control_points()[f], patch.weights()[f]};
    });
    out.name = patch.name;
    out.metadata = patch.metadata;
    out.degenerate_boundary = patch.degenerate_boundary;
    return out;
}

// Orientation is fixed by sampling det J on an interior lattice.
GeometryPatch orient(GeometryPatch patch) {
    int positive = 0, negative = 0;
    for (double a : {0.21, 0.5, 0.79}) {
        for (double b : {0.23, 0.5, 0.77}) {
            for (double c : {0.19, 0.5, 0.81}) {
                const double d = eval_metric(patch, {a, b, c}).det;
                (d > 0 ? positive : negative) += 1;
            }
        }
    }
    if (positive > 0 && negative > 0) {
        throw GeometryError(fmt::format("geometry {} folds over itself (mixed Jacobian signs)", patch.name));
    }
    if (negative > 0) {
        patch = reverse_dir3(patch);
        patch.metadata["orientation"] = "direction 3 reversed";
    }
    return patch;
}

GeometryPatch make_unit_cube(const GeometryParams& params) {
    check_params(params, {"scale"}, GeometryKind::unit_cube);
    const double s = param(params, "scale", 1.0);
    if (!(s > 0)) {
        throw GeometryError("unit_cube scale must be positive");
    }
    const KnotVector lin({0, 0, 1, 1}, 1);
    auto patch = tensor_patch({lin, lin, lin}, [&](int i, int j, int k) {
        return std::pair{Vec3(s * i, s * j, s * k), 1.0};
    });
    patch.metadata["parameterization"] = "trilinear identity map scaled by 'scale'";
    return patch;
}

// The L is split along the diagonal from the re-entrant corner (0,0) to the
// outer corner (-1,-1) into two trapezoids joined at the C0 knot line xi1 = 0.5.
GeometryPatch make_lshape(const GeometryParams& params) {
    check_params(params, {"height"}, GeometryKind::lshape);
    const double h = param(params, "height", 1.0);
    if (!(h > 0)) {
        throw GeometryError("lshape height must be positive");
    }
    const KnotVector around({0, 0, 0.5, 1, 1}, 1);
    const KnotVector lin({0, 0, 1, 1}, 1);
    const std::array<Eigen::Vector2d, 3> outer{{{-1, 1}, {-1, -1}, {1, -1}}};
    const std::array<Eigen::Vector2d, 3> inner{{{0, 1}, {0, 0}, {1, 0}}};
    auto patch = tensor_patch({around, lin, lin}, [&](int i, int j, int k) {
        const Eigen::Vector2d& q = (j == 0 ? outer : inner)[static_cast<std::size_t>(i)];
        return std::pair{Vec3(q.x(), q.y(), h * k), 1.0};
    });
    patch.metadata["parameterization"] =
        "xi1 runs around the L (C0 line at 0.5 on the diagonal (0,0)-(-1,-1)), xi2 outer->inner, xi3 height";
    return patch;
}

GeometryPatch make_ring(const GeometryParams& params) {
    check_params(params, {"r_in", "r_out", "h"}, GeometryKind::ring);
    const double r_in = param(params, "r_in", 0.5), r_out = param(params, "r_out", 1.0), h = param(params, "h", 1.0);
    if (!(0 < r_in && r_in < r_out && h > 0)) {
        throw GeometryError("ring needs 0 < r_in < r_out and h > 0");
    }
    const Profile radial = line_profile({r_in, 0}, {r_out, 0});
    const Profile circ = circle_profile();
    const Profile height = line_profile({0, 0}, {h, 0});
    auto patch = tensor_patch({radial.kv, circ.kv, height.kv}, [&](int i, int j, int k) {
        const double r = radial.points[static_cast<std::size_t>(i)].x();
        const auto& c = circ.points[static_cast<std::size_t>(j)];
        return std::pair{Vec3(r * c.x(), r * c.y(), height.points[static_cast<std::size_t>(k)].x()),
                         circ.weights[static_cast<std::size_t>(j)]};
    });
    patch.metadata["parameterization"] = "xi1 radial (linear), xi2 angular (4 rational quarter arcs), xi3 height";
    patch.metadata["seam"] = "xi2 = 0 and xi2 = 1 coincide physically";
    return patch;
}

GeometryPatch make_hemisphere(const GeometryParams& params, bool opened) {
    const auto kind = opened ? GeometryKind::opened_hemisphere : GeometryKind::closed_hemisphere;
    if (opened) {
        check_params(params, {"r_in", "r_out", "hole_deg"}, kind);
    } else {
        check_params(params, {"r_in", "r_out"}, kind);
    }
    const double r_in = param(params, "r_in", 0.5), r_out = param(params, "r_out", 1.0);
    const double hole = opened ? param(params, "hole_deg", 18.0) : 0.0;
    if (!(0 < r_in && r_in < r_out)) {
        throw GeometryError("hemisphere needs 0 < r_in < r_out");
    }
    if (opened && !(hole > 0 && hole < 90)) {
        throw GeometryError("opened hemisphere hole_deg must lie in (0, 90)");
    }
    const Profile radial = line_profile({r_in, 0}, {r_out, 0});
    // polar profile as (sin phi, cos phi) from the pole side down to the equator
    const Profile polar = arc_profile(pi / 2 - hole * pi / 180.0, 0.0);
    const Profile circ = circle_profile();
    auto patch = tensor_patch({radial.kv, polar.kv, circ.kv}, [&](int i, int j, int k) {
        const double r = radial.points[static_cast<std::size_t>(i)].x();
        const auto& a = polar.points[static_cast<std::size_t>(j)];
        const auto& c = circ.points[static_cast<std::size_t>(k)];
        // arc point (cos t, sin t) with t = pi/2 - phi gives (sin phi, cos phi) = (a.x, a.y)
        return std::pair{Vec3(r * a.x() * c.x(), r * a.x() * c.y(), r * a.y()),
                         polar.weights[static_cast<std::size_t>(j)] * circ.weights[static_cast<std::size_t>(k)]};
    });
    patch.metadata["parameterization"] = "xi1 radial (linear), xi2 polar (one rational arc), xi3 azimuth (4 arcs)";
    if (opened) {
        patch.metadata["hole"] = fmt::format("polar angle of the top opening rim = {} deg", hole);
    } else {
        patch.degenerate_boundary = true;
        patch.metadata["degenerate_face"] = "xi2 = 0 collapses to the polar axis";
    }
    return patch;
}

// Waist radius a at z = 0, radius r_top at z = +-half_h; the meridian is a
// hyperbola, represented exactly as a rational quadratic with middle weight > 1.
GeometryPatch make_hyperboloid(const GeometryParams& params) {
    check_params(params, {"r_middle", "r_top", "thickness", "half_height"}, GeometryKind::hyperboloid);
    const double a = param(params, "r_middle", 0.5), rt = param(params, "r_top", 1.0);
    const double t = param(params, "thickness", 0.3), hh = param(params, "half_height", 1.0);
    if (!(0 < a && a < rt && t > 0 && hh > 0)) {
        throw GeometryError("hyperboloid needs 0 < r_middle < r_top, thickness > 0, half_height > 0");
    }
    const double shoulder = a * a / rt; // tangent lines at the rims meet the waist plane here
    const double w_mid = (rt - a) / (a - shoulder);
    const KnotVector quad({0, 0, 0, 1, 1, 1}, 2);
    const std::array<Eigen::Vector2d, 3> meridian{{{rt, -hh}, {shoulder, 0.0}, {rt, hh}}};
    const std::array<double, 3> mw{1.0, w_mid, 1.0};
    const Profile circ = circle_profile();
    const KnotVector lin({0, 0, 1, 1}, 1);
    auto patch = tensor_patch({lin, circ.kv, quad}, [&](int i, int j, int k) {
        const auto& m = meridian[static_cast<std::size_t>(k)];
        const double r = m.x() + t * i;
        const auto& c = circ.points[static_cast<std::size_t>(j)];
        return std::pair{Vec3(r * c.x(), r * c.y(), m.y()),
                         circ.weights[static_cast<std::size_t>(j)] * mw[static_cast<std::size_t>(k)]};
    });
    patch.metadata["parameterization"] =
        "xi1 radial thickness (linear), xi2 angular (4 arcs), xi3 meridian hyperbola (rational quadratic)";
    patch.metadata["hyperbola"] = fmt::format("r^2 = {}^2 (1 + z^2 / {})", a, a * a * hh * hh / (rt * rt - a * a));
    return patch;
}

GeometryPatch make_quarter_torus(const GeometryParams& params) {
    check_params(params, {"r_in", "r_out", "R"}, GeometryKind::quarter_torus);
    const double r_in = param(params, "r_in", 0.5), r_out = param(params, "r_out", 1.0), big = param(params, "R", 3.0);
    if (!(0 < r_in && r_in < r_out && r_out < big)) {
        throw GeometryError("quarter_torus needs 0 < r_in < r_out < R");
    }
    const Profile radial = line_profile({r_in, 0}, {r_out, 0});
    const Profile sweep = arc_profile(0.0, pi / 2);
    const Profile tube = circle_profile();
    auto patch = tensor_patch({radial.kv, sweep.kv, tube.kv}, [&](int i, int j, int k) {
        const double s = radial.points[static_cast<std::size_t>(i)].x();
        const auto& c = tube.points[static_cast<std::size_t>(k)];
        const auto& b = sweep.points[static_cast<std::size_t>(j)];
        const double rho = big + s * c.x();
        return std::pair{Vec3(rho * b.x(), rho * b.y(), s * c.y()),
                         sweep.weights[static_cast<std::size_t>(j)] * tube.weights[static_cast<std::size_t>(k)]};
    });
    patch.metadata["parameterization"] = "xi1 tube radius (linear), xi2 toroidal sweep (90 deg arc), xi3 tube angle (4 arcs)";
    patch.metadata["seam"] = "xi3 = 0 and xi3 = 1 coincide physically";
    return patch;
}

} // namespace

GeometryPatch::GeometryPatch(std::array<KnotVector, 3> knots, std::vector<Vec3> control_points,
                             std::vector<double> weights)
    : knots_(std::move(knots)), control_(std::move(control_points)), weights_(std::move(weights)) {
    const auto s = shape();
    const auto n = static_cast<std::size_t>(s[0]) * static_cast<std::size_t>(s[1]) * static_cast<std::size_t>(s[2]);
    if (control_.size() != n || weights_.size() != n) {
        throw GeometryError(fmt::format("control grid {}x{}x{} needs {} points and weights, got {} and {}", s[0], s[1],
                                        s[2], n, control_.size(), weights_.size()));
    }
    for (double w : weights_) {
        if (!(w > 0.0)) {
            throw GeometryError("patch weights must be strictly positive");
        }
    }
}

double GeometryPatch::scale() const {
    Vec3 lo = control_.front(), hi = control_.front();
    for (const auto& p : control_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

MetricSample make_metric(const Mat3& jacobian, double singular_tol, const Param3& xi) {
    MetricSample m;
    m.jacobian = jacobian;
    m.det = jacobian.determinant();
    if (!(std::abs(m.det) >= singular_tol)) {
        throw SingularMapError(fmt::format("singular geometry map at xi = ({}, {}, {}): det J = {}", xi[0], xi[1],
                                           xi[2], m.det),
                               xi);
    }
    const Mat3 inv = jacobian.inverse();
    const Mat3 r = inv * inv.transpose() * m.det;
    m.metric = 0.5 * (r + r.transpose());
    return m;
}

Vec3 eval_point(const GeometryPatch& patch, const Param3& xi) {
    std::array<BasisEval, 3> e;
    for (int d = 0; d < 3; ++d) {
        e[static_cast<std::size_t>(d)] = eval_bspline(patch.knots(d), xi[static_cast<std::size_t>(d)]);
    }
    Vec3 a = Vec3::Zero();
    double w = 0.0;
    for (std::size_t c = 0; c < e[2].values.size(); ++c) {
        for (std::size_t b = 0; b < e[1].values.size(); ++b) {
            const double nbc = e[1].values[b] * e[2].values[c];
            for (std::size_t r = 0; r < e[0].values.size(); ++r) {
                const auto f = patch.flat(e[0].first() + static_cast<int>(r), e[1].first() + static_cast<int>(b),
                                          e[2].first() + static_cast<int>(c));
                const double nw = e[0].values[r] * nbc * patch.weights()[f];
                a += nw * patch.control_points()[f];
                w += nw;
            }
        }
    }
    return a / w;
}

MetricSample eval_metric(const GeometryPatch& patch, const Param3& xi) {
    GridEvaluator g(patch, {std::vector<double>{xi[0]}, std::vector<double>{xi[1]}, std::vector<double>{xi[2]}});
    return g.metric(0, 0, 0);
}

GridEvaluator::GridEvaluator(const GeometryPatch& patch, std::array<std::vector<double>, 3> coords)
    : patch_(&patch), coords_(std::move(coords)) {
    for (std::size_t d = 0; d < 3; ++d) {
        local_[d].reserve(coords_[d].size());
        for (double x : coords_[d]) {
            BasisEval e = eval_bspline(patch.knots(static_cast<int>(d)), x);
            local_[d].push_back({e.first(), std::move(e.values), std::move(e.derivs)});
        }
    }
    const double s = patch.scale();
    singular_tol_ = 1e-12 * s * s * s;
}

template <bool WithDerivs>
void GridEvaluator::accumulate(int i1, int i2, int i3, Vec3& a, double& w, Mat3* da, Vec3* dw) const {
    const Local& l1 = local_[0][static_cast<std::size_t>(i1)];
    const Local& l2 = local_[1][static_cast<std::size_t>(i2)];
    const Local& l3 = local_[2][static_cast<std::size_t>(i3)];
    a.setZero();
    w = 0.0;
    if constexpr (WithDerivs) {
        da->setZero();
        dw->setZero();
    }
    const auto& pts = patch_->control_points();
    const auto& wts = patch_->weights();
    for (std::size_t c = 0; c < l3.values.size(); ++c) {
        for (std::size_t b = 0; b < l2.values.size(); ++b) {
            for (std::size_t r = 0; r < l1.values.size(); ++r) {
                const auto f = patch_->flat(l1.first + static_cast<int>(r), l2.first + static_cast<int>(b),
                                            l3.first + static_cast<int>(c));
                const double wf = wts[f];
                const double n = l1.values[r] * l2.values[b] * l3.values[c] * wf;
                a += n * pts[f];
                w += n;
                if constexpr (WithDerivs) {
                    const Vec3 g(l1.derivs[r] * l2.values[b] * l3.values[c] * wf,
                                 l1.values[r] * l2.derivs[b] * l3.values[c] * wf,
                                 l1.values[r] * l2.values[b] * l3.derivs[c] * wf);
                    *da += pts[f] * g.transpose();
                    *dw += g;
                }
            }
        }
    }
}

Vec3 GridEvaluator::point(int i1, int i2, int i3) const {
    Vec3 a;
    double w;
    accumulate<false>(i1, i2, i3, a, w, nullptr, nullptr);
    return a / w;
}

MetricSample GridEvaluator::metric(int i1, int i2, int i3) const {
    Vec3 a, dw;
    Mat3 da;
    double w;
    accumulate<true>(i1, i2, i3, a, w, &da, &dw);
    const Vec3 x = a / w;
    // d(A/W) = (dA - x dW^T) / W
    const Mat3 jac = (da - x * dw.transpose()) / w;
    return make_metric(jac, singular_tol_,
                       {coords_[0][static_cast<std::size_t>(i1)], coords_[1][static_cast<std::size_t>(i2)],
                        coords_[2][static_cast<std::size_t>(i3)]});
}

GeometryKind parse_geometry_kind(const std::string& name) {
    static const std::map<std::string, GeometryKind> table{
        {"lshape", GeometryKind::lshape},
        {"ring", GeometryKind::ring},
        {"closed_hemisphere", GeometryKind::closed_hemisphere},
        {"opened_hemisphere", GeometryKind::opened_hemisphere},
        {"hyperboloid", GeometryKind::hyperboloid},
        {"quarter_torus", GeometryKind::quarter_torus},
        {"unit_cube", GeometryKind::unit_cube},
    };
    auto it = table.find(name);
    if (it == table.end()) {
        throw GeometryError(fmt::format("unknown geometry '{}'", name));
    }
    return it->second;
}

std::string to_string(GeometryKind kind) {
    switch (kind) {
    case GeometryKind::lshape: return "lshape";
    case GeometryKind::ring: return "ring";
    case GeometryKind::closed_hemisphere: return "closed_hemisphere";
    case GeometryKind::opened_hemisphere: return "opened_hemisphere";
    case GeometryKind::hyperboloid: return "hyperboloid";
    case GeometryKind::quarter_torus: return "quarter_torus";
    case GeometryKind::unit_cube: return "unit_cube";
    }
    return "unknown";
}

std::vector<GeometryKind> benchmark_geometries() {
    return {GeometryKind::closed_hemisphere, GeometryKind::opened_hemisphere, GeometryKind::ring,
            GeometryKind::lshape,            GeometryKind::hyperboloid,       GeometryKind::quarter_torus};
}

GeometryPatch make_geometry(GeometryKind kind, const GeometryParams& params) {
    GeometryPatch patch;
    switch (kind) {
    case GeometryKind::unit_cube: patch = make_unit_cube(params); break;
    case GeometryKind::lshape: patch = make_lshape(params); break;
    case GeometryKind::ring: patch = make_ring(params); break;
    case GeometryKind::closed_hemisphere: patch = make_hemisphere(params, false); break;
    case GeometryKind::opened_hemisphere: patch = make_hemisphere(params, true); break;
    case GeometryKind::hyperboloid: patch = make_hyperboloid(params); break;
    case GeometryKind::quarter_torus: patch = make_quarter_torus(params); break;
    }
    patch.name = to_string(kind);
    return orient(std::move(patch));
}

GeometryPatch refine_patch(const GeometryPatch& patch, int dir, double xi_new) {
    if (dir < 0 || dir > 2) {
        throw GeometryError("direction must be 0, 1 or 2");
    }
    const auto s = patch.shape();
    const int n = s[static_cast<std::size_t>(dir)];
    const int o1 = (dir + 1) % 3, o2 = (dir + 2) % 3;
    const int fibers = s[static_cast<std::size_t>(o1)] * s[static_cast<std::size_t>(o2)];
    // homogeneous coordinates (wx, wy, wz, w), one column block per fiber
    Eigen::MatrixXd h(n, 4 * fibers);
    auto index = [&](int along, int a, int b) {
        std::array<int, 3> ijk{};
        ijk[static_cast<std::size_t>(dir)] = along;
        ijk[static_cast<std::size_t>(o1)] = a;
        ijk[static_cast<std::size_t>(o2)] = b;
        return patch.flat(ijk[0], ijk[1], ijk[2]);
    };
    for (int b = 0; b < s[static_cast<std::size_t>(o2)]; ++b) {
        for (int a = 0; a < s[static_cast<std::size_t>(o1)]; ++a) {
            const int col = 4 * (a + s[static_cast<std::size_t>(o1)] * b);
            for (int i = 0; i < n; ++i) {
                const auto f = index(i, a, b);
                const double w = patch.weights()[f];
                h.block(i, col, 1, 3) = w * patch.control_points()[f].transpose();
                h(i, col + 3) = w;
            }
        }
    }
    auto [kv, hq] = insert_knot_polynomial(patch.knots(dir), h, xi_new);
    std::array<KnotVector, 3> kvs = patch.knots();
    kvs[static_cast<std::size_t>(dir)] = kv;
    std::array<int, 3> ns = s;
    ns[static_cast<std::size_t>(dir)] = n + 1;
    std::vector<Vec3> pts(static_cast<std::size_t>(ns[0] * ns[1] * ns[2]));
    std::vector<double> wts(pts.size());
    for (int b = 0; b < s[static_cast<std::size_t>(o2)]; ++b) {
        for (int a = 0; a < s[static_cast<std::size_t>(o1)]; ++a) {
            const int col = 4 * (a + s[static_cast<std::size_t>(o1)] * b);
            for (int i = 0; i <= n; ++i) {
                std::array<int, 3> ijk{};
                ijk[static_cast<std::size_t>(dir)] = i;
                ijk[static_cast<std::size_t>(o1)] = a;
                ijk[static_cast<std::size_t>(o2)] = b;
                const auto f = static_cast<std::size_t>(ijk[0] + ns[0] * (ijk[1] + ns[1] * ijk[2]));
                const double w = hq(i, col + 3);
                wts[f] = w;
                pts[f] = hq.block(i, col, 1, 3).transpose() / w;
            }
        }
    }
    GeometryPatch out(kvs, std::move(pts), std::move(wts));
    out.name = patch.name;
    out.metadata = patch.metadata;
    out.degenerate_boundary = patch.degenerate_boundary;
    return out;
}

nlohmann::json patch_to_json(const GeometryPatch& patch) {
    nlohmann::json j;
    j["name"] = patch.name;
    j["degrees"] = {patch.knots(0).degree(), patch.knots(1).degree(), patch.knots(2).degree()};
    j["knots"] = nlohmann::json::array();
    for (int d = 0; d < 3; ++d) {
        const auto k = patch.knots(d).knots();
        j["knots"].push_back(std::vector<double>(k.begin(), k.end()));
    }
    const auto s = patch.shape();
    j["shape"] = {s[0], s[1], s[2]};
    j["control_points"] = nlohmann::json::array();
    for (const auto& p : patch.control_points()) {
        j["control_points"].push_back({p.x(), p.y(), p.z()});
    }
    j["weights"] = patch.weights();
    j["degenerate_boundary"] = patch.degenerate_boundary;
    j["metadata"] = patch.metadata;
    return j;
}

GeometryPatch patch_from_json(const nlohmann::json& j) {
    std::array<KnotVector, 3> kvs;
    for (std::size_t d = 0; d < 3; ++d) {
        kvs[d] = KnotVector(j.at("knots").at(d).get<std::vector<double>>(), j.at("degrees").at(d).get<int>());
    }
    std::vector<Vec3> pts;
    for (const auto& p : j.at("control_points")) {
        pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    }
    GeometryPatch patch(kvs, std::move(pts), j.at("weights").get<std::vector<double>>());
    patch.name = j.value("name", "");
    patch.degenerate_boundary = j.value("degenerate_boundary", false);
    if (j.contains("metadata")) {
        patch.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    return patch;
}

} // namespace ttiga
