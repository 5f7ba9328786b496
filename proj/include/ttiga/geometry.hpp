#pragma once

// Single-patch trivariate NURBS maps x(xi) for the benchmark solids.

#include <array>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ttiga/splines.hpp"

namespace ttiga {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Param3 = std::array<double, 3>;

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when |det J| falls below the singularity threshold.
class SingularMapError : public GeometryError {
public:
    SingularMapError(const std::string& what, Param3 xi) : GeometryError(what), xi_(xi) {}
    Param3 xi() const noexcept { return xi_; }

private:
    Param3 xi_;
};

struct MetricSample {
    Mat3 jacobian;
    double det = 0.0;
    /// R = J^{-1} J^{-T} det(J), symmetrized.
    Mat3 metric;
};

/// Trivariate NURBS patch. Control points and weights are stored in Fortran
/// order: index i1 + n1 * (i2 + n2 * i3).
class GeometryPatch {
public:
    GeometryPatch() = default;
    GeometryPatch(std::array<KnotVector, 3> knots, std::vector<Vec3> control_points, std::vector<double> weights);

    const KnotVector& knots(int dir) const { return knots_[static_cast<std::size_t>(dir)]; }
    const std::array<KnotVector, 3>& knots() const noexcept { return knots_; }
    std::array<int, 3> shape() const { return {knots_[0].size(), knots_[1].size(), knots_[2].size()}; }
    const std::vector<Vec3>& control_points() const noexcept { return control_; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    std::size_t flat(int i1, int i2, int i3) const {
        const auto s = shape();
        return static_cast<std::size_t>(i1 + s[0] * (i2 + s[1] * i3));
    }

    /// Bounding-box diagonal of the control net.
    double scale() const;

    std::string name;
    /// Free-form construction notes (parameterization choices, degenerate faces).
    std::map<std::string, std::string> metadata;
    /// True when a boundary face collapses (e.g. a pole); interior quadrature only.
    bool degenerate_boundary = false;

private:
    std::array<KnotVector, 3> knots_;
    std::vector<Vec3> control_;
    std::vector<double> weights_;
};

Vec3 eval_point(const GeometryPatch& patch, const Param3& xi);

/// Jacobian, determinant and metric tensor. Throws SingularMapError when
/// |det| < 1e-12 * scale^3.
MetricSample eval_metric(const GeometryPatch& patch, const Param3& xi);

/// Cached evaluation on a tensor grid of parametric coordinates; per-direction
/// basis values are computed once.
class GridEvaluator {
public:
    GridEvaluator(const GeometryPatch& patch, std::array<std::vector<double>, 3> coords);

    const std::vector<double>& coords(int dir) const { return coords_[static_cast<std::size_t>(dir)]; }
    std::array<int, 3> sizes() const {
        return {static_cast<int>(coords_[0].size()), static_cast<int>(coords_[1].size()),
                static_cast<int>(coords_[2].size())};
    }

    Vec3 point(int i1, int i2, int i3) const;
    MetricSample metric(int i1, int i2, int i3) const;

private:
    struct Local {
        int first;
        std::vector<double> values;
        std::vector<double> derivs;
    };
    template <bool WithDerivs>
    void accumulate(int i1, int i2, int i3, Vec3& a, double& w, Mat3* da, Vec3* dw) const;

    const GeometryPatch* patch_;
    std::array<std::vector<double>, 3> coords_;
    std::array<std::vector<Local>, 3> local_;
    double singular_tol_;
};

/// Builds a metric sample from a Jacobian; throws on near-singular maps.
MetricSample make_metric(const Mat3& jacobian, double singular_tol, const Param3& xi);

enum class GeometryKind { lshape, ring, closed_hemisphere, opened_hemisphere, hyperboloid, quarter_torus, unit_cube };

GeometryKind parse_geometry_kind(const std::string& name);
std::string to_string(GeometryKind kind);
/// The six benchmark solids (unit_cube excluded).
std::vector<GeometryKind> benchmark_geometries();

/// Named reals overriding factory defaults.
using GeometryParams = std::map<std::string, double>;

/// Exact NURBS patch of a named solid. Every factory yields det J > 0 in the interior.
GeometryPatch make_geometry(GeometryKind kind, const GeometryParams& params = {});

/// Inserts a knot along one parametric direction; the mapped volume is unchanged.
GeometryPatch refine_patch(const GeometryPatch& patch, int dir, double xi_new);

nlohmann::json patch_to_json(const GeometryPatch& patch);
GeometryPatch patch_from_json(const nlohmann::json& j);

} // namespace ttiga
