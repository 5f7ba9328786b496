#pragma once

// TT-format stiffness operator, load vector and Dirichlet reduction.

#include <array>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ttiga/geometry.hpp"
#include "ttiga/splines.hpp"
#include "ttiga/tt.hpp"
#include "ttiga/tt_cross.hpp"

namespace ttiga {

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solution bases and the tensor-product Gauss-Legendre grid.
struct Discretization {
    std::array<Basis1D, 3> bases;
    std::array<int, 3> n_gauss{};
    std::array<std::vector<double>, 3> points;
    std::array<std::vector<double>, 3> weights;
    /// Sparse basis tables: for quadrature point q, values/derivs of the p+1
    /// functions starting at first[q].
    std::array<std::vector<BasisEval>, 3> table;

    std::array<int, 3> sizes() const { return {bases[0].size(), bases[1].size(), bases[2].size()}; }
    std::array<int, 3> quad_sizes() const {
        return {static_cast<int>(points[0].size()), static_cast<int>(points[1].size()),
                static_cast<int>(points[2].size())};
    }
    long long dofs() const {
        const auto s = sizes();
        return static_cast<long long>(s[0]) * s[1] * s[2];
    }
    /// Dense (quad points x basis size) table of values or derivatives.
    Eigen::MatrixXd dense_table(int dir, bool derivative = false) const;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

/// n_gauss[d] <= 0 selects p_d + 1 points per span.
Discretization build_quadrature(std::array<Basis1D, 3> bases, std::array<int, 3> n_gauss = {0, 0, 0});

/// Polynomial solution bases of the given degrees refined to `elements` spans,
/// keeping every geometry breakpoint.
Discretization make_discretization(const GeometryPatch& patch, std::array<int, 3> degree,
                                   std::array<int, 3> elements);

/// Faces ordered xi1=0, xi1=1, xi2=0, xi2=1, xi3=0, xi3=1.
enum class Face { xi1_min, xi1_max, xi2_min, xi2_max, xi3_min, xi3_max };
Face parse_face(const std::string& name);
std::string to_string(Face face);

struct FaceCondition {
    bool dirichlet = false;
    /// Boundary value at a physical point; unset means zero.
    std::function<double(const Vec3&)> value;
};

struct BoundarySpec {
    std::array<FaceCondition, 6> faces;

    FaceCondition& face(Face f) { return faces[static_cast<std::size_t>(f)]; }
    const FaceCondition& face(Face f) const { return faces[static_cast<std::size_t>(f)]; }
    bool any_dirichlet() const;
    /// Coefficient index ranges left after removing Dirichlet layers.
    std::vector<IndexRange> interior(const std::array<int, 3>& sizes) const;
};

struct AssemblyOptions {
    double eps_cross = 1e-10;
    double eps_round = 1e-10;
    int rank_cap = 64;
    std::uint64_t seed = 0;
};

struct CrossLog {
    std::string what;
    double holdout_error = 0.0;
    int rank = 0;
    long long evaluations = 0;
    bool warning = false;
};

/// R_ij = (J^{-1} J^{-T} det J)_ij on the quadrature grid (i, j zero-based).
TtTensor cross_metric_coefficient(const GeometryPatch& patch, const Discretization& disc, int i, int j,
                                  const AssemblyOptions& opts, CrossLog* log = nullptr);

/// Core-wise contraction of a coefficient TT on the quadrature grid against
/// per-direction factor tables: row factor N'_d if d == i, else N_d; column
/// factor N'_d if d == j, else N_d. i or j < 0 means no derivative.
TtMatrix contract_bilinear(const TtTensor& coef, const Discretization& disc, int i, int j);

TtMatrix assemble_stiffness(const GeometryPatch& patch, const Discretization& disc, const AssemblyOptions& opts,
                            std::vector<CrossLog>* logs = nullptr);

using SourceFn = std::function<double(const Vec3&)>;

/// Empty `f` gives the zero load.
TtTensor assemble_load(const GeometryPatch& patch, const Discretization& disc, const SourceFn& f,
                       const AssemblyOptions& opts, CrossLog* log = nullptr);

/// Per-face boundary coefficients by Greville interpolation, with entries
/// owned by an earlier Dirichlet face zeroed. Element [face] is an
/// (n_a x n_b) matrix over the two tangential directions in increasing order;
/// empty for natural faces.
std::array<Eigen::MatrixXd, 6> face_coefficients(const GeometryPatch& patch, const Discretization& disc,
                                                 const BoundarySpec& bc);

/// TT coefficient field matching the Dirichlet data and zero elsewhere.
TtTensor dirichlet_lift(const GeometryPatch& patch, const Discretization& disc, const BoundarySpec& bc,
                        double eps);

struct AssembledSystem {
    TtMatrix k;
    TtTensor f;
    TtTensor lift;
    std::vector<IndexRange> interior;
    std::array<int, 3> sizes{};
};

/// Interior system K_II u = f_I - K_I. lift by core slicing.
AssembledSystem apply_dirichlet(const TtMatrix& k, const TtTensor& f, const TtTensor& lift, const BoundarySpec& bc,
                                const Discretization& disc, double eps);

} // namespace ttiga
