#pragma once

// Classical full-grid IGA: element-loop assembly into sparse storage and a
// sparse solve. Serves as the oracle for the TT pipeline on small meshes.

#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "ttiga/assembly.hpp"

namespace ttiga {

class OracleRefusedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr long long kReferenceDofGuard = 1'000'000;

struct ReferenceSystem {
    Eigen::SparseMatrix<double> k;
    Eigen::VectorXd f;
    Eigen::VectorXd lift;
    /// Full-grid indices of the interior coefficients, in Fortran order.
    std::vector<int> interior;
    Eigen::SparseMatrix<double> k_int;
    Eigen::VectorXd f_int;
};

ReferenceSystem reference_assemble(const GeometryPatch& patch, const Discretization& disc, const SourceFn& f,
                                   const BoundarySpec& bc, long long max_dofs = kReferenceDofGuard);

struct ReferenceSolution {
    /// Full coefficient vector with the lift re-added.
    Eigen::VectorXd u;
    int iterations = 0;
    double residual = 0.0;
};

/// Sparse Cholesky for small systems, IC-preconditioned CG to `tol` otherwise.
ReferenceSolution reference_solve(const ReferenceSystem& sys, double tol = 1e-12);

} // namespace ttiga
