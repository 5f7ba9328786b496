#pragma once

#include <cstdint>

#include "ttiga/tt.hpp"

namespace ttiga {

struct AmenOptions {
    /// Target relative residual ||Ax - b|| / ||b||.
    double eps = 1e-8;
    int max_sweeps = 50;
    /// Rank of the residual TT used to enrich the solution basis.
    int enrichment_rank = 4;
    /// Local systems up to this size are solved by dense Cholesky; larger ones by PCG.
    int local_direct_max = 5000;
    int local_max_iters = 5000;
    int max_rank = 512;
    std::uint64_t seed = 0;
};

struct AmenResult {
    TtTensor x;
    /// Relative residual of the returned x, computed in TT arithmetic.
    double residual = 0.0;
    int sweeps = 0;
    bool converged = false;
};

/// Solves A x = b for symmetric positive definite A by alternating core-wise
/// minimization with residual-based basis enrichment.
AmenResult amen_solve(const TtMatrix& a, const TtTensor& b, const AmenOptions& opts = {},
                      const TtTensor* x0 = nullptr);

/// ||A x - b|| / ||b|| evaluated in TT format (||b|| = 0 returns ||A x||).
double relative_residual(const TtMatrix& a, const TtTensor& x, const TtTensor& b);

} // namespace ttiga
