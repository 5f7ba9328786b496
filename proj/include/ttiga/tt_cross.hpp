#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ttiga/tt.hpp"

namespace ttiga {

class DegeneratePivotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rows of a tall n x r matrix spanning a tol-dominant r x r submatrix:
/// every entry of M * inv(M[rows]) has magnitude <= tol. Ties go to the lower row.
std::vector<int> maxvol(const Eigen::MatrixXd& m, double tol = 1.01, int max_swaps = -1);

/// Entry oracle on a tensor grid. `eval` must be deterministic and reentrant.
struct CrossOracle {
    std::vector<int> modes;
    std::function<double(std::span<const int>)> eval;
};

struct CrossOptions {
    double eps = 1e-10;
    int rank_cap = 64;
    int max_sweeps = 20;
    /// Random indices added to each index set per half-sweep (rank growth).
    int kick = 4;
    int init_rank = 2;
    int holdout = 1000;
    std::uint64_t seed = 0;
    /// Magnitude below which entries count as zero: errors are measured
    /// relative to max(rms of the samples, scale). 0 gives purely relative errors.
    double scale = 0.0;
};

struct CrossResult {
    TtTensor tt;
    /// Relative RMS error on the random holdout set.
    double holdout_error = 0.0;
    int sweeps = 0;
    long long evaluations = 0;
    bool converged = false;
    /// Set when the rank cap was hit with holdout error above 10 * eps.
    bool warning = false;
};

/// Rank-adaptive alternating cross interpolation with maxvol pivoting.
CrossResult tt_cross(const CrossOracle& oracle, const CrossOptions& opts = {});

} // namespace ttiga
