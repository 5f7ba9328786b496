#pragma once

// Internal helpers shared by the TT translation units.

#include <utility>

#include <Eigen/Core>

#include "ttiga/tt.hpp"

namespace ttiga::detail {

/// (r0 * n) x r1 unfolding.
inline Eigen::Map<const Eigen::MatrixXd> left_view(const Core3& c) {
    return {c.data(), c.dimension(0) * c.dimension(1), c.dimension(2)};
}

/// r0 x (n * r1) unfolding.
inline Eigen::Map<const Eigen::MatrixXd> right_view(const Core3& c) {
    return {c.data(), c.dimension(0), c.dimension(1) * c.dimension(2)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> thin_qr(const Eigen::MatrixXd& m);
Core3 core_from_matrix(const Eigen::MatrixXd& m, int r0, int n, int r1);
/// Smallest rank whose discarded singular tail has 2-norm <= delta.
int truncation_rank(const Eigen::VectorXd& sigma, double delta, int max_rank);

} // namespace ttiga::detail
