#pragma once

// Tensor-train vectors and operators.
//
// A TtTensor of order d stores cores G_k of shape (r_{k-1}, n_k, r_k) with
// r_0 = r_d = 1. Dense element order is Fortran order (first index fastest),
// which is also the coefficient order used by the IGA discretization.
// A TtMatrix stores cores of shape (r_{k-1}, n_k, m_k, r_k): row mode n_k,
// column mode m_k.

#include <climits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <unsupported/Eigen/CXX11/Tensor>

namespace ttiga {

using Core3 = Eigen::Tensor<double, 3>;
using Core4 = Eigen::Tensor<double, 4>;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class TtTensor {
public:
    TtTensor() = default;
    explicit TtTensor(std::vector<Core3> cores);

    static TtTensor zeros(const std::vector<int>& modes);
    static TtTensor ones(const std::vector<int>& modes);
    static TtTensor rank_one(const std::vector<Eigen::VectorXd>& factors);
    /// Gaussian random cores with the given interior ranks (size d-1).
    static TtTensor random(const std::vector<int>& modes, const std::vector<int>& ranks, std::mt19937_64& rng);

    int dim() const noexcept { return static_cast<int>(cores_.size()); }
    std::vector<int> modes() const;
    /// r_0, ..., r_d.
    std::vector<int> ranks() const;
    int max_rank() const;
    const Core3& core(int k) const { return cores_[static_cast<std::size_t>(k)]; }
    const std::vector<Core3>& cores() const noexcept { return cores_; }

    long long parameter_count() const;
    long long full_size() const;
    double element(std::span<const int> index) const;
    /// Dense vector in Fortran order. Intended for small tensors.
    Eigen::VectorXd full() const;

private:
    std::vector<Core3> cores_;
};

class TtMatrix {
public:
    TtMatrix() = default;
    explicit TtMatrix(std::vector<Core4> cores);

    static TtMatrix identity(const std::vector<int>& modes);
    /// Kronecker product A_1 (x) ... (x) A_d in Fortran index order.
    static TtMatrix kron(const std::vector<Eigen::MatrixXd>& factors);

    int dim() const noexcept { return static_cast<int>(cores_.size()); }
    std::vector<int> row_modes() const;
    std::vector<int> col_modes() const;
    std::vector<int> ranks() const;
    int max_rank() const;
    const Core4& core(int k) const { return cores_[static_cast<std::size_t>(k)]; }
    const std::vector<Core4>& cores() const noexcept { return cores_; }

    long long parameter_count() const;
    /// Dense element count (rows * cols).
    long long full_size() const;
    Eigen::MatrixXd full() const;

    /// Same data viewed as a TT vector over fused (row, col) modes, row fastest.
    TtTensor as_tensor() const;
    static TtMatrix from_tensor(const TtTensor& t, const std::vector<int>& row_modes, const std::vector<int>& col_modes);

private:
    std::vector<Core4> cores_;
};

/// TT-rounding: ||result - t||_F <= eps ||t||_F; per-bond threshold eps/sqrt(d-1).
TtTensor round(const TtTensor& t, double eps, int max_rank = INT_MAX);
TtMatrix round(const TtMatrix& t, double eps, int max_rank = INT_MAX);

TtTensor add(const TtTensor& a, const TtTensor& b);
TtMatrix add(const TtMatrix& a, const TtMatrix& b);
TtTensor scale(const TtTensor& a, double c);
TtMatrix scale(const TtMatrix& a, double c);
double dot(const TtTensor& a, const TtTensor& b);
/// Frobenius norm via orthogonalization (no Gram cancellation).
double norm(const TtTensor& a);
double norm(const TtMatrix& a);
TtTensor matvec(const TtMatrix& a, const TtTensor& x);
TtMatrix transpose(const TtMatrix& a);

/// Left-orthogonalizes cores 0..d-2 (QR sweep); the value is unchanged.
TtTensor left_orthogonalize(const TtTensor& t);
/// Right-orthogonalizes cores 1..d-1; the value is unchanged.
TtTensor right_orthogonalize(const TtTensor& t);

struct IndexRange {
    int begin = 0;
    int count = 0;
};

/// Restriction to a sub-box of indices; ranks are preserved.
TtTensor slice(const TtTensor& t, const std::vector<IndexRange>& ranges);
TtMatrix slice(const TtMatrix& t, const std::vector<IndexRange>& rows, const std::vector<IndexRange>& cols);
/// Zero extension: places t at `offsets` inside a tensor of mode sizes `modes`.
TtTensor pad(const TtTensor& t, const std::vector<int>& offsets, const std::vector<int>& modes);

/// Applies B_k (m_k x n_k) to mode k of t.
TtTensor mode_product(const TtTensor& t, const std::vector<Eigen::MatrixXd>& mats);

} // namespace ttiga
