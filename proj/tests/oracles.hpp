#pragma once

// Independent reference computations used only by the tests.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "ttiga/tt.hpp"

namespace oracle {

/// Cox-de Boor recursion straight from the definition (0/0 := 0). At the last
/// knot the final nonempty span is taken as closed.
inline double cox_de_boor(const std::vector<double>& t, int i, int p, double x) {
    if (p == 0) {
        const double a = t[static_cast<std::size_t>(i)], b = t[static_cast<std::size_t>(i + 1)];
        if (a <= x && x < b) return 1.0;
        if (x == t.back() && b == t.back() && a < b) return 1.0;
        return 0.0;
    }
    double v = 0.0;
    const double d1 = t[static_cast<std::size_t>(i + p)] - t[static_cast<std::size_t>(i)];
    const double d2 = t[static_cast<std::size_t>(i + p + 1)] - t[static_cast<std::size_t>(i + 1)];
    if (d1 > 0) v += (x - t[static_cast<std::size_t>(i)]) / d1 * cox_de_boor(t, i, p - 1, x);
    if (d2 > 0) v += (t[static_cast<std::size_t>(i + p + 1)] - x) / d2 * cox_de_boor(t, i + 1, p - 1, x);
    return v;
}

/// Exact TT-SVD of a dense Fortran-ordered tensor; truncation eps/sqrt(d-1) per bond.
inline ttiga::TtTensor tt_from_full(const Eigen::VectorXd& x, const std::vector<int>& modes, double eps = 0.0) {
    const int d = static_cast<int>(modes.size());
    const double delta = d > 1 ? eps * x.norm() / std::sqrt(d - 1.0) : 0.0;
    std::vector<ttiga::Core3> cores;
    Eigen::MatrixXd rest = x;
    int r0 = 1;
    for (int k = 0; k + 1 < d; ++k) {
        const int n = modes[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(rest.data(), r0 * n, rest.size() / (r0 * n));
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        int r = static_cast<int>(s.size());
        double tail = 0.0;
        while (r > 1 && tail + s(r - 1) * s(r - 1) <= delta * delta) {
            tail += s(r - 1) * s(r - 1);
            --r;
        }
        ttiga::Core3 c(r0, n, r);
        const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
        std::copy(u.data(), u.data() + u.size(), c.data());
        cores.push_back(c);
        rest = s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
        r0 = r;
    }
    ttiga::Core3 last(r0, modes.back(), 1);
    std::copy(rest.data(), rest.data() + rest.size(), last.data());
    cores.push_back(last);
    return ttiga::TtTensor(cores);
}

/// Dense Kronecker product in Fortran index order: A_1 is the fastest index.
inline Eigen::MatrixXd kron3(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, const Eigen::MatrixXd& a3) {
    return Eigen::kroneckerProduct(a3, Eigen::kroneckerProduct(a2, a1).eval()).eval();
}

/// 1D finite-difference Laplacian (Dirichlet, unscaled).
inline Eigen::MatrixXd laplace1d(int n) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        l(i, i) = 2.0;
        if (i > 0) l(i, i - 1) = l(i - 1, i) = -1.0;
    }
    return l;
}

/// Trilinear element stiffness on [0,1]^3 from the 1D linear stiffness and mass.
inline Eigen::MatrixXd trilinear_stiffness() {
    Eigen::Matrix2d k, m;
    k << 1, -1, -1, 1;
    m << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
    return kron3(k, m, m) + kron3(m, k, m) + kron3(m, m, k);
}

inline ttiga::TtTensor random_tt(const std::vector<int>& modes, const std::vector<int>& ranks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return ttiga::TtTensor::random(modes, ranks, rng);
}

inline double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double n = b.norm();
    return n > 0 ? (a - b).norm() / n : (a - b).norm();
}

} // namespace oracle
