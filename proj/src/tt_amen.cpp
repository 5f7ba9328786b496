#include "ttiga/tt_amen.hpp"
#include "tt_detail.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

namespace ttiga {

namespace {

using T2 = Eigen::Tensor<double, 2>;
using T3 = Eigen::Tensor<double, 3>;
using Pair = Eigen::IndexPair<int>;
using detail::core_from_matrix;
using detail::left_view;
using detail::right_view;

T3 ones3() {
    T3 t(1, 1, 1);
    t.setConstant(1.0);
    return t;
}

T2 ones2() {
    T2 t(1, 1);
    t.setConstant(1.0);
    return t;
}

// phi (ry, ra, rx) -> (ry', ra', rx') across core k
T3 left_step(const T3& phi, const Core3& y, const Core4& a, const Core3& x) {
    const Eigen::Tensor<double, 4> t1 = phi.contract(x, Eigen::array<Pair, 1>{Pair(2, 0)});                      // ry ra m rx'
    const Eigen::Tensor<double, 4> t2 = t1.contract(a, Eigen::array<Pair, 2>{Pair(1, 0), Pair(2, 2)}); // ry rx' n ra'
    const T3 t3 = t2.contract(y, Eigen::array<Pair, 2>{Pair(0, 0), Pair(2, 1)});           // rx' ra' ry'
    return t3.shuffle(Eigen::array<int, 3>{2, 1, 0});
}

// phi (ry', ra', rx') right of core k -> (ry, ra, rx)
T3 right_step(const T3& phi, const Core3& y, const Core4& a, const Core3& x) {
    const Eigen::Tensor<double, 4> t1 = x.contract(phi, Eigen::array<Pair, 1>{Pair(2, 2)}); // rx m ry' ra'
    const Eigen::Tensor<double, 4> t2 = t1.contract(a, Eigen::array<Pair, 2>{Pair(1, 2), Pair(3, 3)}); // rx ry' ra n
    const T3 t3 = t2.contract(y, Eigen::array<Pair, 2>{Pair(1, 2), Pair(3, 1)});            // rx ra ry
    return t3.shuffle(Eigen::array<int, 3>{2, 1, 0});
}

T2 left_step_b(const T2& phi, const Core3& y, const Core3& b) {
    const T3 t1 = phi.contract(b, Eigen::array<Pair, 1>{Pair(1, 0)}); // ry n rb'
    return y.contract(t1, Eigen::array<Pair, 2>{Pair(0, 0), Pair(1, 1)});
}

T2 right_step_b(const T2& phi, const Core3& y, const Core3& b) {
    const T3 t1 = b.contract(phi, Eigen::array<Pair, 1>{Pair(2, 1)}); // rb n ry'
    return y.contract(t1, Eigen::array<Pair, 2>{Pair(1, 1), Pair(2, 2)});
}

// local operator: (phiL (ry, ra, rx), A_k, phiR (ry', ra', rx')) applied to x (rx, m, rx')
T3 local_apply(const T3& phil, const Core4& a, const T3& phir, const T3& x) {
    const Eigen::Tensor<double, 4> t1 = phil.contract(x, Eigen::array<Pair, 1>{Pair(2, 0)});
    const Eigen::Tensor<double, 4> t2 = t1.contract(a, Eigen::array<Pair, 2>{Pair(1, 0), Pair(2, 2)});
    return t2.contract(phir, Eigen::array<Pair, 2>{Pair(1, 2), Pair(3, 1)});
}

T3 local_rhs(const T2& phil, const Core3& b, const T2& phir) {
    const T3 t1 = phil.contract(b, Eigen::array<Pair, 1>{Pair(1, 0)});
    return t1.contract(phir, Eigen::array<Pair, 1>{Pair(2, 1)});
}

Eigen::Map<const Eigen::VectorXd> vec(const T3& t) { return {t.data(), t.size()}; }

struct LocalSystem {
    const T3& phil;
    const Core4& a;
    const T3& phir;
    Eigen::Index rx0, n, rx1;

    Eigen::Index size() const { return rx0 * n * rx1; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        T3 x(rx0, n, rx1);
        std::copy(v.data(), v.data() + v.size(), x.data());
        const T3 y = local_apply(phil, a, phir, x);
        return vec(y);
    }

    Eigen::MatrixXd dense() const {
        const auto ra0 = a.dimension(0), ra1 = a.dimension(3);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size(), size());
        Eigen::MatrixXd pl(rx0, rx0), ak(n, n), pr(rx1, rx1);
        for (Eigen::Index p = 0; p < ra0; ++p) {
            for (Eigen::Index i = 0; i < rx0; ++i)
                for (Eigen::Index j = 0; j < rx0; ++j) pl(i, j) = phil(i, p, j);
            for (Eigen::Index q = 0; q < ra1; ++q) {
                for (Eigen::Index i = 0; i < n; ++i)
                    for (Eigen::Index j = 0; j < n; ++j) ak(i, j) = a(p, i, j, q);
                if (ak.cwiseAbs().maxCoeff() == 0.0) {
                    continue;
                }
                for (Eigen::Index i = 0; i < rx1; ++i)
                    for (Eigen::Index j = 0; j < rx1; ++j) pr(i, j) = phir(i, q, j);
                m.noalias() += Eigen::kroneckerProduct(pr, Eigen::kroneckerProduct(ak, pl).eval()).eval();
            }
        }
        return m;
    }

    Eigen::VectorXd diagonal() const {
        Eigen::VectorXd dg = Eigen::VectorXd::Zero(size());
        for (Eigen::Index p = 0; p < a.dimension(0); ++p) {
            for (Eigen::Index q = 0; q < a.dimension(3); ++q) {
                for (Eigen::Index c = 0; c < rx1; ++c) {
                    for (Eigen::Index i = 0; i < n; ++i) {
                        for (Eigen::Index r = 0; r < rx0; ++r) {
                            dg(r + rx0 * (i + n * c)) += phil(r, p, r) * a(p, i, i, q) * phir(c, q, c);
                        }
                    }
                }
            }
        }
        return dg;
    }
};

Eigen::VectorXd solve_local(const LocalSystem& sys, const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess,
                            double tol, const AmenOptions& opts) {
    if (sys.size() <= opts.local_direct_max) {
        const Eigen::MatrixXd m = sys.dense();
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) {
            return llt.solve(rhs);
        }
        return m.partialPivLu().solve(rhs);
    }
    // Jacobi-preconditioned conjugate gradients from the previous core
    Eigen::VectorXd dg = sys.diagonal();
    for (Eigen::Index i = 0; i < dg.size(); ++i) {
        dg(i) = dg(i) > 0 ? 1.0 / dg(i) : 1.0;
    }
    const double bn = rhs.norm();
    Eigen::VectorXd x = guess;
    Eigen::VectorXd r = rhs - sys.apply(x);
    Eigen::VectorXd z = dg.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    for (int it = 0; it < opts.local_max_iters && r.norm() > tol * bn; ++it) {
        const Eigen::VectorXd ap = sys.apply(p);
        const double alpha = rz / p.dot(ap);
        x += alpha * p;
        r -= alpha * ap;
        z = dg.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    return x;
}

struct Interfaces {
    std::vector<T3> xax, zax;
    std::vector<T2> xb, zb;

    explicit Interfaces(int d)
        : xax(static_cast<std::size_t>(d + 1)), zax(static_cast<std::size_t>(d + 1)), xb(static_cast<std::size_t>(d + 1)),
          zb(static_cast<std::size_t>(d + 1)) {}
};

// Right-QR of core k; the triangular factor is pushed into core k-1.
void right_qr(std::vector<Core3>& cores, std::size_t k) {
    const auto n = cores[k].dimension(1), r1 = cores[k].dimension(2);
    auto [q, r] = detail::thin_qr(right_view(cores[k]).transpose());
    const Eigen::MatrixXd qt = q.transpose();
    cores[k] = core_from_matrix(qt, static_cast<int>(qt.rows()), static_cast<int>(n), static_cast<int>(r1));
    const auto p0 = cores[k - 1].dimension(0), pn = cores[k - 1].dimension(1);
    const Eigen::MatrixXd prev = left_view(cores[k - 1]) * r.transpose();
    cores[k - 1] = core_from_matrix(prev, static_cast<int>(p0), static_cast<int>(pn), static_cast<int>(prev.cols()));
}

} // namespace

double relative_residual(const TtMatrix& a, const TtTensor& x, const TtTensor& b) {
    const TtTensor r = add(matvec(a, x), scale(b, -1.0));
    const double bn = norm(b);
    const double rn = norm(r);
    return bn > 0 ? rn / bn : rn;
}

AmenResult amen_solve(const TtMatrix& a, const TtTensor& b, const AmenOptions& opts, const TtTensor* x0) {
    if (a.row_modes() != a.col_modes()) {
        throw DimensionError("amen_solve needs a square operator");
    }
    if (a.col_modes() != b.modes()) {
        throw DimensionError("amen_solve: operator and right-hand side modes differ");
    }
    if (!(opts.eps > 0.0)) {
        throw std::invalid_argument("amen_solve tolerance must be positive");
    }
    const int d = a.dim();
    const auto modes = b.modes();
    AmenResult res;
    const double bnorm = norm(b);
    if (bnorm == 0.0) {
        res.x = TtTensor::zeros(modes);
        res.converged = true;
        return res;
    }

    std::mt19937_64 rng(opts.seed);
    const int kick = std::max(0, opts.enrichment_rank);
    std::vector<int> init_ranks(static_cast<std::size_t>(d - 1), 2), z_ranks(static_cast<std::size_t>(d - 1), std::max(1, kick));
    std::vector<Core3> x = (x0 != nullptr ? *x0 : TtTensor::random(modes, init_ranks, rng)).cores();
    std::vector<Core3> z = TtTensor::random(modes, z_ranks, rng).cores();
    const auto& bc = b.cores();
    const auto& ac = a.cores();

    Interfaces ifc(d);
    const auto du = static_cast<std::size_t>(d);
    ifc.xax[0] = ones3();
    ifc.zax[0] = ones3();
    ifc.xb[0] = ones2();
    ifc.zb[0] = ones2();

    auto build_right = [&]() {
        ifc.xax[du] = ones3();
        ifc.zax[du] = ones3();
        ifc.xb[du] = ones2();
        ifc.zb[du] = ones2();
        for (std::size_t k = du - 1; k >= 1; --k) {
            right_qr(x, k);
            right_qr(z, k);
            ifc.xax[k] = right_step(ifc.xax[k + 1], x[k], ac[k], x[k]);
            ifc.zax[k] = right_step(ifc.zax[k + 1], z[k], ac[k], x[k]);
            ifc.xb[k] = right_step_b(ifc.xb[k + 1], x[k], bc[k]);
            ifc.zb[k] = right_step_b(ifc.zb[k + 1], z[k], bc[k]);
        }
    };

    double eps_local = opts.eps;
    double best_res = INFINITY;
    std::vector<Core3> best_x;

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        build_right();
        double max_local = 0.0;
        for (std::size_t k = 0; k < du; ++k) {
            const auto rx0 = x[k].dimension(0), n = x[k].dimension(1), rx1 = x[k].dimension(2);
            LocalSystem sys{ifc.xax[k], ac[k], ifc.xax[k + 1], rx0, n, rx1};
            const T3 rhs_t = local_rhs(ifc.xb[k], bc[k], ifc.xb[k + 1]);
            const Eigen::VectorXd rhs = vec(rhs_t);
            const double rhs_norm = rhs.norm();
            const Eigen::VectorXd old = vec(x[k]);
            if (rhs_norm > 0) {
                max_local = std::max(max_local, (sys.apply(old) - rhs).norm() / rhs_norm);
            }
            const Eigen::VectorXd sol = rhs_norm > 0 ? solve_local(sys, rhs, old, 0.1 * eps_local, opts)
                                                     : Eigen::VectorXd::Zero(sys.size());

            if (k + 1 == du) {
                x[k] = core_from_matrix(sol, static_cast<int>(rx0), static_cast<int>(n), static_cast<int>(rx1));
                break;
            }

            // truncate the local solution by its local residual
            const Eigen::Map<const Eigen::MatrixXd> sm(sol.data(), rx0 * n, rx1);
            Eigen::BDCSVD<Eigen::MatrixXd> svd(sm, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const auto full_rank = static_cast<int>(svd.singularValues().size());
            auto truncated = [&](int r) -> Eigen::MatrixXd {
                return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
                       svd.matrixV().leftCols(r).transpose();
            };
            auto ok = [&](int r) {
                const Eigen::MatrixXd t = truncated(r);
                const Eigen::VectorXd tv = Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
                return (sys.apply(tv) - rhs).norm() <= eps_local * rhs_norm;
            };
            int lo = 1, hi = full_rank;
            if (rhs_norm > 0 && ok(hi)) {
                while (lo < hi) {
                    const int mid = (lo + hi) / 2;
                    if (ok(mid)) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
            } else if (rhs_norm == 0) {
                hi = 1;
            }
            const int r = std::min(hi, opts.max_rank);
            const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
            const Eigen::MatrixXd xt = truncated(r);
            T3 xt_core = core_from_matrix(xt, static_cast<int>(rx0), static_cast<int>(n), static_cast<int>(rx1));

            Eigen::MatrixXd basis = u;
            if (kick > 0) {
                // residual projected onto the z basis updates z; onto (x-left, z-right) enriches x
                const T3 zr = local_rhs(ifc.zb[k], bc[k], ifc.zb[k + 1]) - local_apply(ifc.zax[k], ac[k], ifc.zax[k + 1], xt_core);
                const auto rz0 = zr.dimension(0), rz1 = zr.dimension(2);
                auto [zq, zrr] = detail::thin_qr(Eigen::Map<const Eigen::MatrixXd>(zr.data(), rz0 * n, rz1));
                z[k] = core_from_matrix(zq, static_cast<int>(rz0), static_cast<int>(n), static_cast<int>(zq.cols()));

                const T3 enr = local_rhs(ifc.xb[k], bc[k], ifc.zb[k + 1]) - local_apply(ifc.xax[k], ac[k], ifc.zax[k + 1], xt_core);
                Eigen::MatrixXd stacked(rx0 * n, r + enr.dimension(2));
                stacked << u, Eigen::Map<const Eigen::MatrixXd>(enr.data(), rx0 * n, enr.dimension(2));
                basis = detail::thin_qr(stacked).first;
            }
            const Eigen::MatrixXd coeff = basis.transpose() * xt; // (r', rx1)
            x[k] = core_from_matrix(basis, static_cast<int>(rx0), static_cast<int>(n), static_cast<int>(basis.cols()));
            const auto n1 = x[k + 1].dimension(1), r2 = x[k + 1].dimension(2);
            const Eigen::MatrixXd next = coeff * right_view(x[k + 1]);
            x[k + 1] = core_from_matrix(next, static_cast<int>(coeff.rows()), static_cast<int>(n1), static_cast<int>(r2));

            if (kick == 0) {
                // keep z conforming with x's left rank when enrichment is disabled
                z[k] = x[k];
            }
            ifc.xax[k + 1] = left_step(ifc.xax[k], x[k], ac[k], x[k]);
            ifc.xb[k + 1] = left_step_b(ifc.xb[k], x[k], bc[k]);
            ifc.zax[k + 1] = left_step(ifc.zax[k], z[k], ac[k], x[k]);
            ifc.zb[k + 1] = left_step_b(ifc.zb[k], z[k], bc[k]);
        }

        res.sweeps = sweep + 1;
        const TtTensor xt(x);
        const double true_res = relative_residual(a, xt, b);
        if (true_res < best_res) {
            best_res = true_res;
            best_x = x;
        }
        if (true_res <= opts.eps) {
            res.converged = true;
            break;
        }
        if (max_local <= eps_local) {
            // locally stationary but globally above target: tighten the local budget
            eps_local *= 0.3;
        }
    }

    TtTensor out(best_x);
    res.residual = best_res;
    // drop enrichment directions that do not affect the residual target
    if (res.converged) {
        const TtTensor compact = round(out, 1e-2 * opts.eps);
        const double cres = relative_residual(a, compact, b);
        if (cres <= opts.eps) {
            out = compact;
            res.residual = cres;
        }
    }
    res.x = std::move(out);
    return res;
}

} // namespace ttiga
