#include "ttiga/reference.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

namespace ttiga {

namespace {

constexpr long long kDirectLimit = 30000;

struct SpanRange {
    int q0;
    int count;
};

// Quadrature points grouped by knot span (they are stored span by span).
std::vector<SpanRange> element_ranges(const Discretization& disc, int d) {
    const auto du = static_cast<std::size_t>(d);
    std::vector<SpanRange> out;
    const auto& tab = disc.table[du];
    for (int q = 0; q < static_cast<int>(tab.size()); ++q) {
        if (out.empty() || tab[static_cast<std::size_t>(q)].span != tab[static_cast<std::size_t>(out.back().q0)].span) {
            out.push_back({q, 0});
        }
        ++out.back().count;
    }
    return out;
}

} // namespace

ReferenceSystem reference_assemble(const GeometryPatch& patch, const Discretization& disc, const SourceFn& f,
                                   const BoundarySpec& bc, long long max_dofs) {
    const long long dofs = disc.dofs();
    if (dofs > max_dofs) {
        throw OracleRefusedError(fmt::format("full-grid reference refused: {} dofs exceeds the guard of {}", dofs, max_dofs));
    }
    if (!bc.any_dirichlet()) {
        throw SingularSystemError("no Dirichlet face: the Poisson operator is singular");
    }
    const auto n = disc.sizes();
    const auto flat = [&](int a, int b, int c) { return a + n[0] * (b + n[1] * c); };
    GridEvaluator grid(patch, disc.points);
    const std::array<std::vector<SpanRange>, 3> elems{element_ranges(disc, 0), element_ranges(disc, 1),
                                                      element_ranges(disc, 2)};
    const int l0 = disc.bases[0].degree() + 1, l1 = disc.bases[1].degree() + 1, l2 = disc.bases[2].degree() + 1;
    const int nloc = l0 * l1 * l2;

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dofs);
    Eigen::MatrixXd ke(nloc, nloc);
    Eigen::VectorXd fe(nloc);
    Eigen::Matrix3Xd grads(3, nloc);
    Eigen::VectorXd vals(nloc);
    std::vector<int> gidx(static_cast<std::size_t>(nloc));

    for (const auto& e2 : elems[2]) {
        for (const auto& e1 : elems[1]) {
            for (const auto& e0 : elems[0]) {
                ke.setZero();
                fe.setZero();
                const int f0 = disc.table[0][static_cast<std::size_t>(e0.q0)].first();
                const int f1 = disc.table[1][static_cast<std::size_t>(e1.q0)].first();
                const int f2 = disc.table[2][static_cast<std::size_t>(e2.q0)].first();
                for (int q2 = e2.q0; q2 < e2.q0 + e2.count; ++q2) {
                    const auto& t2 = disc.table[2][static_cast<std::size_t>(q2)];
                    for (int q1 = e1.q0; q1 < e1.q0 + e1.count; ++q1) {
                        const auto& t1 = disc.table[1][static_cast<std::size_t>(q1)];
                        for (int q0 = e0.q0; q0 < e0.q0 + e0.count; ++q0) {
                            const auto& t0 = disc.table[0][static_cast<std::size_t>(q0)];
                            const auto ms = grid.metric(q0, q1, q2);
                            const double w = disc.weights[0][static_cast<std::size_t>(q0)] *
                                             disc.weights[1][static_cast<std::size_t>(q1)] *
                                             disc.weights[2][static_cast<std::size_t>(q2)] * std::abs(ms.det);
                            const Mat3 jinv_t = ms.jacobian.inverse().transpose();
                            int a = 0;
                            for (int c = 0; c < l2; ++c) {
                                for (int b = 0; b < l1; ++b) {
                                    for (int i = 0; i < l0; ++i, ++a) {
                                        const auto ci = static_cast<std::size_t>(i), cb = static_cast<std::size_t>(b),
                                                   cc = static_cast<std::size_t>(c);
                                        const Vec3 ref(t0.derivs[ci] * t1.values[cb] * t2.values[cc],
                                                       t0.values[ci] * t1.derivs[cb] * t2.values[cc],
                                                       t0.values[ci] * t1.values[cb] * t2.derivs[cc]);
                                        grads.col(a) = jinv_t * ref;
                                        vals(a) = t0.values[ci] * t1.values[cb] * t2.values[cc];
                                    }
                                }
                            }
                            ke.noalias() += w * grads.transpose() * grads;
                            if (f) {
                                fe.noalias() += (w * f(grid.point(q0, q1, q2))) * vals;
                            }
                        }
                    }
                }
                int a = 0;
                for (int c = 0; c < l2; ++c) {
                    for (int b = 0; b < l1; ++b) {
                        for (int i = 0; i < l0; ++i, ++a) {
                            gidx[static_cast<std::size_t>(a)] = flat(f0 + i, f1 + b, f2 + c);
                        }
                    }
                }
                for (int r = 0; r < nloc; ++r) {
                    const int gr = gidx[static_cast<std::size_t>(r)];
                    rhs(gr) += fe(r);
                    for (int s = 0; s < nloc; ++s) {
                        trip.emplace_back(gr, gidx[static_cast<std::size_t>(s)], ke(r, s));
                    }
                }
            }
        }
    }

    ReferenceSystem sys;
    sys.k.resize(dofs, dofs);
    sys.k.setFromTriplets(trip.begin(), trip.end());
    sys.f = std::move(rhs);

    // lift from the per-face boundary coefficients
    sys.lift = Eigen::VectorXd::Zero(dofs);
    const auto coeffs = face_coefficients(patch, disc, bc);
    for (int face = 0; face < 6; ++face) {
        const auto& c = coeffs[static_cast<std::size_t>(face)];
        if (c.size() == 0) {
            continue;
        }
        const int d = face / 2;
        const int pos = face % 2 == 1 ? n[static_cast<std::size_t>(d)] - 1 : 0;
        for (Eigen::Index ia = 0; ia < c.rows(); ++ia) {
            for (Eigen::Index ib = 0; ib < c.cols(); ++ib) {
                const int a = static_cast<int>(ia), b = static_cast<int>(ib);
                const int idx = d == 0 ? flat(pos, a, b) : d == 1 ? flat(a, pos, b) : flat(a, b, pos);
                sys.lift(idx) += c(ia, ib);
            }
        }
    }

    const auto ranges = bc.interior(n);
    std::vector<int> map(static_cast<std::size_t>(dofs), -1);
    for (int c = ranges[2].begin; c < ranges[2].begin + ranges[2].count; ++c) {
        for (int b = ranges[1].begin; b < ranges[1].begin + ranges[1].count; ++b) {
            for (int a = ranges[0].begin; a < ranges[0].begin + ranges[0].count; ++a) {
                map[static_cast<std::size_t>(flat(a, b, c))] = static_cast<int>(sys.interior.size());
                sys.interior.push_back(flat(a, b, c));
            }
        }
    }
    const Eigen::VectorXd full_rhs = sys.f - sys.k * sys.lift;
    const auto ni = static_cast<Eigen::Index>(sys.interior.size());
    sys.f_int.resize(ni);
    for (Eigen::Index i = 0; i < ni; ++i) {
        sys.f_int(i) = full_rhs(sys.interior[static_cast<std::size_t>(i)]);
    }
    std::vector<Eigen::Triplet<double>> itrip;
    for (int col = 0; col < sys.k.outerSize(); ++col) {
        const int jc = map[static_cast<std::size_t>(col)];
        if (jc < 0) {
            continue;
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.k, col); it; ++it) {
            const int ir = map[static_cast<std::size_t>(it.row())];
            if (ir >= 0) {
                itrip.emplace_back(ir, jc, it.value());
            }
        }
    }
    sys.k_int.resize(ni, ni);
    sys.k_int.setFromTriplets(itrip.begin(), itrip.end());
    return sys;
}

ReferenceSolution reference_solve(const ReferenceSystem& sys, double tol) {
    ReferenceSolution out;
    Eigen::VectorXd ui;
    if (sys.k_int.rows() <= kDirectLimit) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.k_int);
        if (ldlt.info() != Eigen::Success) {
            throw SingularSystemError("reference factorization failed");
        }
        ui = ldlt.solve(sys.f_int);
    } else {
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::IncompleteCholesky<double>>
            cg;
        cg.setTolerance(tol);
        cg.setMaxIterations(100000);
        cg.compute(sys.k_int);
        ui = cg.solve(sys.f_int);
        out.iterations = static_cast<int>(cg.iterations());
    }
    const double fn = sys.f_int.norm();
    out.residual = fn > 0 ? (sys.k_int * ui - sys.f_int).norm() / fn : 0.0;
    out.u = sys.lift;
    for (std::size_t i = 0; i < sys.interior.size(); ++i) {
        out.u(sys.interior[i]) += ui(static_cast<Eigen::Index>(i));
    }
    return out;
}

} // namespace ttiga
