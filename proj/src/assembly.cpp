#include "ttiga/assembly.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace ttiga {

namespace {

constexpr std::array<const char*, 6> kFaceNames{"xi1_min", "xi1_max", "xi2_min", "xi2_max", "xi3_min", "xi3_max"};

std::array<int, 2> tangential(int d) {
    switch (d) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    default: return {0, 1};
    }
}

CrossOptions cross_options(const AssemblyOptions& opts, std::uint64_t salt) {
    CrossOptions c;
    c.eps = opts.eps_cross;
    c.rank_cap = opts.rank_cap;
    c.seed = opts.seed * 1000003u + salt;
    return c;
}

void record(CrossLog* log, std::string what, const CrossResult& r) {
    if (log == nullptr) {
        return;
    }
    log->what = std::move(what);
    log->holdout_error = r.holdout_error;
    log->rank = r.tt.max_rank();
    log->evaluations = r.evaluations;
    log->warning = r.warning;
}

// RMS of ||R||_F / sqrt(3) over a fixed sample of grid points; entries far
// below this are treated as zero by the cross.
double metric_scale(const GridEvaluator& grid, const std::array<int, 3>& q) {
    std::mt19937_64 rng(12345);
    double acc = 0.0;
    constexpr int kSamples = 64;
    for (int s = 0; s < kSamples; ++s) {
        std::array<int, 3> i{};
        for (std::size_t d = 0; d < 3; ++d) {
            i[d] = std::uniform_int_distribution<int>(0, q[d] - 1)(rng);
        }
        acc += grid.metric(i[0], i[1], i[2]).metric.squaredNorm() / 3.0;
    }
    return std::sqrt(acc / kSamples);
}

} // namespace

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
    if (n < 1) {
        throw std::invalid_argument("Gauss-Legendre rule needs at least one point");
    }
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) {
                break;
            }
        }
        const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(n - 1 - i);
        x[lo] = -z;
        x[hi] = z;
        w[lo] = w[hi] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n % 2 == 1) {
        x[static_cast<std::size_t>(n / 2)] = 0.0;
    }
    return {x, w};
}

Eigen::MatrixXd Discretization::dense_table(int dir, bool derivative) const {
    const auto d = static_cast<std::size_t>(dir);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points[d].size()), bases[d].size());
    for (std::size_t q = 0; q < table[d].size(); ++q) {
        const auto& e = table[d][q];
        const auto& v = derivative ? e.derivs : e.values;
        for (std::size_t a = 0; a < v.size(); ++a) {
            m(static_cast<Eigen::Index>(q), e.first() + static_cast<int>(a)) = v[a];
        }
    }
    return m;
}

Discretization build_quadrature(std::array<Basis1D, 3> bases, std::array<int, 3> n_gauss) {
    Discretization disc;
    for (std::size_t d = 0; d < 3; ++d) {
        const auto& basis = bases[d];
        if (basis.rational()) {
            throw std::invalid_argument("solution bases must be polynomial B-splines");
        }
        const int ng = n_gauss[d] > 0 ? n_gauss[d] : basis.degree() + 1;
        disc.n_gauss[d] = ng;
        const auto [gx, gw] = gauss_legendre(ng);
        const auto bp = basis.knot_vector().breakpoints();
        for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
            const double a = bp[s], b = bp[s + 1];
            if (!(b > a)) {
                continue;
            }
            for (int g = 0; g < ng; ++g) {
                const double x = 0.5 * (a + b) + 0.5 * (b - a) * gx[static_cast<std::size_t>(g)];
                disc.points[d].push_back(x);
                disc.weights[d].push_back(0.5 * (b - a) * gw[static_cast<std::size_t>(g)]);
                disc.table[d].push_back(eval_bspline(basis.knot_vector(), x));
            }
        }
    }
    disc.bases = std::move(bases);
    return disc;
}

Discretization make_discretization(const GeometryPatch& patch, std::array<int, 3> degree, std::array<int, 3> elements) {
    std::array<Basis1D, 3> bases;
    for (std::size_t d = 0; d < 3; ++d) {
        bases[d] = Basis1D(solution_knots(patch.knots(static_cast<int>(d)), degree[d], elements[d]));
    }
    return build_quadrature(std::move(bases));
}

Face parse_face(const std::string& name) {
    for (std::size_t i = 0; i < kFaceNames.size(); ++i) {
        if (name == kFaceNames[i]) {
            return static_cast<Face>(i);
        }
    }
    throw std::invalid_argument(fmt::format("unknown face '{}'", name));
}

std::string to_string(Face face) { return kFaceNames[static_cast<std::size_t>(face)]; }

bool BoundarySpec::any_dirichlet() const {
    return std::any_of(faces.begin(), faces.end(), [](const FaceCondition& f) { return f.dirichlet; });
}

std::vector<IndexRange> BoundarySpec::interior(const std::array<int, 3>& sizes) const {
    std::vector<IndexRange> r(3);
    for (std::size_t d = 0; d < 3; ++d) {
        const int lo = faces[2 * d].dirichlet ? 1 : 0;
        const int hi = faces[2 * d + 1].dirichlet ? 1 : 0;
        r[d] = {lo, sizes[d] - lo - hi};
        if (r[d].count < 1) {
            throw SingularSystemError(fmt::format("no interior coefficients left in direction {}", d + 1));
        }
    }
    return r;
}

TtTensor cross_metric_coefficient(const GeometryPatch& patch, const Discretization& disc, int i, int j,
                                  const AssemblyOptions& opts, CrossLog* log) {
    if (i < 0 || i > 2 || j < 0 || j > 2) {
        throw std::out_of_range("metric index out of range");
    }
    GridEvaluator grid(patch, disc.points);
    const auto q = disc.quad_sizes();
    CrossOracle oracle{{q[0], q[1], q[2]}, [&](std::span<const int> idx) {
                           return grid.metric(idx[0], idx[1], idx[2]).metric(i, j);
                       }};
    auto copts = cross_options(opts, static_cast<std::uint64_t>(3 * i + j));
    copts.scale = metric_scale(grid, q);
    const auto res = tt_cross(oracle, copts);
    record(log, fmt::format("R{}{}", i + 1, j + 1), res);
    return res.tt;
}

TtMatrix contract_bilinear(const TtTensor& coef, const Discretization& disc, int i, int j) {
    const auto qs = disc.quad_sizes();
    if (coef.dim() != 3 || coef.modes() != std::vector<int>(qs.begin(), qs.end())) {
        throw DimensionError("coefficient TT does not live on the quadrature grid");
    }
    std::vector<Core4> cores;
    for (int d = 0; d < 3; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const Core3& g = coef.core(d);
        const auto r0 = g.dimension(0), r1 = g.dimension(2);
        const auto n = disc.bases[du].size();
        Core4 out(r0, n, n, r1);
        out.setZero();
        const bool row_deriv = d == i, col_deriv = d == j;
        for (Eigen::Index b = 0; b < r1; ++b) {
            for (std::size_t qi = 0; qi < disc.table[du].size(); ++qi) {
                const auto& e = disc.table[du][qi];
                const auto& lr = row_deriv ? e.derivs : e.values;
                const auto& lc = col_deriv ? e.derivs : e.values;
                const double w = disc.weights[du][qi];
                const auto q = static_cast<Eigen::Index>(qi);
                for (std::size_t ar = 0; ar < lr.size(); ++ar) {
                    const int row = e.first() + static_cast<int>(ar);
                    for (std::size_t ac = 0; ac < lc.size(); ++ac) {
                        const int col = e.first() + static_cast<int>(ac);
                        const double s = w * lr[ar] * lc[ac];
                        for (Eigen::Index a = 0; a < r0; ++a) {
                            out(a, row, col, b) += s * g(a, q, b);
                        }
                    }
                }
            }
        }
        cores.push_back(std::move(out));
    }
    return TtMatrix(std::move(cores));
}

TtMatrix assemble_stiffness(const GeometryPatch& patch, const Discretization& disc, const AssemblyOptions& opts,
                            std::vector<CrossLog>* logs) {
    TtMatrix k;
    bool first = true;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            CrossLog log;
            const TtTensor r = cross_metric_coefficient(patch, disc, i, j, opts, &log);
            if (logs != nullptr) {
                logs->push_back(log);
            }
            // R is symmetric, so K_ji is assembled from the same coefficient
            std::vector<std::pair<int, int>> terms{{i, j}};
            if (j != i) {
                terms.emplace_back(j, i);
            }
            for (const auto& [a, b] : terms) {
                TtMatrix kij = contract_bilinear(r, disc, a, b);
                if (first) {
                    k = round(kij, opts.eps_round);
                    first = false;
                } else {
                    k = round(add(k, kij), opts.eps_round);
                }
            }
        }
    }
    return k;
}

TtTensor assemble_load(const GeometryPatch& patch, const Discretization& disc, const SourceFn& f,
                       const AssemblyOptions& opts, CrossLog* log) {
    const auto sizes = disc.sizes();
    if (!f) {
        return TtTensor::zeros({sizes[0], sizes[1], sizes[2]});
    }
    GridEvaluator grid(patch, disc.points);
    const auto q = disc.quad_sizes();
    CrossOracle oracle{{q[0], q[1], q[2]}, [&](std::span<const int> idx) {
                           const auto m = grid.metric(idx[0], idx[1], idx[2]);
                           return f(grid.point(idx[0], idx[1], idx[2])) * m.det;
                       }};
    const auto res = tt_cross(oracle, cross_options(opts, 97));
    record(log, "FJ", res);
    if (norm(res.tt) == 0.0) {
        return TtTensor::zeros({sizes[0], sizes[1], sizes[2]});
    }
    std::vector<Eigen::MatrixXd> mats;
    for (int d = 0; d < 3; ++d) {
        const auto du = static_cast<std::size_t>(d);
        const Eigen::Map<const Eigen::VectorXd> w(disc.weights[du].data(), static_cast<Eigen::Index>(disc.weights[du].size()));
        mats.push_back(disc.dense_table(d).transpose() * w.asDiagonal());
    }
    return round(mode_product(res.tt, mats), opts.eps_round);
}

std::array<Eigen::MatrixXd, 6> face_coefficients(const GeometryPatch& patch, const Discretization& disc,
                                                 const BoundarySpec& bc) {
    std::array<Eigen::MatrixXd, 6> out;
    const auto sizes = disc.sizes();
    for (int f = 0; f < 6; ++f) {
        const auto& cond = bc.faces[static_cast<std::size_t>(f)];
        if (!cond.dirichlet) {
            continue;
        }
        const int d = f / 2;
        const bool upper = f % 2 == 1;
        const auto [ta, tb] = tangential(d);
        const auto na = sizes[static_cast<std::size_t>(ta)], nb = sizes[static_cast<std::size_t>(tb)];
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(na, nb);
        if (cond.value) {
            const auto& basis_a = disc.bases[static_cast<std::size_t>(ta)];
            const auto& basis_b = disc.bases[static_cast<std::size_t>(tb)];
            const auto ga = greville(basis_a.knot_vector());
            const auto gb = greville(basis_b.knot_vector());
            Eigen::MatrixXd v(na, nb);
            for (int ia = 0; ia < na; ++ia) {
                for (int ib = 0; ib < nb; ++ib) {
                    Param3 xi{};
                    xi[static_cast<std::size_t>(d)] = upper ? 1.0 : 0.0;
                    xi[static_cast<std::size_t>(ta)] = ga[static_cast<std::size_t>(ia)];
                    xi[static_cast<std::size_t>(tb)] = gb[static_cast<std::size_t>(ib)];
                    v(ia, ib) = cond.value(eval_point(patch, xi));
                }
            }
            const Eigen::MatrixXd ba = tabulate(basis_a, ga);
            const Eigen::MatrixXd bbt = tabulate(basis_b, gb).transpose();
            const Eigen::MatrixXd tmp = ba.partialPivLu().solve(v);
            c = bbt.transpose().partialPivLu().solve(tmp.transpose()).transpose();
        }
        // zero the entries already fixed by an earlier Dirichlet face
        for (int g = 0; g < f; ++g) {
            const int e = g / 2;
            if (!bc.faces[static_cast<std::size_t>(g)].dirichlet || e == d) {
                continue;
            }
            const int idx = g % 2 == 1 ? sizes[static_cast<std::size_t>(e)] - 1 : 0;
            if (e == ta) {
                c.row(idx).setZero();
            } else {
                c.col(idx).setZero();
            }
        }
        out[static_cast<std::size_t>(f)] = std::move(c);
    }
    return out;
}

TtTensor dirichlet_lift(const GeometryPatch& patch, const Discretization& disc, const BoundarySpec& bc, double eps) {
    const auto sizes = disc.sizes();
    const std::vector<int> modes{sizes[0], sizes[1], sizes[2]};
    const auto coeffs = face_coefficients(patch, disc, bc);
    TtTensor lift = TtTensor::zeros(modes);
    bool empty = true;
    for (int f = 0; f < 6; ++f) {
        const auto& c = coeffs[static_cast<std::size_t>(f)];
        if (c.size() == 0 || c.cwiseAbs().maxCoeff() == 0.0) {
            continue;
        }
        const int d = f / 2;
        const int pos = f % 2 == 1 ? sizes[static_cast<std::size_t>(d)] - 1 : 0;
        Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();
        int r = 0;
        while (r < s.size() && s(r) > 1e-15 * s(0)) {
            ++r;
        }
        const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
        const Eigen::MatrixXd vt = (svd.matrixV().leftCols(r) * s.head(r).asDiagonal()).transpose();
        const auto na = c.rows(), nb = c.cols();
        std::vector<Core3> cores(3);
        Core3 ucore(1, na, r), vcore(r, nb, 1);
        std::copy(u.data(), u.data() + u.size(), ucore.data());
        std::copy(vt.data(), vt.data() + vt.size(), vcore.data());
        const auto nd = sizes[static_cast<std::size_t>(d)];
        if (d == 1) {
            Core3 mid(r, nd, r);
            mid.setZero();
            for (int a = 0; a < r; ++a) {
                mid(a, pos, a) = 1.0;
            }
            cores = {ucore, mid, vcore};
        } else {
            Core3 unit(1, nd, 1);
            unit.setZero();
            unit(0, pos, 0) = 1.0;
            cores = d == 0 ? std::vector<Core3>{unit, ucore, vcore} : std::vector<Core3>{ucore, vcore, unit};
        }
        const TtTensor term(std::move(cores));
        lift = empty ? term : add(lift, term);
        empty = false;
    }
    return empty ? lift : round(lift, eps);
}

AssembledSystem apply_dirichlet(const TtMatrix& k, const TtTensor& f, const TtTensor& lift, const BoundarySpec& bc,
                                const Discretization& disc, double eps) {
    if (!bc.any_dirichlet()) {
        throw SingularSystemError("no Dirichlet face: the Poisson operator is singular");
    }
    AssembledSystem sys;
    sys.sizes = disc.sizes();
    sys.interior = bc.interior(sys.sizes);
    sys.lift = lift;
    sys.k = slice(k, sys.interior, sys.interior);
    TtTensor rhs = f;
    if (norm(lift) > 0.0) {
        rhs = add(f, scale(matvec(k, lift), -1.0));
    }
    sys.f = round(slice(rhs, sys.interior), eps);
    return sys;
}

} // namespace ttiga
