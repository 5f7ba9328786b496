#include "ttiga/tt_cross.hpp"
#include "tt_detail.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace ttiga {

std::vector<int> maxvol(const Eigen::MatrixXd& m, double tol, int max_swaps) {
    const auto n = m.rows(), r = m.cols();
    if (r == 0) {
        return {};
    }
    if (r > n) {
        throw DegeneratePivotError(fmt::format("maxvol needs a tall matrix, got {}x{}", n, r));
    }
    if (tol < 1.0) {
        throw std::invalid_argument("maxvol tolerance must be >= 1");
    }
    const double scale = m.cwiseAbs().maxCoeff();

    // initial rows from Gaussian elimination with partial pivoting
    Eigen::MatrixXd a = m;
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    std::vector<int> rows;
    for (Eigen::Index c = 0; c < r; ++c) {
        Eigen::Index piv = -1;
        double best = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!used[static_cast<std::size_t>(i)] && std::abs(a(i, c)) > best) {
                best = std::abs(a(i, c));
                piv = i;
            }
        }
        if (piv < 0 || best <= 1e-14 * scale) {
            throw DegeneratePivotError(fmt::format("maxvol: matrix has numerical rank {} < {}", c, r));
        }
        used[static_cast<std::size_t>(piv)] = 1;
        rows.push_back(static_cast<int>(piv));
        if (c + 1 < r) {
            const Eigen::RowVectorXd prow = a.row(piv).tail(r - c - 1) / a(piv, c);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!used[static_cast<std::size_t>(i)]) {
                    a.row(i).tail(r - c - 1) -= a(i, c) * prow;
                }
            }
        }
    }

    Eigen::MatrixXd sub(r, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        sub.row(j) = m.row(rows[static_cast<std::size_t>(j)]);
    }
    // B = M * inv(sub)
    Eigen::MatrixXd b = sub.transpose().partialPivLu().solve(m.transpose()).transpose();

    const int limit = max_swaps < 0 ? static_cast<int>(100 * r) : max_swaps;
    for (int it = 0; it < limit; ++it) {
        Eigen::Index bi = 0, bj = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < r; ++j) {
                if (std::abs(b(i, j)) > best) {
                    best = std::abs(b(i, j));
                    bi = i;
                    bj = j;
                }
            }
        }
        if (best <= tol) {
            break;
        }
        // swap row bi into slot bj: B -= B(:, j) (B(i, :) - e_j) / B(i, j)
        const Eigen::VectorXd col = b.col(bj);
        Eigen::RowVectorXd row = b.row(bi);
        row(bj) -= 1.0;
        b.noalias() -= col * row / b(bi, bj);
        rows[static_cast<std::size_t>(bj)] = static_cast<int>(bi);
    }
    return rows;
}

namespace {

using Multi = std::vector<int>;

struct Sampler {
    const CrossOracle& oracle;
    long long count = 0;
    Multi buf{};

    double operator()(const Multi& left, int i, const Multi& right) {
        buf.clear();
        buf.insert(buf.end(), left.begin(), left.end());
        buf.push_back(i);
        buf.insert(buf.end(), right.begin(), right.end());
        ++count;
        return oracle.eval(buf);
    }
};

Multi random_tuple(const std::vector<int>& modes, int from, int to, std::mt19937_64& rng) {
    Multi t;
    for (int k = from; k < to; ++k) {
        t.push_back(std::uniform_int_distribution<int>(0, modes[static_cast<std::size_t>(k)] - 1)(rng));
    }
    return t;
}

// Singular-value cutoff used to reveal the numerical rank of each fiber matrix:
// relative to the largest value, but never below `floor`.
int revealed_rank(const Eigen::VectorXd& sigma, double rel, double floor, int cap) {
    if (sigma.size() == 0 || sigma(0) == 0.0) {
        return 0;
    }
    const double cut = std::max(rel * sigma(0), floor);
    int r = 0;
    while (r < sigma.size() && sigma(r) > cut) {
        ++r;
    }
    return std::min(r, cap);
}

double holdout_error(const TtTensor& tt, const std::vector<Multi>& idx, const std::vector<double>& vals, double scale) {
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < idx.size(); ++s) {
        const double e = tt.element(idx[s]) - vals[s];
        num += e * e;
        den += vals[s] * vals[s];
    }
    const double count = static_cast<double>(std::max<std::size_t>(idx.size(), 1));
    den = std::max(den, scale * scale * count);
    if (den == 0.0) {
        return std::sqrt(num / count);
    }
    return std::sqrt(num / den);
}

} // namespace

CrossResult tt_cross(const CrossOracle& oracle, const CrossOptions& opts) {
    if (!(opts.eps > 0.0)) {
        throw std::invalid_argument("cross tolerance must be positive");
    }
    if (opts.rank_cap < 1) {
        throw std::invalid_argument("cross rank cap must be >= 1");
    }
    const auto& modes = oracle.modes;
    const int d = static_cast<int>(modes.size());
    if (d < 1) {
        throw DimensionError("cross needs at least one mode");
    }
    std::mt19937_64 rng(opts.seed);
    Sampler f{oracle, 0, {}};
    CrossResult res;

    std::vector<Multi> hold_idx;
    std::vector<double> hold_val;
    for (int s = 0; s < opts.holdout; ++s) {
        hold_idx.push_back(random_tuple(modes, 0, d, rng));
        hold_val.push_back(oracle.eval(hold_idx.back()));
    }

    if (d == 1) {
        Core3 c(1, modes[0], 1);
        for (int i = 0; i < modes[0]; ++i) {
            c(0, i, 0) = f({}, i, {});
        }
        res.tt = TtTensor({c});
        res.holdout_error = holdout_error(res.tt, hold_idx, hold_val, opts.scale);
        res.converged = true;
        res.evaluations = f.count + opts.holdout;
        return res;
    }

    const double rel_cut = 1e-2 * opts.eps;
    auto floor_for = [&](const Eigen::MatrixXd& m) {
        return rel_cut * opts.scale * std::sqrt(static_cast<double>(m.rows()) * static_cast<double>(m.cols()));
    };
    // left[k]: tuples over modes 0..k-1; right[k]: tuples over modes k..d-1
    std::vector<std::vector<Multi>> left(static_cast<std::size_t>(d + 1)), right(static_cast<std::size_t>(d + 1));
    left[0] = {Multi{}};
    right[static_cast<std::size_t>(d)] = {Multi{}};
    for (int k = d - 1; k >= 1; --k) {
        for (int s = 0; s < opts.init_rank; ++s) {
            right[static_cast<std::size_t>(k)].push_back(random_tuple(modes, k, d, rng));
        }
    }

    std::vector<Core3> cores(static_cast<std::size_t>(d));
    double best_err = INFINITY;
    TtTensor best;
    bool capped = false;

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (int dir = 0; dir < 2; ++dir) {
            bool saturated = true;
            if (dir == 0) {
                // left-to-right: new left index sets and interpolating cores 0..d-2
                for (int k = 0; k + 1 < d; ++k) {
                    const auto& lk = left[static_cast<std::size_t>(k)];
                    std::vector<Multi> cols = right[static_cast<std::size_t>(k + 1)];
                    for (int s = 0; s < opts.kick; ++s) {
                        cols.push_back(random_tuple(modes, k + 1, d, rng));
                    }
                    const int n = modes[static_cast<std::size_t>(k)];
                    const auto nl = static_cast<Eigen::Index>(lk.size());
                    Eigen::MatrixXd c(nl * n, static_cast<Eigen::Index>(cols.size()));
                    for (Eigen::Index b = 0; b < c.cols(); ++b) {
                        for (int i = 0; i < n; ++i) {
                            for (Eigen::Index a = 0; a < nl; ++a) {
                                c(a + nl * i, b) = f(lk[static_cast<std::size_t>(a)], i, cols[static_cast<std::size_t>(b)]);
                            }
                        }
                    }
                    Eigen::BDCSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU);
                    int r = revealed_rank(svd.singularValues(), rel_cut, floor_for(c), opts.rank_cap);
                    std::vector<Multi> next;
                    Eigen::MatrixXd core;
                    if (r == 0) {
                        core = Eigen::MatrixXd::Zero(c.rows(), 1);
                        next.push_back(lk[0]);
                        next.back().push_back(0);
                    } else {
                        const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
                        const auto rows = maxvol(u);
                        Eigen::MatrixXd sub(r, r);
                        for (int j = 0; j < r; ++j) {
                            const int row = rows[static_cast<std::size_t>(j)];
                            sub.row(j) = u.row(row);
                            Multi t = lk[static_cast<std::size_t>(row % nl)];
                            t.push_back(static_cast<int>(row / nl));
                            next.push_back(std::move(t));
                        }
                        core = sub.transpose().partialPivLu().solve(u.transpose()).transpose();
                        if (r == opts.rank_cap && r < std::min<Eigen::Index>(c.rows(), c.cols())) {
                            capped = true;
                        }
                        if (r >= c.cols() && r < c.rows()) {
                            saturated = false;
                        }
                    }
                    cores[static_cast<std::size_t>(k)] = detail::core_from_matrix(
                        core, static_cast<int>(nl), n, static_cast<int>(core.cols()));
                    left[static_cast<std::size_t>(k + 1)] = std::move(next);
                }
                const auto& ll = left[static_cast<std::size_t>(d - 1)];
                const int n = modes[static_cast<std::size_t>(d - 1)];
                Core3 last(static_cast<Eigen::Index>(ll.size()), n, 1);
                for (int i = 0; i < n; ++i) {
                    for (std::size_t a = 0; a < ll.size(); ++a) {
                        last(static_cast<Eigen::Index>(a), i, 0) = f(ll[a], i, {});
                    }
                }
                cores[static_cast<std::size_t>(d - 1)] = std::move(last);
            } else {
                // right-to-left: new right index sets and interpolating cores 1..d-1
                for (int k = d - 1; k >= 1; --k) {
                    const auto& rk = right[static_cast<std::size_t>(k + 1)];
                    std::vector<Multi> rows = left[static_cast<std::size_t>(k)];
                    for (int s = 0; s < opts.kick; ++s) {
                        rows.push_back(random_tuple(modes, 0, k, rng));
                    }
                    const int n = modes[static_cast<std::size_t>(k)];
                    const auto nr = static_cast<Eigen::Index>(rk.size());
                    // transpose of the (rows x n*nr) fiber matrix
                    Eigen::MatrixXd ct(n * nr, static_cast<Eigen::Index>(rows.size()));
                    for (Eigen::Index a = 0; a < ct.cols(); ++a) {
                        for (Eigen::Index b = 0; b < nr; ++b) {
                            for (int i = 0; i < n; ++i) {
                                ct(i + n * b, a) = f(rows[static_cast<std::size_t>(a)], i, rk[static_cast<std::size_t>(b)]);
                            }
                        }
                    }
                    Eigen::BDCSVD<Eigen::MatrixXd> svd(ct, Eigen::ComputeThinU);
                    int r = revealed_rank(svd.singularValues(), rel_cut, floor_for(ct), opts.rank_cap);
                    std::vector<Multi> next;
                    Eigen::MatrixXd coreT;
                    if (r == 0) {
                        coreT = Eigen::MatrixXd::Zero(ct.rows(), 1);
                        Multi t{0};
                        t.insert(t.end(), rk[0].begin(), rk[0].end());
                        next.push_back(std::move(t));
                    } else {
                        const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
                        const auto sel = maxvol(u);
                        Eigen::MatrixXd sub(r, r);
                        for (int j = 0; j < r; ++j) {
                            const int s = sel[static_cast<std::size_t>(j)];
                            sub.row(j) = u.row(s);
                            Multi t{s % n};
                            const auto& tail = rk[static_cast<std::size_t>(s / n)];
                            t.insert(t.end(), tail.begin(), tail.end());
                            next.push_back(std::move(t));
                        }
                        coreT = sub.transpose().partialPivLu().solve(u.transpose()).transpose();
                        if (r == opts.rank_cap && r < std::min<Eigen::Index>(ct.rows(), ct.cols())) {
                            capped = true;
                        }
                        if (r >= ct.cols() && r < ct.rows()) {
                            saturated = false;
                        }
                    }
                    const Eigen::MatrixXd core = coreT.transpose();
                    cores[static_cast<std::size_t>(k)] =
                        detail::core_from_matrix(core, static_cast<int>(core.rows()), n, static_cast<int>(nr));
                    right[static_cast<std::size_t>(k)] = std::move(next);
                }
                const auto& rr = right[1];
                const int n = modes[0];
                Core3 first(1, n, static_cast<Eigen::Index>(rr.size()));
                for (std::size_t b = 0; b < rr.size(); ++b) {
                    for (int i = 0; i < n; ++i) {
                        first(0, i, static_cast<Eigen::Index>(b)) = f({}, i, rr[b]);
                    }
                }
                cores[0] = std::move(first);
            }

            TtTensor tt(cores);
            const double err = holdout_error(tt, hold_idx, hold_val, opts.scale);
            if (err < best_err) {
                best_err = err;
                best = tt;
            }
            res.sweeps = sweep + 1;
            if (err <= opts.eps && saturated) {
                res.converged = true;
                break;
            }
            if (capped && err > opts.eps) {
                break;
            }
        }
        if (res.converged || capped) {
            break;
        }
    }

    TtTensor out = round(best, 0.1 * opts.eps);
    res.holdout_error = holdout_error(out, hold_idx, hold_val, opts.scale);
    if (res.holdout_error > best_err && res.holdout_error > opts.eps) {
        out = best;
        res.holdout_error = best_err;
    }
    res.tt = std::move(out);
    res.evaluations = f.count + opts.holdout;
    res.warning = capped && res.holdout_error > 10.0 * opts.eps;
    return res;
}

} // namespace ttiga
