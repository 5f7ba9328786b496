#include "ttiga/splines.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ttiga {

KnotVector::KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 0) {
        throw SplineError("knot vector degree must be non-negative");
    }
    const auto p = static_cast<std::size_t>(degree_);
    if (knots_.size() < 2 * p + 2) {
        throw SplineError(fmt::format("knot vector of degree {} needs at least {} knots, got {}", degree_,
                                      2 * p + 2, knots_.size()));
    }
    if (!std::is_sorted(knots_.begin(), knots_.end())) {
        throw SplineError("knot vector must be non-decreasing");
    }
    if (!(knots_.front() < knots_.back())) {
        throw SplineError("knot vector spans an empty interval");
    }
    const auto count = [&](double v) { return static_cast<std::size_t>(std::count(knots_.begin(), knots_.end(), v)); };
    if (count(knots_.front()) != p + 1 || count(knots_.back()) != p + 1) {
        throw SplineError("knot vector must be clamped (end multiplicity exactly p+1)");
    }
    for (std::size_t i = p + 1; i < knots_.size() - p - 1; ++i) {
        if (count(knots_[i]) > p) {
            throw SplineError(fmt::format("interior knot {} exceeds multiplicity {}", knots_[i], degree_));
        }
    }
}

KnotVector KnotVector::uniform(int degree, int spans) {
    if (spans < 1) {
        throw SplineError("uniform knot vector needs at least one span");
    }
    std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
    for (int s = 1; s < spans; ++s) {
        k.push_back(static_cast<double>(s) / spans);
    }
    k.insert(k.end(), static_cast<std::size_t>(degree + 1), 1.0);
    return {std::move(k), degree};
}

KnotVector KnotVector::from_breakpoints(int degree, std::span<const double> interior,
                                        std::span<const int> multiplicities) {
    if (interior.size() != multiplicities.size()) {
        throw SplineError("breakpoints and multiplicities differ in length");
    }
    std::vector<double> k(static_cast<std::size_t>(degree + 1), 0.0);
    for (std::size_t i = 0; i < interior.size(); ++i) {
        k.insert(k.end(), static_cast<std::size_t>(multiplicities[i]), interior[i]);
    }
    k.insert(k.end(), static_cast<std::size_t>(degree + 1), 1.0);
    return {std::move(k), degree};
}

std::vector<double> KnotVector::breakpoints() const {
    std::vector<double> b;
    for (double k : knots_) {
        if (b.empty() || k != b.back()) {
            b.push_back(k);
        }
    }
    return b;
}

int KnotVector::multiplicity(double xi) const {
    return static_cast<int>(std::count(knots_.begin(), knots_.end(), xi));
}

Basis1D::Basis1D(KnotVector kv, std::vector<double> weights) : kv_(std::move(kv)), weights_(std::move(weights)) {
    if (!weights_.empty()) {
        if (static_cast<int>(weights_.size()) != kv_.size()) {
            throw SplineError(fmt::format("basis has {} functions but {} weights", kv_.size(), weights_.size()));
        }
        for (double w : weights_) {
            if (!(w > 0.0)) {
                throw SplineError("NURBS weights must be strictly positive");
            }
        }
    }
}

int find_span(const KnotVector& kv, double xi) {
    if (!(xi >= kv.front() && xi <= kv.back())) {
        throw std::domain_error(fmt::format("parameter {} outside knot range [{}, {}]", xi, kv.front(), kv.back()));
    }
    const int n = kv.size();
    if (xi >= kv[n]) {
        return n - 1;
    }
    auto knots = kv.knots();
    // first knot strictly greater than xi, minus one
    auto it = std::upper_bound(knots.begin() + kv.degree(), knots.begin() + n + 1, xi);
    return static_cast<int>(it - knots.begin()) - 1;
}

BasisEval eval_bspline(const KnotVector& kv, double xi) {
    const int p = kv.degree();
    const int span = find_span(kv, xi);
    const auto np = static_cast<std::size_t>(p + 1);

    // ndu(j, r): upper triangle holds basis values of degree j, lower triangle knot differences
    std::vector<double> ndu(np * np, 0.0);
    auto at = [&](int r, int c) -> double& { return ndu[static_cast<std::size_t>(r) * np + static_cast<std::size_t>(c)]; };
    std::vector<double> left(np), right(np);
    at(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[static_cast<std::size_t>(j)] = xi - kv[span + 1 - j];
        right[static_cast<std::size_t>(j)] = kv[span + j] - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            at(j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
            const double temp = at(j, r) != 0.0 ? at(r, j - 1) / at(j, r) : 0.0;
            at(r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        at(j, j) = saved;
    }

    BasisEval out;
    out.span = span;
    out.values.resize(np);
    out.derivs.assign(np, 0.0);
    for (int r = 0; r <= p; ++r) {
        out.values[static_cast<std::size_t>(r)] = at(r, p);
    }
    if (p == 0) {
        return out;
    }
    // N'_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1}
    for (int r = 0; r <= p; ++r) {
        double d = 0.0;
        if (r >= 1) {
            const double den = at(p, r - 1);
            if (den != 0.0) {
                d += at(r - 1, p - 1) / den;
            }
        }
        if (r <= p - 1) {
            const double den = at(p, r);
            if (den != 0.0) {
                d -= at(r, p - 1) / den;
            }
        }
        out.derivs[static_cast<std::size_t>(r)] = p * d;
    }
    return out;
}

BasisEval eval_basis(const Basis1D& basis, double xi) {
    BasisEval e = eval_bspline(basis.knot_vector(), xi);
    if (!basis.rational()) {
        return e;
    }
    const int first = e.first();
    double w = 0.0, dw = 0.0;
    for (std::size_t r = 0; r < e.values.size(); ++r) {
        const double wi = basis.weight(first + static_cast<int>(r));
        w += e.values[r] * wi;
        dw += e.derivs[r] * wi;
    }
    for (std::size_t r = 0; r < e.values.size(); ++r) {
        const double wi = basis.weight(first + static_cast<int>(r));
        const double n = e.values[r];
        e.values[r] = n * wi / w;
        e.derivs[r] = (e.derivs[r] * w - n * dw) * wi / (w * w);
    }
    return e;
}

Eigen::MatrixXd tabulate(const Basis1D& basis, std::span<const double> points, bool derivative) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), basis.size());
    for (std::size_t q = 0; q < points.size(); ++q) {
        const BasisEval e = eval_basis(basis, points[q]);
        const auto& v = derivative ? e.derivs : e.values;
        for (std::size_t r = 0; r < v.size(); ++r) {
            t(static_cast<Eigen::Index>(q), e.first() + static_cast<Eigen::Index>(r)) = v[r];
        }
    }
    return t;
}

Eigen::VectorXd eval_curve(const Basis1D& basis, const Eigen::MatrixXd& controls, double xi) {
    const BasisEval e = eval_basis(basis, xi);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(controls.cols());
    for (std::size_t r = 0; r < e.values.size(); ++r) {
        x += e.values[r] * controls.row(e.first() + static_cast<Eigen::Index>(r)).transpose();
    }
    return x;
}

std::pair<KnotVector, Eigen::MatrixXd> insert_knot_polynomial(const KnotVector& kv, const Eigen::MatrixXd& controls,
                                                              double xi_new) {
    const int p = kv.degree();
    const int n = kv.size();
    if (controls.rows() != n) {
        throw SplineError(fmt::format("expected {} control rows, got {}", n, controls.rows()));
    }
    if (!(xi_new > kv.front() && xi_new < kv.back())) {
        throw SplineError(fmt::format("knot {} is not strictly inside ({}, {})", xi_new, kv.front(), kv.back()));
    }
    if (kv.multiplicity(xi_new) + 1 > p) {
        throw SplineError(fmt::format("inserting {} would exceed interior multiplicity {}", xi_new, p));
    }
    const int k = find_span(kv, xi_new);

    Eigen::MatrixXd q(n + 1, controls.cols());
    for (int i = 0; i <= n; ++i) {
        if (i <= k - p) {
            q.row(i) = controls.row(i);
        } else if (i >= k + 1) {
            q.row(i) = controls.row(i - 1);
        } else {
            const double alpha = (xi_new - kv[i]) / (kv[i + p] - kv[i]);
            q.row(i) = alpha * controls.row(i) + (1.0 - alpha) * controls.row(i - 1);
        }
    }
    std::vector<double> knots(kv.knots().begin(), kv.knots().end());
    knots.insert(knots.begin() + k + 1, xi_new);
    return {KnotVector(std::move(knots), p), std::move(q)};
}

std::pair<Basis1D, Eigen::MatrixXd> insert_knot(const Basis1D& basis, const Eigen::MatrixXd& controls, double xi_new) {
    if (!basis.rational()) {
        auto [kv, q] = insert_knot_polynomial(basis.knot_vector(), controls, xi_new);
        return {Basis1D(std::move(kv)), std::move(q)};
    }
    const Eigen::Index n = controls.rows();
    const Eigen::Index dim = controls.cols();
    Eigen::MatrixXd homog(n, dim + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = basis.weight(static_cast<int>(i));
        homog.row(i).head(dim) = w * controls.row(i);
        homog(i, dim) = w;
    }
    auto [kv, hq] = insert_knot_polynomial(basis.knot_vector(), homog, xi_new);
    Eigen::MatrixXd q(hq.rows(), dim);
    std::vector<double> weights(static_cast<std::size_t>(hq.rows()));
    for (Eigen::Index i = 0; i < hq.rows(); ++i) {
        weights[static_cast<std::size_t>(i)] = hq(i, dim);
        q.row(i) = hq.row(i).head(dim) / hq(i, dim);
    }
    return {Basis1D(std::move(kv), std::move(weights)), std::move(q)};
}

std::pair<Basis1D, Eigen::MatrixXd> h_refine_uniform(const Basis1D& basis, const Eigen::MatrixXd& controls,
                                                     int levels) {
    if (levels < 0) {
        throw SplineError("refinement levels must be non-negative");
    }
    std::pair<Basis1D, Eigen::MatrixXd> cur{basis, controls};
    for (int l = 0; l < levels; ++l) {
        const auto bp = cur.first.knot_vector().breakpoints();
        for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
            cur = insert_knot(cur.first, cur.second, 0.5 * (bp[s] + bp[s + 1]));
        }
    }
    return cur;
}

KnotVector solution_knots(const KnotVector& geometry, int degree, int elements) {
    if (degree < 1) {
        throw SplineError("solution degree must be at least 1");
    }
    if (elements < 1) {
        throw SplineError("need at least one element per direction");
    }
    const int pg = geometry.degree();
    std::vector<std::pair<double, int>> breaks;
    const auto gbp = geometry.breakpoints();
    for (std::size_t i = 1; i + 1 < gbp.size(); ++i) {
        const int mg = geometry.multiplicity(gbp[i]);
        const int ms = std::clamp(degree - (pg - mg), 1, degree);
        breaks.emplace_back(gbp[i], ms);
    }
    for (int e = 1; e < elements; ++e) {
        const double x = static_cast<double>(e) / elements;
        const bool dup = std::any_of(breaks.begin(), breaks.end(),
                                     [&](const auto& b) { return std::abs(b.first - x) < 1e-12; });
        if (!dup) {
            breaks.emplace_back(x, 1);
        }
    }
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> xs;
    std::vector<int> ms;
    for (const auto& [x, m] : breaks) {
        xs.push_back(x);
        ms.push_back(m);
    }
    return KnotVector::from_breakpoints(degree, xs, ms);
}

std::vector<double> greville(const KnotVector& kv) {
    const int p = kv.degree();
    std::vector<double> g(static_cast<std::size_t>(kv.size()));
    for (int i = 0; i < kv.size(); ++i) {
        double s = 0.0;
        for (int j = 1; j <= p; ++j) {
            s += kv[i + j];
        }
        g[static_cast<std::size_t>(i)] = p > 0 ? s / p : 0.5 * (kv[i] + kv[i + 1]);
    }
    return g;
}

} // namespace ttiga
