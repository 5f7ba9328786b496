#pragma once

// Univariate B-spline / NURBS bases: evaluation, first derivatives and
// h-refinement by knot insertion. Parametric domains are normalized to [0,1].

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ttiga {

class SplineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Open (clamped) knot vector of degree p. Interior multiplicities are at most p.
class KnotVector {
public:
    KnotVector() = default;
    KnotVector(std::vector<double> knots, int degree);

    /// Clamped knot vector with `spans` equal spans on [0,1].
    static KnotVector uniform(int degree, int spans);

    /// Knot vector built from interior breakpoints and their multiplicities.
    static KnotVector from_breakpoints(int degree, std::span<const double> interior,
                                       std::span<const int> multiplicities);

    int degree() const noexcept { return degree_; }
    /// Number of basis functions n (= knots - p - 1).
    int size() const noexcept { return static_cast<int>(knots_.size()) - degree_ - 1; }
    std::span<const double> knots() const noexcept { return knots_; }
    double operator[](int i) const { return knots_[static_cast<std::size_t>(i)]; }
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }

    /// Distinct knot values, endpoints included.
    std::vector<double> breakpoints() const;
    /// Multiplicity of a knot value (0 if absent).
    int multiplicity(double xi) const;
    int span_count() const { return static_cast<int>(breakpoints().size()) - 1; }

    bool operator==(const KnotVector&) const = default;

private:
    std::vector<double> knots_;
    int degree_ = 0;
};

/// Univariate basis: B-spline when `weights` is empty, NURBS otherwise.
class Basis1D {
public:
    Basis1D() = default;
    explicit Basis1D(KnotVector kv, std::vector<double> weights = {});

    const KnotVector& knot_vector() const noexcept { return kv_; }
    int degree() const noexcept { return kv_.degree(); }
    int size() const noexcept { return kv_.size(); }
    bool rational() const noexcept { return !weights_.empty(); }
    std::span<const double> weights() const noexcept { return weights_; }
    double weight(int i) const { return rational() ? weights_[static_cast<std::size_t>(i)] : 1.0; }

private:
    KnotVector kv_;
    std::vector<double> weights_;
};

/// The p+1 nonzero basis functions at a parameter, starting at index span - p.
struct BasisEval {
    int span = 0;
    std::vector<double> values;
    std::vector<double> derivs;

    int first() const noexcept { return span - static_cast<int>(values.size()) + 1; }
};

/// Index i with knots[i] <= xi < knots[i+1]; xi = last knot maps to the last nonempty span.
int find_span(const KnotVector& kv, double xi);

/// Polynomial B-spline values and first derivatives (weights ignored).
BasisEval eval_bspline(const KnotVector& kv, double xi);

/// Basis values and first derivatives; rational when the basis carries weights.
BasisEval eval_basis(const Basis1D& basis, double xi);

/// Dense tabulation: rows are points, columns are all n basis functions.
Eigen::MatrixXd tabulate(const Basis1D& basis, std::span<const double> points, bool derivative = false);

/// Evaluates sum_i R_i(xi) P_i for control rows P (n x dim).
Eigen::VectorXd eval_curve(const Basis1D& basis, const Eigen::MatrixXd& controls, double xi);

/// Boehm knot insertion on polynomial coefficients. Rows of `controls` are the
/// n coefficients; columns are independent components.
std::pair<KnotVector, Eigen::MatrixXd> insert_knot_polynomial(const KnotVector& kv,
                                                              const Eigen::MatrixXd& controls,
                                                              double xi_new);

/// Knot insertion for B-spline or NURBS curves (rational insertion runs in
/// homogeneous coordinates). The mapped curve is unchanged.
std::pair<Basis1D, Eigen::MatrixXd> insert_knot(const Basis1D& basis, const Eigen::MatrixXd& controls,
                                                double xi_new);

/// Inserts the midpoint of every nonempty span, `levels` times.
std::pair<Basis1D, Eigen::MatrixXd> h_refine_uniform(const Basis1D& basis, const Eigen::MatrixXd& controls,
                                                     int levels);

/// Solution-space knots of the given degree: `elements` uniform spans merged with the
/// breakpoints of `geometry`, keeping the continuity at geometry breakpoints no
/// higher than the geometry's own.
KnotVector solution_knots(const KnotVector& geometry, int degree, int elements);

/// Greville abscissae (knot averages) of a knot vector.
std::vector<double> greville(const KnotVector& kv);

} // namespace ttiga
