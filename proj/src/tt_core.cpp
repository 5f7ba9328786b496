#include "ttiga/tt.hpp"
#include "tt_detail.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace ttiga {

using detail::left_view;
using detail::right_view;

namespace detail {

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> thin_qr(const Eigen::MatrixXd& m) {
    const Eigen::Index k = std::min(m.rows(), m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
    Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    return {std::move(q), std::move(r)};
}

Core3 core_from_matrix(const Eigen::MatrixXd& m, int r0, int n, int r1) {
    Core3 c(r0, n, r1);
    std::copy(m.data(), m.data() + m.size(), c.data());
    return c;
}

int truncation_rank(const Eigen::VectorXd& sigma, double delta, int max_rank) {
    const auto n = static_cast<int>(sigma.size());
    int r = n;
    double tail = 0.0;
    while (r > 1) {
        const double s = sigma(r - 1);
        if (tail + s * s > delta * delta) {
            break;
        }
        tail += s * s;
        --r;
    }
    return std::clamp(r, 1, std::max(1, max_rank));
}

} // namespace detail

namespace {

void check_chain(const std::vector<int>& left, const std::vector<int>& right) {
    if (left.empty()) {
        throw DimensionError("a tensor train needs at least one core");
    }
    if (left.front() != 1 || right.back() != 1) {
        throw DimensionError("boundary TT ranks must be 1");
    }
    for (std::size_t k = 0; k + 1 < left.size(); ++k) {
        if (right[k] != left[k + 1]) {
            throw DimensionError(fmt::format("rank mismatch between cores {} and {}: {} vs {}", k, k + 1, right[k],
                                             left[k + 1]));
        }
    }
}

void check_same_modes(const std::vector<int>& a, const std::vector<int>& b, const char* what) {
    if (a != b) {
        throw DimensionError(fmt::format("{}: mode sizes differ", what));
    }
}

} // namespace

// ---------------------------------------------------------------- TtTensor

TtTensor::TtTensor(std::vector<Core3> cores) : cores_(std::move(cores)) {
    std::vector<int> l, r;
    for (const auto& c : cores_) {
        l.push_back(static_cast<int>(c.dimension(0)));
        r.push_back(static_cast<int>(c.dimension(2)));
    }
    check_chain(l, r);
}

TtTensor TtTensor::zeros(const std::vector<int>& modes) {
    std::vector<Core3> cores;
    for (int n : modes) {
        Core3 c(1, n, 1);
        c.setZero();
        cores.push_back(std::move(c));
    }
    return TtTensor(std::move(cores));
}

TtTensor TtTensor::ones(const std::vector<int>& modes) {
    std::vector<Core3> cores;
    for (int n : modes) {
        Core3 c(1, n, 1);
        c.setConstant(1.0);
        cores.push_back(std::move(c));
    }
    return TtTensor(std::move(cores));
}

TtTensor TtTensor::rank_one(const std::vector<Eigen::VectorXd>& factors) {
    std::vector<Core3> cores;
    for (const auto& f : factors) {
        cores.push_back(detail::core_from_matrix(f, 1, static_cast<int>(f.size()), 1));
    }
    return TtTensor(std::move(cores));
}

TtTensor TtTensor::random(const std::vector<int>& modes, const std::vector<int>& ranks, std::mt19937_64& rng) {
    if (ranks.size() + 1 != modes.size()) {
        throw DimensionError("random TT needs d-1 interior ranks");
    }
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Core3> cores;
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const int r0 = k == 0 ? 1 : ranks[k - 1];
        const int r1 = k + 1 == modes.size() ? 1 : ranks[k];
        Core3 c(r0, modes[k], r1);
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            c.data()[i] = g(rng);
        }
        cores.push_back(std::move(c));
    }
    return TtTensor(std::move(cores));
}

std::vector<int> TtTensor::modes() const {
    std::vector<int> m;
    for (const auto& c : cores_) {
        m.push_back(static_cast<int>(c.dimension(1)));
    }
    return m;
}

std::vector<int> TtTensor::ranks() const {
    std::vector<int> r{1};
    for (const auto& c : cores_) {
        r.push_back(static_cast<int>(c.dimension(2)));
    }
    return r;
}

int TtTensor::max_rank() const {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
}

long long TtTensor::parameter_count() const {
    long long s = 0;
    for (const auto& c : cores_) {
        s += c.size();
    }
    return s;
}

long long TtTensor::full_size() const {
    long long s = 1;
    for (int n : modes()) {
        s *= n;
    }
    return s;
}

double TtTensor::element(std::span<const int> index) const {
    if (static_cast<int>(index.size()) != dim()) {
        throw DimensionError("index length differs from TT order");
    }
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (int k = 0; k < dim(); ++k) {
        const auto& c = cores_[static_cast<std::size_t>(k)];
        const auto r0 = c.dimension(0), n = c.dimension(1), r1 = c.dimension(2);
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(r1);
        const int i = index[static_cast<std::size_t>(k)];
        for (Eigen::Index b = 0; b < r1; ++b) {
            for (Eigen::Index a = 0; a < r0; ++a) {
                next(b) += v(a) * c.data()[a + r0 * (i + n * b)];
            }
        }
        v = std::move(next);
    }
    return v(0);
}

Eigen::VectorXd TtTensor::full() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Ones(1, 1);
    for (const auto& c : cores_) {
        const auto n = c.dimension(1), r1 = c.dimension(2);
        Eigen::MatrixXd prod = m * right_view(c);
        m = Eigen::Map<Eigen::MatrixXd>(prod.data(), prod.rows() * n, r1);
    }
    return m.col(0);
}

// ---------------------------------------------------------------- TtMatrix

TtMatrix::TtMatrix(std::vector<Core4> cores) : cores_(std::move(cores)) {
    std::vector<int> l, r;
    for (const auto& c : cores_) {
        l.push_back(static_cast<int>(c.dimension(0)));
        r.push_back(static_cast<int>(c.dimension(3)));
    }
    check_chain(l, r);
}

TtMatrix TtMatrix::identity(const std::vector<int>& modes) {
    std::vector<Eigen::MatrixXd> f;
    for (int n : modes) {
        f.push_back(Eigen::MatrixXd::Identity(n, n));
    }
    return kron(f);
}

TtMatrix TtMatrix::kron(const std::vector<Eigen::MatrixXd>& factors) {
    std::vector<Core4> cores;
    for (const auto& f : factors) {
        Core4 c(1, f.rows(), f.cols(), 1);
        for (Eigen::Index j = 0; j < f.cols(); ++j) {
            for (Eigen::Index i = 0; i < f.rows(); ++i) {
                c(0, i, j, 0) = f(i, j);
            }
        }
        cores.push_back(std::move(c));
    }
    return TtMatrix(std::move(cores));
}

std::vector<int> TtMatrix::row_modes() const {
    std::vector<int> m;
    for (const auto& c : cores_) {
        m.push_back(static_cast<int>(c.dimension(1)));
    }
    return m;
}

std::vector<int> TtMatrix::col_modes() const {
    std::vector<int> m;
    for (const auto& c : cores_) {
        m.push_back(static_cast<int>(c.dimension(2)));
    }
    return m;
}

std::vector<int> TtMatrix::ranks() const {
    std::vector<int> r{1};
    for (const auto& c : cores_) {
        r.push_back(static_cast<int>(c.dimension(3)));
    }
    return r;
}

int TtMatrix::max_rank() const {
    const auto r = ranks();
    return *std::max_element(r.begin(), r.end());
}

long long TtMatrix::parameter_count() const {
    long long s = 0;
    for (const auto& c : cores_) {
        s += c.size();
    }
    return s;
}

long long TtMatrix::full_size() const {
    long long s = 1;
    for (const auto& c : cores_) {
        s *= c.dimension(1) * c.dimension(2);
    }
    return s;
}

TtTensor TtMatrix::as_tensor() const {
    std::vector<Core3> cores;
    for (const auto& c : cores_) {
        Core3 t = c.reshape(Eigen::array<Eigen::Index, 3>{c.dimension(0), c.dimension(1) * c.dimension(2), c.dimension(3)});
        cores.push_back(std::move(t));
    }
    return TtTensor(std::move(cores));
}

TtMatrix TtMatrix::from_tensor(const TtTensor& t, const std::vector<int>& row_modes, const std::vector<int>& col_modes) {
    if (static_cast<int>(row_modes.size()) != t.dim() || static_cast<int>(col_modes.size()) != t.dim()) {
        throw DimensionError("row/col mode lists must match the TT order");
    }
    std::vector<Core4> cores;
    for (int k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        const auto ks = static_cast<std::size_t>(k);
        if (c.dimension(1) != row_modes[ks] * col_modes[ks]) {
            throw DimensionError("fused mode size differs from rows * cols");
        }
        Core4 m = c.reshape(Eigen::array<Eigen::Index, 4>{c.dimension(0), row_modes[ks], col_modes[ks], c.dimension(2)});
        cores.push_back(std::move(m));
    }
    return TtMatrix(std::move(cores));
}

Eigen::MatrixXd TtMatrix::full() const {
    const auto rm = row_modes(), cm = col_modes();
    long long rows = 1, cols = 1;
    for (std::size_t k = 0; k < rm.size(); ++k) {
        rows *= rm[k];
        cols *= cm[k];
    }
    const Eigen::VectorXd v = as_tensor().full();
    Eigen::MatrixXd out(rows, cols);
    const std::size_t d = rm.size();
    std::vector<int> idx(d, 0);
    for (Eigen::Index f = 0; f < v.size(); ++f) {
        long long rest = f, row = 0, col = 0, rs = 1, cs = 1;
        for (std::size_t k = 0; k < d; ++k) {
            const long long fused = rest % (static_cast<long long>(rm[k]) * cm[k]);
            rest /= static_cast<long long>(rm[k]) * cm[k];
            row += (fused % rm[k]) * rs;
            col += (fused / rm[k]) * cs;
            rs *= rm[k];
            cs *= cm[k];
        }
        out(row, col) = v(f);
    }
    return out;
}

// ---------------------------------------------------------------- orthogonalization and rounding

TtTensor left_orthogonalize(const TtTensor& t) {
    auto cores = t.cores();
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
        const auto r0 = cores[k].dimension(0), n = cores[k].dimension(1);
        auto [q, r] = detail::thin_qr(left_view(cores[k]));
        cores[k] = detail::core_from_matrix(q, static_cast<int>(r0), static_cast<int>(n), static_cast<int>(q.cols()));
        const auto n1 = cores[k + 1].dimension(1), r2 = cores[k + 1].dimension(2);
        Eigen::MatrixXd next = r * right_view(cores[k + 1]);
        cores[k + 1] = detail::core_from_matrix(next, static_cast<int>(r.rows()), static_cast<int>(n1), static_cast<int>(r2));
    }
    return TtTensor(std::move(cores));
}

TtTensor right_orthogonalize(const TtTensor& t) {
    auto cores = t.cores();
    for (std::size_t k = cores.size() - 1; k > 0; --k) {
        const auto n = cores[k].dimension(1), r1 = cores[k].dimension(2);
        auto [q, r] = detail::thin_qr(right_view(cores[k]).transpose());
        Eigen::MatrixXd qt = q.transpose();
        cores[k] = detail::core_from_matrix(qt, static_cast<int>(qt.rows()), static_cast<int>(n), static_cast<int>(r1));
        const auto p0 = cores[k - 1].dimension(0), pn = cores[k - 1].dimension(1);
        Eigen::MatrixXd prev = left_view(cores[k - 1]) * r.transpose();
        cores[k - 1] = detail::core_from_matrix(prev, static_cast<int>(p0), static_cast<int>(pn), static_cast<int>(prev.cols()));
    }
    return TtTensor(std::move(cores));
}

TtTensor round(const TtTensor& t, double eps, int max_rank) {
    if (!(eps >= 0.0)) {
        throw std::invalid_argument("rounding tolerance must be non-negative");
    }
    TtTensor ro = right_orthogonalize(t);
    auto cores = ro.cores();
    const double nrm = Eigen::Map<const Eigen::VectorXd>(cores[0].data(), cores[0].size()).norm();
    if (nrm == 0.0) {
        return TtTensor::zeros(t.modes());
    }
    const int d = t.dim();
    const double delta = d > 1 ? eps / std::sqrt(static_cast<double>(d - 1)) * nrm : 0.0;
    for (std::size_t k = 0; k + 1 < cores.size(); ++k) {
        const auto r0 = cores[k].dimension(0), n = cores[k].dimension(1);
        Eigen::BDCSVD<Eigen::MatrixXd> svd(left_view(cores[k]), Eigen::ComputeThinU | Eigen::ComputeThinV);
        const int r = detail::truncation_rank(svd.singularValues(), delta, max_rank);
        Eigen::MatrixXd u = svd.matrixU().leftCols(r);
        Eigen::MatrixXd sv = svd.singularValues().head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
        cores[k] = detail::core_from_matrix(u, static_cast<int>(r0), static_cast<int>(n), r);
        const auto n1 = cores[k + 1].dimension(1), r2 = cores[k + 1].dimension(2);
        Eigen::MatrixXd next = sv * right_view(cores[k + 1]);
        cores[k + 1] = detail::core_from_matrix(next, r, static_cast<int>(n1), static_cast<int>(r2));
    }
    return TtTensor(std::move(cores));
}

TtMatrix round(const TtMatrix& t, double eps, int max_rank) {
    return TtMatrix::from_tensor(round(t.as_tensor(), eps, max_rank), t.row_modes(), t.col_modes());
}

// ---------------------------------------------------------------- arithmetic

TtTensor add(const TtTensor& a, const TtTensor& b) {
    check_same_modes(a.modes(), b.modes(), "tt add");
    const int d = a.dim();
    if (d == 1) {
        Core3 c = a.core(0) + b.core(0);
        return TtTensor({c});
    }
    std::vector<Core3> cores;
    for (int k = 0; k < d; ++k) {
        const auto& ca = a.core(k);
        const auto& cb = b.core(k);
        const auto n = ca.dimension(1);
        const auto a0 = ca.dimension(0), a1 = ca.dimension(2), b0 = cb.dimension(0), b1 = cb.dimension(2);
        const bool first = k == 0, last = k == d - 1;
        const auto r0 = first ? 1 : a0 + b0;
        const auto r1 = last ? 1 : a1 + b1;
        Core3 c(r0, n, r1);
        c.setZero();
        const Eigen::array<Eigen::Index, 3> ea{a0, n, a1}, eb{b0, n, b1};
        c.slice(Eigen::array<Eigen::Index, 3>{0, 0, 0}, ea) = ca;
        c.slice(Eigen::array<Eigen::Index, 3>{first ? 0 : a0, 0, last ? 0 : a1}, eb) = cb;
        cores.push_back(std::move(c));
    }
    return TtTensor(std::move(cores));
}

TtMatrix add(const TtMatrix& a, const TtMatrix& b) {
    check_same_modes(a.row_modes(), b.row_modes(), "tt add (rows)");
    check_same_modes(a.col_modes(), b.col_modes(), "tt add (cols)");
    return TtMatrix::from_tensor(add(a.as_tensor(), b.as_tensor()), a.row_modes(), a.col_modes());
}

TtTensor scale(const TtTensor& a, double c) {
    auto cores = a.cores();
    Core3 first = cores[0] * c;
    cores[0] = std::move(first);
    return TtTensor(std::move(cores));
}

TtMatrix scale(const TtMatrix& a, double c) {
    auto cores = a.cores();
    Core4 first = cores[0] * c;
    cores[0] = std::move(first);
    return TtMatrix(std::move(cores));
}

double dot(const TtTensor& a, const TtTensor& b) {
    check_same_modes(a.modes(), b.modes(), "tt dot");
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(1, 1);
    for (int k = 0; k < a.dim(); ++k) {
        const auto& ca = a.core(k);
        const auto& cb = b.core(k);
        const auto n = ca.dimension(1);
        Eigen::MatrixXd tmp = w * right_view(cb); // (ra, n * rb')
        Eigen::Map<Eigen::MatrixXd> tm(tmp.data(), ca.dimension(0) * n, cb.dimension(2));
        w = left_view(ca).transpose() * tm;
    }
    return w(0, 0);
}

double norm(const TtTensor& a) {
    const TtTensor lo = left_orthogonalize(a);
    const auto& c = lo.core(lo.dim() - 1);
    return Eigen::Map<const Eigen::VectorXd>(c.data(), c.size()).norm();
}

double norm(const TtMatrix& a) { return norm(a.as_tensor()); }

TtTensor matvec(const TtMatrix& a, const TtTensor& x) {
    check_same_modes(a.col_modes(), x.modes(), "tt matvec");
    std::vector<Core3> cores;
    for (int k = 0; k < a.dim(); ++k) {
        const Core4& ca = a.core(k);
        const Core3& cx = x.core(k);
        const auto ra0 = ca.dimension(0), n = ca.dimension(1), ra1 = ca.dimension(3);
        const auto rx0 = cx.dimension(0), rx1 = cx.dimension(2);
        // (ra0, n, ra1, rx0, rx1) -> (rx0, ra0, n, rx1, ra1)
        const Eigen::array<Eigen::IndexPair<int>, 1> dims{Eigen::IndexPair<int>(2, 1)};
        Eigen::Tensor<double, 5> t = ca.contract(cx, dims).shuffle(Eigen::array<int, 5>{3, 0, 1, 4, 2});
        Core3 c = t.reshape(Eigen::array<Eigen::Index, 3>{rx0 * ra0, n, rx1 * ra1});
        cores.push_back(std::move(c));
    }
    return TtTensor(std::move(cores));
}

TtMatrix transpose(const TtMatrix& a) {
    std::vector<Core4> cores;
    for (const auto& c : a.cores()) {
        Core4 t = c.shuffle(Eigen::array<int, 4>{0, 2, 1, 3});
        cores.push_back(std::move(t));
    }
    return TtMatrix(std::move(cores));
}

// ---------------------------------------------------------------- slicing

TtTensor slice(const TtTensor& t, const std::vector<IndexRange>& ranges) {
    if (static_cast<int>(ranges.size()) != t.dim()) {
        throw DimensionError("slice needs one range per mode");
    }
    std::vector<Core3> cores;
    for (int k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        const auto& r = ranges[static_cast<std::size_t>(k)];
        if (r.begin < 0 || r.count < 1 || r.begin + r.count > c.dimension(1)) {
            throw DimensionError(fmt::format("slice range [{}, {}) outside mode {} of size {}", r.begin,
                                             r.begin + r.count, k, c.dimension(1)));
        }
        Core3 s = c.slice(Eigen::array<Eigen::Index, 3>{0, r.begin, 0},
                          Eigen::array<Eigen::Index, 3>{c.dimension(0), r.count, c.dimension(2)});
        cores.push_back(std::move(s));
    }
    return TtTensor(std::move(cores));
}

TtMatrix slice(const TtMatrix& t, const std::vector<IndexRange>& rows, const std::vector<IndexRange>& cols) {
    if (static_cast<int>(rows.size()) != t.dim() || static_cast<int>(cols.size()) != t.dim()) {
        throw DimensionError("slice needs one row and one column range per mode");
    }
    std::vector<Core4> cores;
    for (int k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        const auto& r = rows[static_cast<std::size_t>(k)];
        const auto& q = cols[static_cast<std::size_t>(k)];
        if (r.begin < 0 || r.count < 1 || r.begin + r.count > c.dimension(1) || q.begin < 0 || q.count < 1 ||
            q.begin + q.count > c.dimension(2)) {
            throw DimensionError(fmt::format("slice range outside mode {}", k));
        }
        Core4 s = c.slice(Eigen::array<Eigen::Index, 4>{0, r.begin, q.begin, 0},
                          Eigen::array<Eigen::Index, 4>{c.dimension(0), r.count, q.count, c.dimension(3)});
        cores.push_back(std::move(s));
    }
    return TtMatrix(std::move(cores));
}

TtTensor pad(const TtTensor& t, const std::vector<int>& offsets, const std::vector<int>& modes) {
    if (static_cast<int>(offsets.size()) != t.dim() || static_cast<int>(modes.size()) != t.dim()) {
        throw DimensionError("pad needs one offset and size per mode");
    }
    std::vector<Core3> cores;
    for (int k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        const auto ks = static_cast<std::size_t>(k);
        if (offsets[ks] < 0 || offsets[ks] + c.dimension(1) > modes[ks]) {
            throw DimensionError(fmt::format("pad: mode {} does not fit", k));
        }
        Core3 p(c.dimension(0), modes[ks], c.dimension(2));
        p.setZero();
        p.slice(Eigen::array<Eigen::Index, 3>{0, offsets[ks], 0}, c.dimensions()) = c;
        cores.push_back(std::move(p));
    }
    return TtTensor(std::move(cores));
}

TtTensor mode_product(const TtTensor& t, const std::vector<Eigen::MatrixXd>& mats) {
    if (static_cast<int>(mats.size()) != t.dim()) {
        throw DimensionError("mode_product needs one matrix per mode");
    }
    std::vector<Core3> cores;
    for (int k = 0; k < t.dim(); ++k) {
        const auto& c = t.core(k);
        const auto& m = mats[static_cast<std::size_t>(k)];
        if (m.cols() != c.dimension(1)) {
            throw DimensionError(fmt::format("mode_product: matrix {} has {} columns, mode has {}", k, m.cols(),
                                             c.dimension(1)));
        }
        Eigen::TensorMap<const Eigen::Tensor<double, 2>> mt(m.data(), m.rows(), m.cols());
        const Eigen::array<Eigen::IndexPair<int>, 1> dims{Eigen::IndexPair<int>(1, 1)};
        Core3 out = c.contract(mt, dims).shuffle(Eigen::array<int, 3>{0, 2, 1});
        cores.push_back(std::move(out));
    }
    return TtTensor(std::move(cores));
}

} // namespace ttiga
