#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "ttiga/tt.hpp"
#include "ttiga/tt_amen.hpp"
#include "ttiga/tt_cross.hpp"
#include "ttiga/tt_io.hpp"

using namespace ttiga;

namespace {

const std::vector<std::vector<int>> kShapes{{8, 8, 8}, {3, 7, 5}, {6, 2, 8}, {4, 5}, {2, 3, 2, 3}};

std::vector<int> ranks_for(const std::vector<int>& modes, int r) { return std::vector<int>(modes.size() - 1, r); }

TtMatrix random_matrix(const std::vector<int>& rows, const std::vector<int>& cols, int r, std::uint64_t seed) {
    std::vector<int> fused(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) fused[k] = rows[k] * cols[k];
    return TtMatrix::from_tensor(oracle::random_tt(fused, ranks_for(fused, r), seed), rows, cols);
}

Eigen::MatrixXd dense_mode_product(const Eigen::VectorXd& x, const std::vector<int>& modes,
                                   const std::vector<Eigen::MatrixXd>& mats) {
    // Kronecker of the factors in Fortran order applied to x
    Eigen::MatrixXd k = mats.back();
    for (int d = static_cast<int>(mats.size()) - 2; d >= 0; --d)
        k = Eigen::kroneckerProduct(k, mats[static_cast<std::size_t>(d)]).eval();
    (void)modes;
    return k * x;
}

} // namespace

TEST_CASE("element access and densification agree with TT-SVD") {
    for (std::size_t s = 0; s < kShapes.size(); ++s) {
        const auto& m = kShapes[s];
        const auto t = oracle::random_tt(m, ranks_for(m, 3), 100 + s);
        const Eigen::VectorXd full = t.full();
        CHECK(full.size() == t.full_size());
        // round trip through an independent decomposition
        CHECK(oracle::rel(oracle::tt_from_full(full, m).full(), full) < 1e-12);
        std::vector<int> idx(m.size(), 0);
        for (Eigen::Index flat = 0; flat < full.size(); flat += 7) {
            Eigen::Index rest = flat;
            for (std::size_t k = 0; k < m.size(); ++k) {
                idx[k] = static_cast<int>(rest % m[k]);
                rest /= m[k];
            }
            CHECK(t.element(idx) == doctest::Approx(full(flat)).epsilon(1e-12));
        }
    }
}

TEST_CASE("TT vector arithmetic matches dense arithmetic") {
    for (std::size_t s = 0; s < kShapes.size(); ++s) {
        const auto& m = kShapes[s];
        const auto a = oracle::random_tt(m, ranks_for(m, 3), 200 + s);
        const auto b = oracle::random_tt(m, ranks_for(m, 2), 300 + s);
        const Eigen::VectorXd fa = a.full(), fb = b.full();
        CHECK(oracle::rel(add(a, b).full(), fa + fb) < 1e-12);
        CHECK(oracle::rel(scale(a, -2.5).full(), -2.5 * fa) < 1e-12);
        CHECK(dot(a, b) == doctest::Approx(fa.dot(fb)).epsilon(1e-12));
        CHECK(norm(a) == doctest::Approx(fa.norm()).epsilon(1e-12));
        CHECK(oracle::rel(left_orthogonalize(a).full(), fa) < 1e-12);
        CHECK(oracle::rel(right_orthogonalize(a).full(), fa) < 1e-12);
        std::vector<Eigen::MatrixXd> mats;
        for (std::size_t k = 0; k < m.size(); ++k) mats.push_back(Eigen::MatrixXd::Random(m[k] + 1, m[k]));
        CHECK(oracle::rel(mode_product(a, mats).full(), dense_mode_product(fa, m, mats)) < 1e-12);
    }
}

TEST_CASE("TT operator arithmetic matches dense arithmetic") {
    const std::vector<int> rows{4, 3, 5}, cols{2, 3, 4};
    const auto a = random_matrix(rows, cols, 3, 11);
    const auto b = random_matrix(rows, cols, 2, 12);
    const Eigen::MatrixXd fa = a.full(), fb = b.full();
    CHECK(fa.rows() == 60);
    CHECK(fa.cols() == 24);
    CHECK(oracle::rel(add(a, b).full(), fa + fb) < 1e-12);
    CHECK(oracle::rel(scale(a, 3.0).full(), 3.0 * fa) < 1e-12);
    CHECK(oracle::rel(transpose(a).full(), fa.transpose()) < 1e-12);
    CHECK(norm(a) == doctest::Approx(fa.norm()).epsilon(1e-12));
    const auto x = oracle::random_tt(cols, {2, 2}, 13);
    CHECK(oracle::rel(matvec(a, x).full(), fa * x.full()) < 1e-12);
    CHECK(oracle::rel(round(a, 1e-14).full(), fa) < 1e-12);

    std::vector<Eigen::MatrixXd> f{Eigen::MatrixXd::Random(3, 2), Eigen::MatrixXd::Random(2, 4),
                                   Eigen::MatrixXd::Random(4, 3)};
    CHECK(oracle::rel(TtMatrix::kron(f).full(), oracle::kron3(f[0], f[1], f[2])) < 1e-12);
    CHECK(oracle::rel(TtMatrix::identity({3, 4, 2}).full(), Eigen::MatrixXd::Identity(24, 24)) < 1e-15);
}

TEST_CASE("slicing and padding match dense index selection") {
    const std::vector<int> m{6, 5, 7};
    const auto t = oracle::random_tt(m, {3, 3}, 21);
    const std::vector<IndexRange> r{{1, 4}, {0, 5}, {2, 3}};
    const auto s = slice(t, r);
    const auto p = pad(s, {1, 0, 2}, m);
    const Eigen::VectorXd ft = t.full(), fs = s.full(), fp = p.full();
    for (int k = 0; k < 7; ++k)
        for (int j = 0; j < 5; ++j)
            for (int i = 0; i < 6; ++i) {
                const bool inside = i >= 1 && i < 5 && k >= 2 && k < 5;
                const double want = inside ? ft(i + 6 * (j + 5 * k)) : 0.0;
                CHECK(fp(i + 6 * (j + 5 * k)) == doctest::Approx(want).epsilon(1e-14));
                if (inside) CHECK(fs((i - 1) + 4 * (j + 5 * (k - 2))) == doctest::Approx(want).epsilon(1e-14));
            }
    const auto a = random_matrix({4, 4, 4}, {4, 4, 4}, 2, 22);
    const std::vector<IndexRange> rr{{1, 2}, {0, 4}, {1, 3}};
    const Eigen::MatrixXd sub = slice(a, rr, rr).full();
    std::vector<Eigen::Index> keep;
    for (int k = 1; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 1; i < 3; ++i) keep.push_back(i + 4 * (j + 4 * k));
    CHECK(oracle::rel(sub, a.full()(keep, keep)) < 1e-13);
    CHECK_THROWS_AS(slice(t, {{0, 7}, {0, 5}, {0, 7}}), DimensionError);
}

TEST_CASE("rounding honours its error bound and recovers low ranks") {
    for (std::size_t s = 0; s < kShapes.size(); ++s) {
        const auto& m = kShapes[s];
        const auto t = oracle::random_tt(m, ranks_for(m, 4), 400 + s);
        const double nt = t.full().norm();
        for (double eps : {1e-1, 3e-2, 1e-3, 1e-8}) {
            const auto r = round(t, eps);
            CHECK((r.full() - t.full()).norm() <= eps * nt * (1 + 1e-10));
        }
        // x + x has rank 2r in the sum format but rank r in value
        const auto twice = round(add(t, t), 1e-12);
        CHECK(twice.max_rank() <= t.max_rank());
        CHECK(oracle::rel(twice.full(), 2 * t.full()) < 1e-11);
    }
    const auto capped = round(oracle::random_tt({8, 8, 8}, {6, 6}, 5), 0.0, 2);
    CHECK(capped.max_rank() == 2);
}

TEST_CASE("maxvol selects a dominant submatrix") {
    Eigen::MatrixXd id = Eigen::MatrixXd::Zero(6, 3);
    id(4, 0) = id(1, 1) = id(5, 2) = 1.0;
    auto rows = maxvol(id);
    std::sort(rows.begin(), rows.end());
    CHECK(rows == std::vector<int>{1, 4, 5});

    // every coefficient of M * inv(M[rows]) is bounded by the tolerance
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(40, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    const auto sel = maxvol(m, 1.01);
    const Eigen::MatrixXd b = m * m(sel, Eigen::all).inverse();
    CHECK(b.cwiseAbs().maxCoeff() <= 1.01 + 1e-12);
    // and its volume is no smaller than random alternatives
    const double v = std::abs(m(sel, Eigen::all).determinant());
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<int> pick(40);
        std::iota(pick.begin(), pick.end(), 0);
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(5);
        CHECK(std::abs(m(pick, Eigen::all).determinant()) <= v * 1.01 * std::pow(1.01, 5));
    }

    Eigen::MatrixXd ties = Eigen::MatrixXd::Ones(4, 1);
    CHECK(maxvol(ties) == std::vector<int>{0});
}

TEST_CASE("cross reproduces separable oracles exactly at rank one") {
    CrossOracle o{{9, 7, 8}, [](std::span<const int> i) {
                      return (1.0 + i[0]) * std::cos(0.3 * i[1]) * std::exp(-0.1 * i[2]);
                  }};
    const auto r = tt_cross(o, {.eps = 1e-12, .seed = 1});
    CHECK(r.tt.max_rank() == 1);
    CHECK(r.holdout_error < 1e-13);
    const Eigen::VectorXd f = r.tt.full();
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 7; ++j)
            for (int i = 0; i < 9; ++i) {
                const std::array<int, 3> idx{i, j, k};
                CHECK(f(i + 9 * (j + 7 * k)) == doctest::Approx(o.eval(idx)).epsilon(1e-13));
            }
}

TEST_CASE("cross recovers a sum of two separable terms at rank two") {
    CrossOracle o{{16, 16, 16}, [](std::span<const int> i) {
                      const double x = i[0] / 15.0, y = i[1] / 15.0, z = i[2] / 15.0;
                      return std::sin(1 + x) * (1 + y * y) * std::exp(z) + x * x * std::cos(2 * y) * (2 - z);
                  }};
    const auto r = tt_cross(o, {.eps = 1e-11, .seed = 2});
    CHECK(r.tt.max_rank() <= 2);
    double err = 0, ref = 0;
    const Eigen::VectorXd f = r.tt.full();
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                const std::array<int, 3> idx{i, j, k};
                const double want = o.eval(idx);
                err += std::pow(f(i + 16 * (j + 16 * k)) - want, 2);
                ref += want * want;
            }
    CHECK(std::sqrt(err / ref) < 1e-11);
}

TEST_CASE("cross of an identically zero oracle with a scale floor") {
    CrossOracle o{{10, 10, 10}, [](std::span<const int>) { return 0.0; }};
    const auto r = tt_cross(o, {.eps = 1e-10, .seed = 3, .scale = 1.0});
    CHECK(r.tt.max_rank() == 1);
    CHECK(r.tt.full().norm() < 1e-14);
    CHECK_FALSE(r.warning);
}

TEST_CASE("AMEn solves the identity and a dense Laplacian") {
    const std::vector<int> m{8, 8, 8};
    const auto b = oracle::random_tt(m, {2, 2}, 31);
    const auto id = amen_solve(TtMatrix::identity(m), b, {.eps = 1e-10});
    CHECK(id.converged);
    CHECK(oracle::rel(id.x.full(), b.full()) < 1e-9);

    const Eigen::MatrixXd l = oracle::laplace1d(8), e = Eigen::MatrixXd::Identity(8, 8);
    const auto a = round(add(add(TtMatrix::kron({l, e, e}), TtMatrix::kron({e, l, e})), TtMatrix::kron({e, e, l})), 1e-14);
    for (double eps : {1e-6, 1e-8, 1e-10}) {
        const auto r = amen_solve(a, b, {.eps = eps, .seed = 4});
        CHECK(r.converged);
        // the reported residual is a certificate: recompute it densely
        const Eigen::VectorXd x = r.x.full();
        const double dense_res = (a.full() * x - b.full()).norm() / b.full().norm();
        CHECK(dense_res <= eps * (1 + 1e-6));
        CHECK(r.residual == doctest::Approx(dense_res).epsilon(1e-6).scale(eps));
        const Eigen::VectorXd exact = a.full().llt().solve(b.full());
        CHECK((x - exact).norm() / exact.norm() < 100 * eps);
    }
}

TEST_CASE("AMEn accepts a starting guess and a zero right-hand side") {
    const std::vector<int> m{6, 6, 6};
    const Eigen::MatrixXd l = oracle::laplace1d(6), e = Eigen::MatrixXd::Identity(6, 6);
    const auto a = round(add(add(TtMatrix::kron({l, e, e}), TtMatrix::kron({e, l, e})), TtMatrix::kron({e, e, l})), 1e-14);
    const auto b = TtTensor::ones(m);
    const auto first = amen_solve(a, b, {.eps = 1e-10});
    const auto again = amen_solve(a, b, {.eps = 1e-10}, &first.x);
    CHECK(again.converged);
    CHECK(again.sweeps <= first.sweeps);
    const auto z = amen_solve(a, TtTensor::zeros(m), {.eps = 1e-10});
    CHECK(z.x.full().norm() < 1e-12);
}

TEST_CASE("container round trip is bit exact") {
    const auto t = oracle::random_tt({5, 4, 3}, {2, 3}, 41);
    const auto a = random_matrix({3, 2, 4}, {3, 2, 4}, 2, 42);
    std::stringstream s1, s2;
    write_tt(s1, t);
    write_tt(s2, a);
    const auto t2 = std::get<TtTensor>(read_tt(s1));
    const auto a2 = std::get<TtMatrix>(read_tt(s2));
    CHECK(t2.ranks() == t.ranks());
    CHECK((t2.full() - t.full()).norm() == 0.0);
    CHECK((a2.full() - a.full()).norm() == 0.0);

    // header: magic, kind, d
    std::stringstream s3;
    write_tt(s3, t);
    const std::string bytes = s3.str();
    CHECK(bytes.substr(0, 4) == "TTC1");
    CHECK(bytes.size() == 4 + 4 + 8 + 3 * 8 * 2 + 4 * 8 + 8 * static_cast<std::size_t>(t.parameter_count()));

    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream s4(bad);
    CHECK_THROWS_AS(read_tt(s4), TtIoError);
    std::stringstream s5(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_tt(s5), TtIoError);

    const auto dir = std::filesystem::temp_directory_path() / "ttiga_io_test";
    std::filesystem::create_directories(dir);
    save_tt(dir / "a.ttc", a);
    CHECK((std::get<TtMatrix>(load_tt(dir / "a.ttc")).full() - a.full()).norm() == 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dimension mismatches are rejected") {
    const auto a = oracle::random_tt({3, 4, 5}, {2, 2}, 51);
    const auto b = oracle::random_tt({3, 4, 6}, {2, 2}, 52);
    CHECK_THROWS_AS(add(a, b), DimensionError);
    CHECK_THROWS_AS(dot(a, b), DimensionError);
    CHECK_THROWS_AS(matvec(TtMatrix::identity({3, 4, 6}), a), DimensionError);
}
