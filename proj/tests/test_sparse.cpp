#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "gfar/cholesky.hpp"
#include "gfar/rng.hpp"
#include "gfar/sparse_matrix.hpp"
#include "oracles.hpp"

using gfar::NotPositiveDefiniteError;
using gfar::SparseSym;
using gfar::TraceMode;
using gfar::ValidationError;

namespace {

SparseSym tridiag(int p, double diag, double off) {
  std::vector<SparseSym::Triplet> t;
  for (int i = 0; i < p; ++i) {
    t.emplace_back(i, i, diag);
    if (i + 1 < p) {
      t.emplace_back(i, i + 1, off);
      t.emplace_back(i + 1, i, off);
    }
  }
  return SparseSym::from_triplets(p, t);
}

}  // namespace

TEST_CASE("identity and trace") {
  const SparseSym eye = SparseSym::identity(5);
  CHECK(eye.dim() == 5);
  CHECK(eye.nonzeros() == 5);
  CHECK(eye.trace() == doctest::Approx(5.0));
  CHECK(oracle::densify(eye).isApprox(Eigen::MatrixXd::Identity(5, 5)));
}

TEST_CASE("construction rejects bad input") {
  SUBCASE("non-square") {
    Eigen::SparseMatrix<double> m(2, 3);
    CHECK_THROWS_AS(SparseSym{m}, ValidationError);
  }
  SUBCASE("asymmetric pattern") {
    std::vector<SparseSym::Triplet> t{{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 0.5}};
    CHECK_THROWS_AS(SparseSym::from_triplets(2, t), ValidationError);
  }
  SUBCASE("asymmetric values") {
    std::vector<SparseSym::Triplet> t{{0, 0, 1.0}, {1, 1, 1.0}, {0, 1, 0.5}, {1, 0, 0.25}};
    CHECK_THROWS_AS(SparseSym::from_triplets(2, t), ValidationError);
  }
  SUBCASE("non-finite values") {
    std::vector<SparseSym::Triplet> t{{0, 0, std::nan("")}};
    CHECK_THROWS_AS(SparseSym::from_triplets(1, t), ValidationError);
  }
  SUBCASE("triplet out of range") {
    std::vector<SparseSym::Triplet> t{{0, 3, 1.0}};
    CHECK_THROWS_AS(SparseSym::from_triplets(2, t), ValidationError);
  }
}

TEST_CASE("duplicate triplets are summed") {
  std::vector<SparseSym::Triplet> t{{0, 0, 1.0}, {0, 0, 2.0}, {1, 1, 1.0}};
  const SparseSym m = SparseSym::from_triplets(2, t);
  CHECK(oracle::densify(m)(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("add_scaled matches the dense sum on random instances") {
  gfar::Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + static_cast<int>(rng.uniform_below(40));
    const SparseSym a = oracle::random_spd(p, rng);
    const SparseSym b = oracle::random_spd(p, rng);
    const double s = -2.0 + 4.0 * rng.uniform01();
    const SparseSym c = gfar::add_scaled(a, s, b);
    const Eigen::MatrixXd want = oracle::densify(a) + s * oracle::densify(b);
    CHECK((oracle::densify(c) - want).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("pattern sum reuses one pattern across combines") {
  gfar::Rng rng(7);
  const int p = 30;
  const SparseSym a = oracle::random_spd(p, rng);
  const SparseSym b = oracle::random_spd(p, rng);
  gfar::PatternSum sum(a, b);

  const std::uint64_t fp = sum.result().pattern_fingerprint();
  for (double s : {0.0, 0.5, 3.0, 1e6}) {
    const SparseSym& c = sum.combine(a, s, b);
    CHECK(c.pattern_fingerprint() == fp);
    const Eigen::MatrixXd want = oracle::densify(a) + s * oracle::densify(b);
    CHECK((oracle::densify(c) - want).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("operand with a different pattern is rejected") {
    const SparseSym other = oracle::random_spd(p, rng);
    CHECK_THROWS_AS(sum.combine(other, 1.0, b), ValidationError);
  }
  SUBCASE("non-finite scale is rejected") {
    CHECK_THROWS_AS(sum.combine(a, std::nan(""), b), ValidationError);
  }
}

TEST_CASE("pattern fingerprint tracks structure, not values") {
  const SparseSym a = tridiag(6, 2.0, -1.0);
  const SparseSym b = tridiag(6, 5.0, -0.25);
  const SparseSym c = SparseSym::identity(6);
  CHECK(a.pattern_fingerprint() == b.pattern_fingerprint());
  CHECK(a.same_pattern(b));
  CHECK(a.pattern_fingerprint() != c.pattern_fingerprint());
  CHECK(!a.same_pattern(c));
}

TEST_CASE("matrix market symmetric qualifier mirrors the triangle") {
  std::istringstream in(
      "%%MatrixMarket matrix coordinate real symmetric\n"
      "% comment line\n"
      "3 3 4\n"
      "1 1 2.0\n"
      "2 2 2.0\n"
      "3 3 2.0\n"
      "2 1 -0.5\n");
  const SparseSym m = gfar::read_matrix_market_sym(in, "test");
  CHECK(m.dim() == 3);
  CHECK(m.nonzeros() == 5);
  const Eigen::MatrixXd d = oracle::densify(m);
  CHECK(d(0, 1) == doctest::Approx(-0.5));
  CHECK(d(1, 0) == doctest::Approx(-0.5));
}

TEST_CASE("matrix market general requires both triangles") {
  SUBCASE("symmetric general accepted") {
    std::istringstream in(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 4\n"
        "1 1 2\n"
        "2 2 2\n"
        "1 2 -1\n"
        "2 1 -1\n");
    CHECK_NOTHROW(gfar::read_matrix_market_sym(in, "test"));
  }
  SUBCASE("asymmetric rejected") {
    std::istringstream in(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 3\n"
        "1 1 2\n"
        "2 2 2\n"
        "1 2 -1\n");
    CHECK_THROWS_AS(gfar::read_matrix_market_sym(in, "test"), ValidationError);
  }
}

TEST_CASE("matrix market rejects malformed input") {
  auto reject = [](const char* text) {
    std::istringstream in(text);
    CHECK_THROWS_AS(gfar::read_matrix_market_sym(in, "test"), ValidationError);
  };
  reject("not a banner\n1 1 1\n1 1 1.0\n");
  reject("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n");
  reject("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1.0 0.0\n");
  reject("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n1 1 2.0\n");
  reject("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n");
  reject("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n");
}

TEST_CASE("matrix market round trip") {
  gfar::Rng rng(55);
  const SparseSym a = oracle::random_spd(25, rng);
  std::ostringstream out;
  gfar::write_matrix_market_sym(out, a);
  std::istringstream in(out.str());
  const SparseSym b = gfar::read_matrix_market_sym(in, "roundtrip");
  CHECK(a.same_pattern(b));
  CHECK((oracle::densify(a) - oracle::densify(b)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("solve matches the dense solution on random SPD instances") {
  gfar::Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + static_cast<int>(rng.uniform_below(60));
    const SparseSym a = oracle::random_spd(p, rng);
    gfar::SparseCholesky chol(a);
    chol.refactor(a);
    const Eigen::VectorXd b = oracle::random_vector(p, rng);
    const Eigen::VectorXd x = chol.solve(b);
    const Eigen::VectorXd want = oracle::dense_solve(oracle::densify(a), b);
    CHECK((x - want).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, want.cwiseAbs().maxCoeff()));
    CHECK((oracle::densify(a) * x - b).cwiseAbs().maxCoeff() <
          1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("multi-column solve equals column-by-column solves") {
  gfar::Rng rng(31);
  const int p = 40;
  const SparseSym a = oracle::random_spd(p, rng);
  gfar::SparseCholesky chol(a);
  chol.refactor(a);
  Eigen::MatrixXd rhs(p, 7);
  for (int c = 0; c < rhs.cols(); ++c) rhs.col(c) = oracle::random_vector(p, rng);
  const Eigen::MatrixXd block = chol.solve(rhs);
  for (int c = 0; c < rhs.cols(); ++c) {
    const Eigen::VectorXd single = chol.solve(Eigen::VectorXd(rhs.col(c)));
    CHECK((block.col(c) - single).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("non positive definite matrices report the offending pivot") {
  SUBCASE("diagonal case") {
    std::vector<SparseSym::Triplet> t{{0, 0, 4.0}, {1, 1, -1.0}, {2, 2, 9.0}};
    const SparseSym a = SparseSym::from_triplets(3, t);
    gfar::SparseCholesky chol(a);
    try {
      chol.refactor(a);
      FAIL("expected a definiteness failure");
    } catch (const NotPositiveDefiniteError& e) {
      CHECK(e.pivot_index() == 1);
    }
    CHECK(!chol.numeric_ready());
    const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(chol.solve(zero3), ValidationError);
  }
  SUBCASE("coupled case") {
    gfar::Rng rng(77);
    SparseSym base = oracle::random_spd(12, rng);
    Eigen::SparseMatrix<double> m = base.matrix();
    // Make vertex 7 strongly negative on the diagonal; the matrix cannot be
    // positive definite and the first bad pivot is 7's column.
    for (int k = 0; k < m.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
        if (it.row() == 7 && it.col() == 7) it.valueRef() = -100.0;
        if (it.row() == 7 && it.col() != 7) it.valueRef() = 0.0;
        if (it.col() == 7 && it.row() != 7) it.valueRef() = 0.0;
      }
    }
    const SparseSym a{Eigen::SparseMatrix<double>(m)};
    gfar::SparseCholesky chol(a);
    try {
      chol.refactor(a);
      FAIL("expected a definiteness failure");
    } catch (const NotPositiveDefiniteError& e) {
      CHECK(e.pivot_index() == 7);
    }
  }
}

TEST_CASE("refactor demands the analyzed pattern") {
  const SparseSym a = tridiag(8, 3.0, -1.0);
  gfar::SparseCholesky chol(a);
  chol.refactor(a);
  const SparseSym other = SparseSym::identity(8);
  CHECK_THROWS_AS(chol.refactor(other), ValidationError);
  const SparseSym smaller = tridiag(5, 3.0, -1.0);
  CHECK_THROWS_AS(chol.refactor(smaller), ValidationError);
}

TEST_CASE("pattern without a full diagonal is rejected up front") {
  std::vector<SparseSym::Triplet> t{{0, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}};
  const SparseSym a = SparseSym::from_triplets(3, t);
  CHECK_THROWS_AS(gfar::SparseCholesky{a}, ValidationError);
}

TEST_CASE("symbolic structure is stable across 100 refactorizations") {
  gfar::Rng rng(13);
  const int p = 50;
  const SparseSym base = oracle::random_spd(p, rng);
  gfar::SparseCholesky chol(base);
  chol.refactor(base);
  const std::uint64_t fp = chol.symbolic_fingerprint();
  const std::int64_t nnz = chol.factor_nonzeros();

  SparseSym work = base;
  for (int round = 0; round < 100; ++round) {
    // New values, same pattern.
    for (std::int64_t i = 0; i < work.nonzeros(); ++i) {
      // Scaling preserves symmetry and definiteness.
      work.values()[i] = base.values()[i] * (1.0 + 0.5 * ((round % 7) + 1));
    }
    chol.refactor(work);
    CHECK(chol.symbolic_fingerprint() == fp);
    CHECK(chol.factor_nonzeros() == nnz);
  }
}

TEST_CASE("exact trace matches the dense oracle") {
  gfar::Rng rng(4242);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 2 + static_cast<int>(rng.uniform_below(99));
    const SparseSym a = oracle::random_spd(p, rng);
    const SparseSym b = oracle::random_spd(p, rng);
    gfar::SparseCholesky chol(a);
    chol.refactor(a);
    const double got = chol.trace_inverse_product(b, TraceMode::exact).value;
    const double want =
        oracle::dense_trace_inverse_product(oracle::densify(a), oracle::densify(b));
    CHECK(std::abs(got - want) < 1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("exact trace is invariant under symmetric relabeling") {
  gfar::Rng rng(909);
  const int p = 60;
  const SparseSym a = oracle::random_spd(p, rng);
  const SparseSym b = oracle::random_spd(p, rng);

  std::vector<int> perm(p);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = p - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_below(static_cast<std::uint64_t>(i + 1))]);
  }
  auto permute = [&perm, p](const SparseSym& m) {
    std::vector<SparseSym::Triplet> t;
    const auto& src = m.matrix();
    for (int k = 0; k < src.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(src, k); it; ++it) {
        t.emplace_back(perm[it.row()], perm[it.col()], it.value());
      }
    }
    return SparseSym::from_triplets(p, t);
  };

  const SparseSym pa = permute(a);
  const SparseSym pb = permute(b);
  gfar::SparseCholesky chol(a), pchol(pa);
  chol.refactor(a);
  pchol.refactor(pa);
  const double t1 = chol.trace_inverse_product(b, TraceMode::exact).value;
  const double t2 = pchol.trace_inverse_product(pb, TraceMode::exact).value;
  CHECK(std::abs(t1 - t2) < 1e-10 * std::max(1.0, std::abs(t1)));
}

TEST_CASE("exact trace skips empty columns correctly") {
  gfar::Rng rng(88);
  const int p = 30;
  const SparseSym a = oracle::random_spd(p, rng);
  // B touches only a few columns.
  std::vector<SparseSym::Triplet> t{{3, 3, 2.0}, {10, 10, 1.0}, {3, 10, 0.5}, {10, 3, 0.5}};
  const SparseSym b = SparseSym::from_triplets(p, t);
  gfar::SparseCholesky chol(a);
  chol.refactor(a);
  const double got = chol.trace_inverse_product(b, TraceMode::exact).value;
  const double want =
      oracle::dense_trace_inverse_product(oracle::densify(a), oracle::densify(b));
  CHECK(std::abs(got - want) < 1e-10 * std::max(1.0, std::abs(want)));
}

TEST_CASE("stochastic trace lands within four standard errors") {
  gfar::Rng rng(31415);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = 100;
    const SparseSym a = oracle::random_spd(p, rng);
    const SparseSym b = oracle::random_spd(p, rng);
    gfar::SparseCholesky chol(a);
    chol.refactor(a);
    const double exact = chol.trace_inverse_product(b, TraceMode::exact).value;
    const auto est = chol.trace_inverse_product(b, TraceMode::stochastic, 64,
                                                gfar::mix_seed(5, trial));
    CHECK(est.std_error > 0.0);
    CHECK(std::abs(est.value - exact) <= 4.0 * est.std_error);
  }
}

TEST_CASE("stochastic trace is reproducible for a fixed probe seed") {
  gfar::Rng rng(2);
  const SparseSym a = oracle::random_spd(80, rng);
  gfar::SparseCholesky chol(a);
  chol.refactor(a);
  const auto e1 = chol.trace_inverse_product(a, TraceMode::stochastic, 32, 99);
  const auto e2 = chol.trace_inverse_product(a, TraceMode::stochastic, 32, 99);
  CHECK(e1.value == e2.value);
  CHECK(e1.std_error == e2.std_error);
  CHECK_THROWS_AS(chol.trace_inverse_product(a, TraceMode::stochastic, 0), ValidationError);
}

TEST_CASE("exact trace is bitwise identical across thread budgets") {
  gfar::Rng rng(64000);
  const int p = 320;
  const SparseSym a = oracle::random_spd(p, rng);
  const SparseSym b = oracle::random_spd(p, rng);
  gfar::SparseCholesky chol(a);
  chol.refactor(a);

  setenv("GRAPHSEG_THREADS", "1", 1);
  const double serial = chol.trace_inverse_product(b, TraceMode::exact).value;
  setenv("GRAPHSEG_THREADS", "4", 1);
  const double parallel = chol.trace_inverse_product(b, TraceMode::exact).value;
  unsetenv("GRAPHSEG_THREADS");
  CHECK(serial == parallel);
}

TEST_CASE("solve validates dimensions and factorization state") {
  const SparseSym a = tridiag(6, 3.0, -1.0);
  gfar::SparseCholesky chol(a);
  const Eigen::VectorXd z6 = Eigen::VectorXd::Zero(6);
  const Eigen::VectorXd z5 = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(chol.solve(z6), ValidationError);
  chol.refactor(a);
  CHECK_THROWS_AS(chol.solve(z5), ValidationError);
  CHECK_THROWS_AS(chol.trace_inverse_product(SparseSym::identity(5), TraceMode::exact),
                  ValidationError);
}
