#include "gfar/cholesky.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include "gfar/rng.hpp"

namespace gfar {

int thread_budget() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("GRAPHSEG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) n = std::min(n, static_cast<unsigned>(v));
  }
  return static_cast<int>(n);
}

SparseCholesky::SparseCholesky(const SparseSym& pattern) : dim_(pattern.dim()) {
  // A positive definite matrix has a full diagonal; missing diagonal slots
  // would make every later refactorization fail, so reject the pattern now.
  const auto& m = pattern.matrix();
  for (int j = 0; j < dim_; ++j) {
    bool found = false;
    for (SparseSym::Matrix::InnerIterator it(m, j); it; ++it) {
      if (it.row() == j) {
        found = true;
        break;
      }
    }
    if (!found) {
      throw ValidationError("factorization pattern lacks diagonal entry " +
                            std::to_string(j));
    }
  }

  ldlt_.analyzePattern(pattern.matrix());
  if (ldlt_.info() != Eigen::Success) {
    throw ValidationError("symbolic factorization failed");
  }
  pattern_fp_ = pattern.pattern_fingerprint();
}

int SparseCholesky::original_index(Eigen::Index permuted) const {
  const auto& inv = ldlt_.permutationPinv().indices();
  if (permuted < 0 || permuted >= inv.size()) return -1;
  return inv(permuted);
}

void SparseCholesky::refactor(const SparseSym& a) {
  if (a.dim() != dim_ || a.pattern_fingerprint() != pattern_fp_) {
    throw ValidationError("refactor: matrix pattern differs from the analyzed pattern");
  }
  numeric_ok_ = false;
  ldlt_.factorize(a.matrix());

  // LDL^T proceeds through negative pivots and only stops on an exact zero,
  // so scan D for the first non-positive entry; entries up to the break
  // point are freshly written either way. The comparison is inverted to
  // catch NaN as well.
  const auto& d = ldlt_.vectorD();
  Eigen::Index bad = -1;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (!(d(k) > 0.0)) {
      bad = k;
      break;
    }
  }
  if (ldlt_.info() != Eigen::Success || bad >= 0) {
    const int orig = bad >= 0 ? original_index(bad) : -1;
    throw NotPositiveDefiniteError(
        orig, "matrix is not positive definite (pivot " + std::to_string(orig) + ")");
  }
  numeric_ok_ = true;
}

void SparseCholesky::require_numeric(const char* op) const {
  if (!numeric_ok_) {
    throw ValidationError(std::string(op) + ": no current numeric factorization");
  }
}

Eigen::VectorXd SparseCholesky::solve(const Eigen::VectorXd& rhs) const {
  require_numeric("solve");
  if (rhs.size() != dim_) {
    throw ValidationError("solve: rhs length " + std::to_string(rhs.size()) +
                          " does not match dimension " + std::to_string(dim_));
  }
  return ldlt_.solve(rhs);
}

Eigen::MatrixXd SparseCholesky::solve(const Eigen::MatrixXd& rhs) const {
  require_numeric("solve");
  if (rhs.rows() != dim_) {
    throw ValidationError("solve: rhs has " + std::to_string(rhs.rows()) +
                          " rows, dimension is " + std::to_string(dim_));
  }
  return ldlt_.solve(rhs);
}

std::uint64_t SparseCholesky::symbolic_fingerprint() const {
  require_numeric("symbolic_fingerprint");
  const auto& l = ldlt_.matrixL().nestedExpression();
  std::uint64_t h = 0x452821e638d01377ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  const auto& perm = ldlt_.permutationP().indices();
  for (Eigen::Index i = 0; i < perm.size(); ++i) mix(static_cast<std::uint64_t>(perm(i)));
  for (int j = 0; j <= dim_; ++j) {
    mix(static_cast<std::uint64_t>(l.outerIndexPtr()[j]));
  }
  for (std::int64_t i = 0; i < l.nonZeros(); ++i) {
    mix(static_cast<std::uint64_t>(l.innerIndexPtr()[i]));
  }
  return h;
}

std::int64_t SparseCholesky::factor_nonzeros() const {
  require_numeric("factor_nonzeros");
  return ldlt_.matrixL().nestedExpression().nonZeros();
}

TraceEstimate SparseCholesky::trace_inverse_product(const SparseSym& b, TraceMode mode,
                                                    int probes,
                                                    std::uint64_t probe_seed) const {
  require_numeric("trace");
  if (b.dim() != dim_) {
    throw ValidationError("trace: operand dimension " + std::to_string(b.dim()) +
                          " does not match factor dimension " + std::to_string(dim_));
  }
  if (dim_ == 0) return {0.0, 0.0};

  if (mode == TraceMode::stochastic) {
    if (probes < 1) throw ValidationError("trace: probe count must be positive");
    Rng rng(probe_seed);
    Eigen::VectorXd t(probes);
    constexpr int kBatch = 64;
    for (int first = 0; first < probes; first += kBatch) {
      const int k = std::min(kBatch, probes - first);
      Eigen::MatrixXd z(dim_, k);
      // Column-major fill keeps the draw order identical to probe-by-probe.
      for (int c = 0; c < k; ++c) {
        for (int r = 0; r < dim_; ++r) z(r, c) = rng.rademacher();
      }
      const Eigen::MatrixXd w = b.matrix() * z;
      const Eigen::MatrixXd y = ldlt_.solve(w);
      for (int c = 0; c < k; ++c) t(first + c) = z.col(c).dot(y.col(c));
    }
    const double mean = t.mean();
    double se = 0.0;
    if (probes > 1) {
      const double var = (t.array() - mean).square().sum() / (probes - 1);
      se = std::sqrt(var / probes);
    }
    return {mean, se};
  }

  // Exact: Tr(A^-1 B) = sum_j (A^-1 b_j)_j over the nonempty columns of B.
  // Columns are processed in fixed blocks whose partial sums are reduced in
  // block order, so the result does not depend on the thread count.
  constexpr int kBlock = 64;
  const int n_blocks = (dim_ + kBlock - 1) / kBlock;
  std::vector<double> block_sum(static_cast<std::size_t>(n_blocks), 0.0);
  const auto& bm = b.matrix();

  auto run_block = [&](int blk) {
    const int c0 = blk * kBlock;
    const int c1 = std::min(dim_, c0 + kBlock);
    std::vector<int> cols;
    cols.reserve(kBlock);
    for (int j = c0; j < c1; ++j) {
      if (bm.outerIndexPtr()[j + 1] > bm.outerIndexPtr()[j]) cols.push_back(j);
    }
    if (cols.empty()) return;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim_, static_cast<int>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for (SparseSym::Matrix::InnerIterator it(bm, cols[c]); it; ++it) {
        rhs(it.row(), static_cast<int>(c)) = it.value();
      }
    }
    const Eigen::MatrixXd y = ldlt_.solve(rhs);
    double s = 0.0;
    for (std::size_t c = 0; c < cols.size(); ++c) s += y(cols[c], static_cast<int>(c));
    block_sum[static_cast<std::size_t>(blk)] = s;
  };

  const int threads = std::min(thread_budget(), n_blocks);
  if (threads <= 1 || dim_ < 256) {
    for (int blk = 0; blk < n_blocks; ++blk) run_block(blk);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (int blk = t; blk < n_blocks; blk += threads) run_block(blk);
      });
    }
    for (auto& th : pool) th.join();
  }

  double total = 0.0;
  for (double s : block_sum) total += s;
  return {total, 0.0};
}

}  // namespace gfar
