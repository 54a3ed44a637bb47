#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cstdint>

#include "gfar/sparse_matrix.hpp"

namespace gfar {

enum class TraceMode { exact, stochastic };

struct TraceEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 in exact mode and for a single probe
};

// Sparse LDL^T factorization with a fill-reducing (AMD) ordering. The
// symbolic analysis runs once, at construction, on the structural pattern;
// numeric refactorization for same-pattern matrices reuses it. Positive
// definiteness is enforced: a non-positive pivot aborts with the offending
// index reported in the original ordering.
class SparseCholesky {
 public:
  explicit SparseCholesky(const SparseSym& pattern);

  // Numeric factorization of a matrix with the analyzed pattern.
  void refactor(const SparseSym& a);

  bool numeric_ready() const { return numeric_ok_; }
  int dim() const { return dim_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  // Stable across refactorizations of same-pattern matrices; requires a
  // numeric factor (the factor's row structure is materialized numerically).
  std::uint64_t symbolic_fingerprint() const;
  std::int64_t factor_nonzeros() const;

  // Tr(A^-1 B) for the currently factored A. Exact mode solves against the
  // nonempty columns of B and is bitwise deterministic for any thread count;
  // stochastic mode averages Rademacher quadratic forms z' A^-1 B z and
  // reports a standard error alongside the estimate.
  TraceEstimate trace_inverse_product(const SparseSym& b, TraceMode mode,
                                      int probes = 64,
                                      std::uint64_t probe_seed = kDefaultProbeSeed) const;

  static constexpr std::uint64_t kDefaultProbeSeed = 0x9a3c8b2du;

 private:
  using Factor = Eigen::SimplicialLDLT<SparseSym::Matrix, Eigen::Lower,
                                       Eigen::AMDOrdering<int>>;

  int original_index(Eigen::Index permuted) const;
  void require_numeric(const char* op) const;

  Factor ldlt_;
  std::uint64_t pattern_fp_ = 0;
  int dim_ = 0;
  bool numeric_ok_ = false;
};

// Number of worker threads honored by parallel sections: the smaller of
// hardware concurrency and the GRAPHSEG_THREADS environment variable.
int thread_budget();

}  // namespace gfar
