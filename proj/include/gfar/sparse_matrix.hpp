#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gfar/errors.hpp"

namespace gfar {

// Symmetric sparse matrix in compressed-column storage. Both triangles are
// stored explicitly. Construction validates squareness, finiteness, and
// symmetry of both the pattern and the values, so downstream code can rely
// on those invariants without re-checking.
class SparseSym {
 public:
  using Matrix = Eigen::SparseMatrix<double>;
  using Triplet = Eigen::Triplet<double>;

  SparseSym() = default;
  explicit SparseSym(Matrix m);

  static SparseSym identity(int p);

  // Duplicate triplets are summed. Entries must form a symmetric matrix.
  static SparseSym from_triplets(int p, const std::vector<Triplet>& entries);

  int dim() const { return static_cast<int>(m_.rows()); }
  std::int64_t nonzeros() const { return m_.nonZeros(); }
  const Matrix& matrix() const { return m_; }

  double trace() const;

  bool same_pattern(const SparseSym& other) const;

  // Order-sensitive hash of (dim, outer pointers, inner indices). Two
  // matrices share a pattern iff their fingerprints collide (up to hashing).
  std::uint64_t pattern_fingerprint() const;

  // Raw value array, one slot per stored entry. Callers that mutate values
  // are responsible for keeping them symmetric; PatternSum and the Laplacian
  // stencil write symmetric values by construction.
  double* values() { return m_.valuePtr(); }
  const double* values() const { return m_.valuePtr(); }

 private:
  Matrix m_;
};

// Precomputed structural union of two symmetric patterns. combine() writes
// a + s * b into an internal buffer in O(nnz) with no allocation, so a solver
// can be given the same pattern on every call while only values change.
class PatternSum {
 public:
  PatternSum(const SparseSym& a, const SparseSym& b);

  // a and b must have the patterns captured at construction.
  const SparseSym& combine(const SparseSym& a, double s, const SparseSym& b);

  const SparseSym& result() const { return out_; }

 private:
  std::vector<std::int64_t> a_slot_;
  std::vector<std::int64_t> b_slot_;
  std::uint64_t a_fp_ = 0;
  std::uint64_t b_fp_ = 0;
  SparseSym out_;
};

// One-shot a + s * b on the union pattern.
SparseSym add_scaled(const SparseSym& a, double s, const SparseSym& b);

// Matrix Market coordinate reader for symmetric real matrices. Accepts the
// "symmetric" qualifier (one triangle stored, mirrored on load) or "general"
// with both triangles present; anything non-symmetric is rejected. Indices
// are 1-based on disk. Duplicate entries are an error.
SparseSym read_matrix_market_sym(std::istream& in, const std::string& source_name);
SparseSym read_matrix_market_sym_file(const std::string& path);

void write_matrix_market_sym(std::ostream& out, const SparseSym& m);

}  // namespace gfar
