#include "gfar/sparse_matrix.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

namespace gfar {

namespace {

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

// Values may be accumulated in different orders on the two sides of the
// diagonal, so symmetry is checked with a small absolute + relative slack.
bool values_close(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

SparseSym::SparseSym(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) {
    throw ValidationError("sparse matrix must be square, got " +
                          std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
  }
  m_.makeCompressed();

  const double* v = m_.valuePtr();
  for (std::int64_t i = 0; i < m_.nonZeros(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError("sparse matrix has a non-finite entry");
    }
  }

  Matrix t = m_.transpose();
  t.makeCompressed();
  const int p = dim();
  if (t.nonZeros() != m_.nonZeros() ||
      std::memcmp(t.outerIndexPtr(), m_.outerIndexPtr(), sizeof(int) * (p + 1)) != 0 ||
      std::memcmp(t.innerIndexPtr(), m_.innerIndexPtr(),
                  sizeof(int) * static_cast<std::size_t>(m_.nonZeros())) != 0) {
    throw ValidationError("sparse matrix pattern is not symmetric");
  }
  for (std::int64_t i = 0; i < m_.nonZeros(); ++i) {
    if (!values_close(v[i], t.valuePtr()[i])) {
      throw ValidationError("sparse matrix values are not symmetric");
    }
  }
}

SparseSym SparseSym::identity(int p) {
  if (p < 0) throw ValidationError("identity: dimension must be non-negative");
  Matrix m(p, p);
  m.setIdentity();
  return SparseSym(std::move(m));
}

SparseSym SparseSym::from_triplets(int p, const std::vector<Triplet>& entries) {
  if (p < 0) throw ValidationError("from_triplets: dimension must be non-negative");
  for (const auto& t : entries) {
    if (t.row() < 0 || t.row() >= p || t.col() < 0 || t.col() >= p) {
      throw ValidationError("from_triplets: entry (" + std::to_string(t.row()) + "," +
                            std::to_string(t.col()) + ") outside a " + std::to_string(p) +
                            "-dimensional matrix");
    }
  }
  Matrix m(p, p);
  m.setFromTriplets(entries.begin(), entries.end());
  return SparseSym(std::move(m));
}

double SparseSym::trace() const {
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) s += m_.coeff(j, j);
  return s;
}

bool SparseSym::same_pattern(const SparseSym& other) const {
  if (dim() != other.dim() || nonzeros() != other.nonzeros()) return false;
  return std::memcmp(m_.outerIndexPtr(), other.m_.outerIndexPtr(),
                     sizeof(int) * (dim() + 1)) == 0 &&
         std::memcmp(m_.innerIndexPtr(), other.m_.innerIndexPtr(),
                     sizeof(int) * static_cast<std::size_t>(nonzeros())) == 0;
}

std::uint64_t SparseSym::pattern_fingerprint() const {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  h = hash_mix(h, static_cast<std::uint64_t>(dim()));
  const int* outer = m_.outerIndexPtr();
  for (int j = 0; j <= dim(); ++j) h = hash_mix(h, static_cast<std::uint64_t>(outer[j]));
  const int* inner = m_.innerIndexPtr();
  for (std::int64_t i = 0; i < nonzeros(); ++i) {
    h = hash_mix(h, static_cast<std::uint64_t>(inner[i]));
  }
  return h;
}

PatternSum::PatternSum(const SparseSym& a, const SparseSym& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("pattern sum: dimension mismatch " + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()));
  }
  const auto& am = a.matrix();
  const auto& bm = b.matrix();
  const int p = a.dim();

  a_slot_.resize(static_cast<std::size_t>(am.nonZeros()));
  b_slot_.resize(static_cast<std::size_t>(bm.nonZeros()));

  // Column-by-column merge of the two sorted inner index lists. The union is
  // emitted in (col, row) order, which is exactly the storage order
  // setFromTriplets produces, so the running counter is the final slot index.
  std::vector<SparseSym::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(am.nonZeros() + bm.nonZeros()));
  std::int64_t slot = 0;
  for (int j = 0; j < p; ++j) {
    std::int64_t ia = am.outerIndexPtr()[j];
    const std::int64_t ea = am.outerIndexPtr()[j + 1];
    std::int64_t ib = bm.outerIndexPtr()[j];
    const std::int64_t eb = bm.outerIndexPtr()[j + 1];
    while (ia < ea || ib < eb) {
      const int ra = ia < ea ? am.innerIndexPtr()[ia] : p;
      const int rb = ib < eb ? bm.innerIndexPtr()[ib] : p;
      const int row = std::min(ra, rb);
      if (ra == row) a_slot_[static_cast<std::size_t>(ia++)] = slot;
      if (rb == row) b_slot_[static_cast<std::size_t>(ib++)] = slot;
      entries.emplace_back(row, j, 0.0);
      ++slot;
    }
  }

  SparseSym::Matrix out(p, p);
  out.setFromTriplets(entries.begin(), entries.end());
  out_ = SparseSym(std::move(out));
  a_fp_ = a.pattern_fingerprint();
  b_fp_ = b.pattern_fingerprint();
}

const SparseSym& PatternSum::combine(const SparseSym& a, double s, const SparseSym& b) {
  if (!std::isfinite(s)) throw ValidationError("pattern sum: scale must be finite");
  if (a.pattern_fingerprint() != a_fp_ || b.pattern_fingerprint() != b_fp_) {
    throw ValidationError("pattern sum: operand pattern differs from the captured one");
  }
  double* out = out_.values();
  std::fill(out, out + out_.nonzeros(), 0.0);
  const double* av = a.values();
  for (std::size_t i = 0; i < a_slot_.size(); ++i) out[a_slot_[i]] = av[i];
  const double* bv = b.values();
  for (std::size_t i = 0; i < b_slot_.size(); ++i) out[b_slot_[i]] += s * bv[i];
  return out_;
}

SparseSym add_scaled(const SparseSym& a, double s, const SparseSym& b) {
  PatternSum sum(a, b);
  return sum.combine(a, s, b);
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

[[noreturn]] void mm_fail(const std::string& source, const std::string& msg) {
  throw ValidationError(source + ": " + msg);
}

}  // namespace

SparseSym read_matrix_market_sym(std::istream& in, const std::string& source_name) {
  std::string line;
  if (!std::getline(in, line)) mm_fail(source_name, "empty file");

  std::istringstream header(line);
  std::string banner, object, format, field, qualifier;
  header >> banner >> object >> format >> field >> qualifier;
  if (lower(banner) != "%%matrixmarket") mm_fail(source_name, "missing MatrixMarket banner");
  if (lower(object) != "matrix" || lower(format) != "coordinate") {
    mm_fail(source_name, "only coordinate matrices are supported");
  }
  const std::string f = lower(field);
  if (f != "real" && f != "integer") {
    mm_fail(source_name, "only real-valued matrices are supported, got '" + field + "'");
  }
  const std::string q = lower(qualifier);
  const bool mirrored = q == "symmetric";
  if (!mirrored && q != "general") {
    mm_fail(source_name, "unsupported qualifier '" + qualifier + "'");
  }

  auto next_content_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      std::size_t i = 0;
      while (i < out.size() && std::isspace(static_cast<unsigned char>(out[i]))) ++i;
      if (i == out.size()) continue;
      if (out[i] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_content_line(line)) mm_fail(source_name, "missing size line");
  std::istringstream size_line(line);
  std::int64_t rows = -1, cols = -1, count = -1;
  if (!(size_line >> rows >> cols >> count)) mm_fail(source_name, "malformed size line");
  if (rows != cols) {
    mm_fail(source_name, "matrix must be square, got " + std::to_string(rows) + "x" +
                             std::to_string(cols));
  }
  if (rows < 0 || count < 0) mm_fail(source_name, "negative dimensions");

  std::vector<SparseSym::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(mirrored ? 2 * count : count));
  std::set<std::pair<int, int>> seen;
  for (std::int64_t k = 0; k < count; ++k) {
    if (!next_content_line(line)) {
      mm_fail(source_name, "expected " + std::to_string(count) + " entries, got " +
                               std::to_string(k));
    }
    std::istringstream entry(line);
    std::int64_t i = 0, j = 0;
    double v = 0.0;
    if (!(entry >> i >> j >> v)) mm_fail(source_name, "malformed entry '" + line + "'");
    if (i < 1 || i > rows || j < 1 || j > cols) {
      mm_fail(source_name, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                               ") out of bounds");
    }
    if (!std::isfinite(v)) mm_fail(source_name, "non-finite value in entry '" + line + "'");
    const int r = static_cast<int>(i - 1), c = static_cast<int>(j - 1);
    if (!seen.insert({r, c}).second) {
      mm_fail(source_name, "duplicate entry (" + std::to_string(i) + "," +
                               std::to_string(j) + ")");
    }
    entries.emplace_back(r, c, v);
    if (mirrored && r != c) entries.emplace_back(c, r, v);
  }

  try {
    return SparseSym::from_triplets(static_cast<int>(rows), entries);
  } catch (const ValidationError& e) {
    mm_fail(source_name, e.what());
  }
}

SparseSym read_matrix_market_sym_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file '" + path + "'");
  return read_matrix_market_sym(in, path);
}

void write_matrix_market_sym(std::ostream& out, const SparseSym& m) {
  // Lower triangle only, under the symmetric qualifier.
  const auto& mat = m.matrix();
  std::int64_t count = 0;
  for (int j = 0; j < m.dim(); ++j) {
    for (SparseSym::Matrix::InnerIterator it(mat, j); it; ++it) {
      if (it.row() >= j) ++count;
    }
  }
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << m.dim() << " " << m.dim() << " " << count << "\n";
  char buf[64];
  for (int j = 0; j < m.dim(); ++j) {
    for (SparseSym::Matrix::InnerIterator it(mat, j); it; ++it) {
      if (it.row() < j) continue;
      std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", static_cast<int>(it.row()) + 1,
                    j + 1, it.value());
      out << buf;
    }
  }
}

}  // namespace gfar
