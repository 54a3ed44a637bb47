#include "gfar/select.hpp"

#include <cmath>
#include <limits>

namespace gfar {

Criterion criterion_from_string(const std::string& name) {
  if (name == "aic") return Criterion::aic;
  if (name == "bic") return Criterion::bic;
  if (name == "gcv") return Criterion::gcv;
  throw ValidationError("unknown criterion '" + name + "' (expected aic, bic, or gcv)");
}

const char* to_string(Criterion c) {
  switch (c) {
    case Criterion::aic: return "aic";
    case Criterion::bic: return "bic";
    case Criterion::gcv: return "gcv";
  }
  return "?";
}

CriterionValues criteria(double cost2, double effective_dim, int p) {
  if (p < 1) throw ValidationError("criteria: p must be at least 1");
  if (!std::isfinite(cost2) || cost2 < -1e-9) {
    throw ValidationError("criteria: misfit must be finite and non-negative");
  }
  if (!std::isfinite(effective_dim) || effective_dim <= 0.0) {
    throw ValidationError("criteria: effective dimension must be positive and finite");
  }
  const double c2 = std::max(cost2, 0.0);
  CriterionValues v;
  v.aic = c2 + 2.0 * effective_dim;
  v.bic = c2 + std::log(static_cast<double>(p)) * effective_dim;
  if (effective_dim >= static_cast<double>(p)) {
    v.gcv = std::numeric_limits<double>::infinity();
  } else {
    const double denom = 1.0 - effective_dim / static_cast<double>(p);
    v.gcv = c2 / (static_cast<double>(p) * denom * denom);
  }
  return v;
}

int select_lambda(const PathFit& path, Criterion c) {
  int best = -1;
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.records.size(); ++i) {
    const PathRecord& rec = path.records[i];
    if (rec.failed) continue;
    double value = 0.0;
    switch (c) {
      case Criterion::aic: value = rec.aic; break;
      case Criterion::bic: value = rec.bic; break;
      case Criterion::gcv: value = rec.gcv; break;
    }
    if (!std::isfinite(value)) continue;
    // <= resolves ties toward the larger lambda (the grid is ascending).
    if (value <= best_value) {
      best_value = value;
      best = static_cast<int>(i);
    }
  }
  if (best < 0) {
    throw ValidationError(std::string("selection: ") + to_string(c) +
                          " is degenerate on this path (no finite value)");
  }
  return best;
}

}  // namespace gfar
