#pragma once

#include <string>

#include "gfar/segment.hpp"

namespace gfar {

enum class Criterion { aic, bic, gcv };

Criterion criterion_from_string(const std::string& name);
const char* to_string(Criterion c);

struct CriterionValues {
  double aic = 0.0;
  double bic = 0.0;
  double gcv = 0.0;
};

// Model-selection scores from the misfit 2*cost and the effective dimension:
//   aic = cost2 + 2 e
//   bic = cost2 + ln(p) e
//   gcv = cost2 / (p (1 - e/p)^2), +inf once e reaches p
// aic and bic carry model-dependent additive constants, so they rank lambdas
// within one path but are not comparable across data sets.
CriterionValues criteria(double cost2, double effective_dim, int p);

// Index of the grid point minimizing the criterion; ties resolve to the
// larger lambda. Failed records and non-finite scores are skipped; if no
// finite score exists the criterion is degenerate and an error is raised.
int select_lambda(const PathFit& path, Criterion c);

}  // namespace gfar
