#include "gfar/segment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "gfar/select.hpp"

namespace gfar {

void ArConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("config: epsilon must be positive and finite");
  }
  if (!(tol > 0.0) || !std::isfinite(tol)) {
    throw ValidationError("config: tol must be positive and finite");
  }
  if (!(cutoff > 0.0) || cutoff > 1.0) {
    throw ValidationError("config: cutoff must lie in (0, 1]");
  }
  if (max_iter < 1) throw ValidationError("config: max_iter must be at least 1");
  if (trace_probes < 1) throw ValidationError("config: trace probes must be at least 1");
}

double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& theta, const SparseSym& prec) {
  if (x.size() != theta.size() || x.size() != prec.dim()) {
    throw ValidationError("cost: dimension mismatch");
  }
  const Eigen::VectorXd r = x - theta;
  return 0.5 * r.dot(prec.matrix() * r);
}

namespace {

void check_problem_dims(const Eigen::VectorXd& x, const SparseSym& prec, const Graph& g) {
  if (g.vertex_count() < 1) throw ValidationError("fit: graph has no vertices");
  if (x.size() != g.vertex_count()) {
    throw ValidationError("fit: signal length " + std::to_string(x.size()) +
                          " does not match vertex count " +
                          std::to_string(g.vertex_count()));
  }
  if (prec.dim() != g.vertex_count()) {
    throw ValidationError("fit: precision dimension " + std::to_string(prec.dim()) +
                          " does not match vertex count " +
                          std::to_string(g.vertex_count()));
  }
  if (!x.allFinite()) throw ValidationError("fit: signal has non-finite entries");
}

// A penalty entry lambda * v far above the data scale fuses its edge below
// every tolerance already; pushing it further only destroys the conditioning
// of M + lambda K, and with it the level of the fused block (the small-
// eigenvalue direction loses roughly kappa * machine-epsilon digits). The
// system weights are therefore capped so lambda * w stays within this factor
// of the mean diagonal of M. Reported weights and deltas are never capped.
constexpr double kPenaltyConditionCap = 1e10;

// Shared machinery for one penalized problem: the data term M (prec in the
// signal model, X' prec X in the regression model), its right-hand side, and
// the reusable factorization of M + lambda K on the fixed union pattern.
class ArCore {
 public:
  ArCore(SparseSym data_term, Eigen::VectorXd rhs, const Graph& g, const ArConfig& cfg)
      : data_(std::move(data_term)),
        rhs_(std::move(rhs)),
        cfg_(cfg),
        edges_(g.edges().begin(), g.edges().end()),
        stencil_(g),
        sum_(data_, stencil_.current()),
        chol_(sum_.result()) {
    const double mean_diag = data_.trace() / std::max(1, data_.dim());
    cap_ = mean_diag > 0.0 ? kPenaltyConditionCap * mean_diag
                           : std::numeric_limits<double>::infinity();
  }

  // Majorize-minimize sweeps: solve (M + lambda K(v)) theta = rhs with the
  // current weights, then refresh v_uv = 1 / (d^2 + eps) and the penalty
  // terms delta_uv = d^2 / (d^2 + eps). Convergence is measured on the
  // deltas, which live in [0, 1) regardless of the data scale. The callback
  // sees each accepted iterate with the weights its system was built from.
  FitState fit(double lambda, std::span<const double> init_weights,
               const IterateCallback& callback) {
    if (!std::isfinite(lambda) || lambda < 0.0) {
      throw ValidationError("fit: lambda must be finite and non-negative");
    }
    const std::size_t n_edges = edges_.size();
    FitState st;
    st.edge_weights.assign(n_edges, 1.0);
    if (!init_weights.empty()) {
      if (init_weights.size() != n_edges) {
        throw ValidationError("fit: initial weight count " +
                              std::to_string(init_weights.size()) +
                              " does not match edge count " + std::to_string(n_edges));
      }
      for (double w : init_weights) {
        if (!std::isfinite(w) || w <= 0.0) {
          throw ValidationError("fit: initial weights must be positive and finite");
        }
      }
      std::copy(init_weights.begin(), init_weights.end(), st.edge_weights.begin());
    }
    st.deltas.assign(n_edges, 0.0);

    bool have_prev = false;
    for (int iter = 1; iter <= cfg_.max_iter; ++iter) {
      const std::span<const double> sys_w = system_weights(lambda, st.edge_weights);
      const SparseSym& k = stencil_.refresh(sys_w);
      const SparseSym& a = sum_.combine(data_, lambda, k);
      chol_.refactor(a);
      Eigen::VectorXd theta = chol_.solve(rhs_);
      // One refinement pass. The penalty entries span several orders of
      // magnitude once edges fuse, so the factorization alone leaves a
      // residual near kappa * eps; re-solving the residual pulls each
      // iterate back to round-off.
      theta += chol_.solve(Eigen::VectorXd(rhs_ - a.matrix() * theta));
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(theta(i))) {
          throw NumericalError("fit: non-finite estimate at iteration " +
                               std::to_string(iter) + ", vertex " + std::to_string(i));
        }
      }
      if (callback) callback(iter, theta, sys_w);
      st.theta = std::move(theta);
      st.iterations = iter;

      double max_diff = 0.0;
      for (std::size_t e = 0; e < n_edges; ++e) {
        const double d = st.theta(edges_[e].u) - st.theta(edges_[e].v);
        const double d2 = d * d;
        st.edge_weights[e] = 1.0 / (d2 + cfg_.epsilon);
        const double delta = d2 * st.edge_weights[e];
        if (have_prev) max_diff = std::max(max_diff, std::abs(delta - st.deltas[e]));
        st.deltas[e] = delta;
      }

      // lambda == 0 and the edge-free case are fixed points after one solve.
      if (lambda == 0.0 || n_edges == 0 || (have_prev && max_diff <= cfg_.tol)) {
        st.converged = true;
        break;
      }
      have_prev = true;
    }
    return st;
  }

  // Tr((M + lambda K(v))^-1 M) at the given weights.
  double effective_dim(double lambda, std::span<const double> weights) {
    const SparseSym& k = stencil_.refresh(system_weights(lambda, weights));
    const SparseSym& a = sum_.combine(data_, lambda, k);
    chol_.refactor(a);
    return chol_
        .trace_inverse_product(data_, cfg_.trace_mode, cfg_.trace_probes, cfg_.trace_seed)
        .value;
  }

  const SparseSym& data_term() const { return data_; }

 private:
  // The weights the linear system is actually built with: v capped so that
  // lambda * w <= cap_. Identity whenever the cap is out of reach.
  std::span<const double> system_weights(double lambda, std::span<const double> v) {
    if (lambda <= 0.0) return v;
    const double w_max = cap_ / lambda;
    system_w_.assign(v.begin(), v.end());
    for (double& w : system_w_) w = std::min(w, w_max);
    return system_w_;
  }

  SparseSym data_;
  Eigen::VectorXd rhs_;
  ArConfig cfg_;
  std::vector<Edge> edges_;
  LaplacianStencil stencil_;
  PatternSum sum_;
  SparseCholesky chol_;
  double cap_ = std::numeric_limits<double>::infinity();
  std::vector<double> system_w_;
};

FitState single_vertex_state(const Eigen::VectorXd& x) {
  FitState st;
  st.theta = x;
  st.iterations = 0;
  st.converged = true;
  return st;
}

}  // namespace

FitState ar_iterate(const Eigen::VectorXd& x, const SparseSym& prec, const Graph& g,
                    double lambda, std::span<const double> init_weights,
                    const ArConfig& cfg, const IterateCallback& callback) {
  cfg.validate();
  check_problem_dims(x, prec, g);
  if (g.vertex_count() == 1) return single_vertex_state(x);
  ArCore core(prec, prec.matrix() * x, g, cfg);
  return core.fit(lambda, init_weights, callback);
}

namespace {

// Densifying the normal-equations matrix and re-sparsifying keeps the public
// entry points uniform; symmetrize first so roundoff cannot break the
// symmetric-pattern invariant.
SparseSym normal_matrix(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  SparseSym::Matrix sp = sym.sparseView();
  return SparseSym(std::move(sp));
}

}  // namespace

FitState ar_iterate_regression(const Eigen::VectorXd& x, const Eigen::MatrixXd& design,
                               const SparseSym& prec, const Graph& g, double lambda,
                               const ArConfig& cfg, const IterateCallback& callback) {
  cfg.validate();
  if (design.rows() != x.size() || design.rows() != prec.dim()) {
    throw ValidationError("regression: design rows must match the observation length");
  }
  if (design.cols() != g.vertex_count()) {
    throw ValidationError("regression: design columns must match the vertex count");
  }
  if (!x.allFinite() || !design.allFinite()) {
    throw ValidationError("regression: non-finite inputs");
  }
  const Eigen::MatrixXd sx = prec.matrix() * design;
  ArCore core(normal_matrix(design.transpose() * sx), design.transpose() * (prec.matrix() * x),
              g, cfg);
  return core.fit(lambda, {}, callback);
}

FitState ar_iterate_regression(const Eigen::VectorXd& x,
                               const Eigen::SparseMatrix<double>& design,
                               const SparseSym& prec, const Graph& g, double lambda,
                               const ArConfig& cfg, const IterateCallback& callback) {
  cfg.validate();
  if (design.rows() != x.size() || design.rows() != prec.dim()) {
    throw ValidationError("regression: design rows must match the observation length");
  }
  if (design.cols() != g.vertex_count()) {
    throw ValidationError("regression: design columns must match the vertex count");
  }
  SparseSym::Matrix m = design.transpose() * prec.matrix() * design;
  SparseSym::Matrix sym = 0.5 * (SparseSym::Matrix(m.transpose()) + m);
  ArCore core(SparseSym(std::move(sym)),
              design.transpose() * (prec.matrix() * x), g, cfg);
  return core.fit(lambda, {}, callback);
}

std::vector<double> log_spaced_grid(double lo, double hi, int count) {
  if (count < 1) throw ValidationError("lambda grid: count must be at least 1");
  if (!(lo > 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || hi < lo) {
    throw ValidationError("lambda grid: need 0 < min <= max, both finite");
  }
  if (count == 1) return {lo};
  if (lo == hi) throw ValidationError("lambda grid: min == max needs count 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        std::exp(llo + (lhi - llo) * static_cast<double>(i) / (count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

PathFit run_path(const Eigen::VectorXd& x, const SparseSym& prec, const Graph& g,
                 std::span<const double> lambdas, const ArConfig& cfg) {
  cfg.validate();
  check_problem_dims(x, prec, g);
  if (lambdas.empty()) throw ValidationError("path: empty lambda grid");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!std::isfinite(lambdas[i]) || lambdas[i] < 0.0) {
      throw ValidationError("path: lambdas must be finite and non-negative");
    }
    if (i > 0 && lambdas[i] <= lambdas[i - 1]) {
      throw ValidationError("path: lambda grid must be strictly ascending");
    }
  }

  const int p = g.vertex_count();
  PathFit out;
  out.lambda_grid.assign(lambdas.begin(), lambdas.end());
  out.records.resize(lambdas.size());

  const bool trivial = p == 1;
  ArCore core(prec, trivial ? Eigen::VectorXd() : prec.matrix() * x, g, cfg);
  std::vector<double> warm(static_cast<std::size_t>(g.edge_count()), 1.0);

  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    PathRecord& rec = out.records[i];
    rec.lambda = lambdas[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      FitState st = trivial ? single_vertex_state(x) : core.fit(lambdas[i], warm, {});
      const double e = trivial ? 1.0 : core.effective_dim(lambdas[i], st.edge_weights);
      rec.theta_hat = std::move(st.theta);
      rec.deltas = std::move(st.deltas);
      rec.iterations = st.iterations;
      rec.converged = st.converged;
      rec.effective_dim = e;
      rec.cost2 = 2.0 * cost(x, rec.theta_hat, prec);
      const CriterionValues cv = criteria(rec.cost2, e, p);
      rec.aic = cv.aic;
      rec.bic = cv.bic;
      rec.gcv = cv.gcv;
      if (!trivial) {
        if (cfg.warm_start) {
          warm = st.edge_weights;
        } else {
          warm.assign(warm.size(), 1.0);
        }
      }
    } catch (const std::exception& ex) {
      rec.failed = true;
      rec.error = ex.what();
      out.partial = true;
      // Warm weights stay at the last successful grid point.
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  auto safe_select = [&out](Criterion c) {
    try {
      return select_lambda(out, c);
    } catch (const ValidationError&) {
      return -1;
    }
  };
  out.selected_aic = safe_select(Criterion::aic);
  out.selected_bic = safe_select(Criterion::bic);
  out.selected_gcv = safe_select(Criterion::gcv);
  return out;
}

namespace {

struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

}  // namespace

Segmentation extract_zones(const Graph& g, const Eigen::VectorXd& theta,
                           std::span<const double> deltas, double cutoff) {
  const int p = g.vertex_count();
  if (theta.size() != p) throw ValidationError("zones: estimate length mismatch");
  if (static_cast<int>(deltas.size()) != g.edge_count()) {
    throw ValidationError("zones: delta count does not match edge count");
  }
  if (!(cutoff > 0.0) || cutoff > 1.0) throw ValidationError("zones: cutoff must lie in (0, 1]");

  Segmentation seg;
  seg.fitted = theta;
  Dsu dsu(p);
  for (int e = 0; e < g.edge_count(); ++e) {
    if (deltas[static_cast<std::size_t>(e)] < cutoff) {
      dsu.unite(g.edge(e).u, g.edge(e).v);
    } else {
      seg.cut_edges.push_back(e);
    }
  }

  seg.zone_id.assign(static_cast<std::size_t>(p), -1);
  std::vector<int> root_zone(static_cast<std::size_t>(p), -1);
  for (int v = 0; v < p; ++v) {
    const int r = dsu.find(v);
    if (root_zone[static_cast<std::size_t>(r)] < 0) {
      root_zone[static_cast<std::size_t>(r)] = seg.zone_count++;
    }
    seg.zone_id[static_cast<std::size_t>(v)] = root_zone[static_cast<std::size_t>(r)];
  }

  seg.zone_means.assign(static_cast<std::size_t>(seg.zone_count), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(seg.zone_count), 0);
  for (int v = 0; v < p; ++v) {
    seg.zone_means[static_cast<std::size_t>(seg.zone_id[static_cast<std::size_t>(v)])] +=
        theta(v);
    ++counts[static_cast<std::size_t>(seg.zone_id[static_cast<std::size_t>(v)])];
  }
  for (int z = 0; z < seg.zone_count; ++z) {
    seg.zone_means[static_cast<std::size_t>(z)] /= counts[static_cast<std::size_t>(z)];
  }
  return seg;
}

Segmentation extract_zones(const Graph& g, const FitState& state, const ArConfig& cfg) {
  if (g.vertex_count() == 1 && state.deltas.empty()) {
    return extract_zones(g, state.theta, state.deltas, cfg.cutoff);
  }
  if (!state.converged) {
    std::fputs("warning: extracting zones from a non-converged fit\n", stderr);
  }
  return extract_zones(g, state.theta, state.deltas, cfg.cutoff);
}

void refit_zone_values(Segmentation& seg, const Eigen::VectorXd& x, const SparseSym& prec) {
  const int p = prec.dim();
  if (x.size() != p || seg.fitted.size() != p) {
    throw ValidationError("refit: dimension mismatch");
  }
  const int q = seg.zone_count;
  if (q < 1) throw ValidationError("refit: empty segmentation");

  // Normal equations on the zone indicator basis: (Z' prec Z) m = Z' prec x.
  std::vector<SparseSym::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(prec.nonzeros()));
  const auto& m = prec.matrix();
  for (int j = 0; j < p; ++j) {
    for (SparseSym::Matrix::InnerIterator it(m, j); it; ++it) {
      entries.emplace_back(seg.zone_id[static_cast<std::size_t>(it.row())],
                           seg.zone_id[static_cast<std::size_t>(j)], it.value());
    }
  }
  const SparseSym zz = SparseSym::from_triplets(q, entries);

  const Eigen::VectorXd px = m * x;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q);
  for (int v = 0; v < p; ++v) rhs(seg.zone_id[static_cast<std::size_t>(v)]) += px(v);

  SparseCholesky chol(zz);
  chol.refactor(zz);
  const Eigen::VectorXd means = chol.solve(rhs);

  for (int v = 0; v < p; ++v) {
    seg.fitted(v) = means(seg.zone_id[static_cast<std::size_t>(v)]);
  }
  for (int z = 0; z < q; ++z) seg.zone_means[static_cast<std::size_t>(z)] = means(z);
}

}  // namespace gfar
