#include "gfar/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "gfar/rng.hpp"

namespace gfar {

std::pair<Scenario, Eigen::VectorXd> generate_grid_scenario(int rows, int cols,
                                                            int zone_rows, int zone_cols,
                                                            double sigma,
                                                            std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ValidationError("scenario: grid must be at least 1x1");
  if (zone_rows < 1 || zone_rows > rows || rows % zone_rows != 0) {
    throw ValidationError("scenario: zone_rows must divide rows");
  }
  if (zone_cols < 1 || zone_cols > cols || cols % zone_cols != 0) {
    throw ValidationError("scenario: zone_cols must divide cols");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("scenario: sigma must be positive");
  }

  const int p = rows * cols;
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(2 * p));
  std::vector<std::string> labels(static_cast<std::size_t>(p));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      labels[static_cast<std::size_t>(i)] = std::to_string(i);
      if (c + 1 < cols) edges.push_back({i, i + 1});
      if (r + 1 < rows) edges.push_back({i, i + cols});
    }
  }

  Scenario sc;
  sc.graph = Graph(p, std::move(edges), {}, {}, std::move(labels));
  sc.rows = rows;
  sc.cols = cols;
  sc.sigma = sigma;
  sc.seed = seed;

  const int zgrid_cols = cols / zone_cols;
  const int q = (rows / zone_rows) * zgrid_cols;
  sc.zone_drawn.resize(static_cast<std::size_t>(p));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      sc.zone_drawn[static_cast<std::size_t>(r * cols + c)] =
          (r / zone_rows) * zgrid_cols + (c / zone_cols);
    }
  }

  // Fixed draw order: all zone levels first, then the noise, vertex-major.
  Rng rng(seed);
  std::vector<double> levels(static_cast<std::size_t>(q));
  for (double& v : levels) v = static_cast<double>(rng.poisson(10.0));
  sc.theta_true.resize(p);
  for (int i = 0; i < p; ++i) {
    sc.theta_true(i) = levels[static_cast<std::size_t>(sc.zone_drawn[static_cast<std::size_t>(i)])];
  }
  Eigen::VectorXd x(p);
  for (int i = 0; i < p; ++i) x(i) = sc.theta_true(i) + sigma * rng.normal();
  return {std::move(sc), std::move(x)};
}

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw ValidationError("rmse: vectors must have equal, non-zero length");
  }
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

namespace {

std::int64_t choose2(std::int64_t n) { return n * (n - 1) / 2; }

std::vector<int> compact_labels(std::span<const int> raw, int& k) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto [it, inserted] = remap.emplace(raw[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  k = static_cast<int>(remap.size());
  return out;
}

}  // namespace

RandScores rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ValidationError("rand index: labelings must have equal, non-zero length");
  }
  const std::int64_t n = static_cast<std::int64_t>(a.size());
  int ka = 0, kb = 0;
  const std::vector<int> la = compact_labels(a, ka);
  const std::vector<int> lb = compact_labels(b, kb);

  std::vector<std::int64_t> ca(static_cast<std::size_t>(ka), 0);
  std::vector<std::int64_t> cb(static_cast<std::size_t>(kb), 0);
  std::unordered_map<std::int64_t, std::int64_t> joint;
  joint.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ca[static_cast<std::size_t>(la[i])];
    ++cb[static_cast<std::size_t>(lb[i])];
    ++joint[static_cast<std::int64_t>(la[i]) * kb + lb[i]];
  }

  std::int64_t sum_joint = 0;
  for (const auto& [key, c] : joint) sum_joint += choose2(c);
  std::int64_t sum_a = 0;
  for (std::int64_t c : ca) sum_a += choose2(c);
  std::int64_t sum_b = 0;
  for (std::int64_t c : cb) sum_b += choose2(c);
  const std::int64_t total = choose2(n);

  RandScores out;
  if (total == 0) {
    out.rand = 1.0;
    out.adjusted_rand = 1.0;
    return out;
  }
  const std::int64_t agreements = total + 2 * sum_joint - sum_a - sum_b;
  out.rand = static_cast<double>(agreements) / static_cast<double>(total);

  const double expected = static_cast<double>(sum_a) * static_cast<double>(sum_b) /
                          static_cast<double>(total);
  const double denom = 0.5 * static_cast<double>(sum_a + sum_b) - expected;
  out.adjusted_rand = denom == 0.0 ? 1.0 : (static_cast<double>(sum_joint) - expected) / denom;
  return out;
}

std::vector<int> effective_partition(const Graph& g, const Eigen::VectorXd& theta_true) {
  if (theta_true.size() != g.vertex_count()) {
    throw ValidationError("effective partition: signal length mismatch");
  }
  // Zone levels are exact doubles (integer Poisson draws), so equality of
  // adjacent values is the collision criterion, not a tolerance.
  std::vector<int> parent(static_cast<std::size_t>(g.vertex_count()));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int v) {
    while (parent[static_cast<std::size_t>(v)] != v) {
      parent[static_cast<std::size_t>(v)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
      v = parent[static_cast<std::size_t>(v)];
    }
    return v;
  };
  for (const Edge& e : g.edges()) {
    if (theta_true(e.u) == theta_true(e.v)) {
      parent[static_cast<std::size_t>(find(e.u))] = find(e.v);
    }
  }
  std::vector<int> out(static_cast<std::size_t>(g.vertex_count()));
  std::vector<int> zone_of_root(static_cast<std::size_t>(g.vertex_count()), -1);
  int next = 0;
  for (int v = 0; v < g.vertex_count(); ++v) {
    const int r = find(v);
    if (zone_of_root[static_cast<std::size_t>(r)] < 0) {
      zone_of_root[static_cast<std::size_t>(r)] = next++;
    }
    out[static_cast<std::size_t>(v)] = zone_of_root[static_cast<std::size_t>(r)];
  }
  return out;
}

ScoreReport score_fit(const Scenario& sc, const PathRecord& rec, double cutoff) {
  if (rec.failed) throw ValidationError("score: cannot score a failed record");
  const Segmentation seg = extract_zones(sc.graph, rec.theta_hat, rec.deltas, cutoff);
  const std::vector<int> effective = effective_partition(sc.graph, sc.theta_true);

  ScoreReport out;
  out.rmse = rmse(rec.theta_hat, sc.theta_true);
  const RandScores eff = rand_index(seg.zone_id, effective);
  out.rand = eff.rand;
  out.adjusted_rand = eff.adjusted_rand;
  const RandScores drawn = rand_index(seg.zone_id, sc.zone_drawn);
  out.rand_drawn = drawn.rand;
  out.adjusted_rand_drawn = drawn.adjusted_rand;
  out.zone_count_true = 1 + *std::max_element(effective.begin(), effective.end());
  out.zone_count_true_drawn = 1 + *std::max_element(sc.zone_drawn.begin(), sc.zone_drawn.end());
  out.zone_count_est = seg.zone_count;
  out.model_dim = rec.effective_dim;
  return out;
}

void ScenarioSpec::validate() const {
  if (rows < 1 || cols < 1) throw ValidationError("spec: grid must be at least 1x1");
  if (zone_rows < 1 || zone_rows > rows || rows % zone_rows != 0) {
    throw ValidationError("spec: zone_rows must divide rows");
  }
  if (zone_cols < 1 || zone_cols > cols || cols % zone_cols != 0) {
    throw ValidationError("spec: zone_cols must divide cols");
  }
  if (sigmas.empty()) throw ValidationError("spec: need at least one sigma");
  for (double s : sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("spec: sigmas must be positive");
  }
  if (lambda.count < 1) throw ValidationError("spec: lambda count must be at least 1");
  if (!(lambda.min > 0.0) || lambda.max < lambda.min) {
    throw ValidationError("spec: need 0 < lambda min <= max");
  }
}

std::vector<ExperimentRow> run_experiment(const ScenarioSpec& spec, const ArConfig& cfg,
                                          std::vector<SigmaDetail>* details) {
  spec.validate();
  cfg.validate();
  const std::vector<double> grid =
      log_spaced_grid(spec.lambda.min, spec.lambda.max, spec.lambda.count);
  const SparseSym prec = SparseSym::identity(spec.rows * spec.cols);

  if (details) details->clear();
  std::vector<ExperimentRow> rows;
  rows.reserve(spec.sigmas.size() * 3);
  for (std::size_t si = 0; si < spec.sigmas.size(); ++si) {
    const double sigma = spec.sigmas[si];
    auto [sc, x] = generate_grid_scenario(spec.rows, spec.cols, spec.zone_rows,
                                          spec.zone_cols, sigma, mix_seed(spec.seed, si));
    const auto t0 = std::chrono::steady_clock::now();
    const PathFit path = run_path(x, prec, sc.graph, grid, cfg);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (details) {
      SigmaDetail det;
      det.zone_effective = effective_partition(sc.graph, sc.theta_true);
      det.x = x;
      if (path.selected_aic >= 0) {
        const PathRecord& rec = path.records[static_cast<std::size_t>(path.selected_aic)];
        det.have_fit = true;
        det.lambda = rec.lambda;
        det.theta_hat = rec.theta_hat;
        det.zone_est = extract_zones(sc.graph, rec.theta_hat, rec.deltas, cfg.cutoff).zone_id;
      }
      det.scenario = sc;
      details->push_back(std::move(det));
    }

    for (const Criterion crit : {Criterion::aic, Criterion::bic, Criterion::gcv}) {
      ExperimentRow row;
      row.sigma = sigma;
      row.criterion = crit;
      row.path_seconds = seconds;
      int idx = -1;
      switch (crit) {
        case Criterion::aic: idx = path.selected_aic; break;
        case Criterion::bic: idx = path.selected_bic; break;
        case Criterion::gcv: idx = path.selected_gcv; break;
      }
      if (idx < 0) {
        row.failed = true;
        row.error = std::string(to_string(crit)) + " degenerate on this path";
      } else {
        const PathRecord& rec = path.records[static_cast<std::size_t>(idx)];
        row.lambda = rec.lambda;
        row.iterations = rec.iterations;
        row.score = score_fit(sc, rec, cfg.cutoff);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace gfar
