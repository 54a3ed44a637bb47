#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gfar/cholesky.hpp"
#include "gfar/graph.hpp"

namespace gfar {

struct ArConfig {
  // Floor added to squared differences in the weight update; keeps weights
  // finite and bounds each penalty term delta below 1.
  double epsilon = 1e-6;
  // Convergence: max absolute change of the per-edge deltas between sweeps.
  double tol = 1e-8;
  // Edges with delta >= cutoff are treated as cut when extracting zones.
  double cutoff = 0.99;
  int max_iter = 10000;

  TraceMode trace_mode = TraceMode::exact;
  int trace_probes = 64;
  std::uint64_t trace_seed = SparseCholesky::kDefaultProbeSeed;

  // Reuse converged weights from one grid point to seed the next.
  bool warm_start = true;

  void validate() const;
};

// State of one fit: the estimate, the edge weights at convergence, and the
// per-edge deltas v * (theta_u - theta_v)^2 in [0, 1).
struct FitState {
  Eigen::VectorXd theta;
  std::vector<double> edge_weights;
  std::vector<double> deltas;
  int iterations = 0;
  bool converged = false;
};

// Observes accepted iterates: iteration number (1-based), the solution of
// that sweep's linear system, and the weights that system was built with.
using IterateCallback =
    std::function<void(int iteration, const Eigen::VectorXd& theta,
                       std::span<const double> weights_used)>;

// Data misfit (x - theta)' prec (x - theta) / 2.
double cost(const Eigen::VectorXd& x, const Eigen::VectorXd& theta, const SparseSym& prec);

// One fit at a fixed lambda: alternate solving
//   (prec + lambda K(v)) theta = prec x
// with the weight update v_uv = 1 / ((theta_u - theta_v)^2 + epsilon) until
// the deltas stabilize. Empty init_weights means all ones.
FitState ar_iterate(const Eigen::VectorXd& x, const SparseSym& prec, const Graph& g,
                    double lambda, std::span<const double> init_weights,
                    const ArConfig& cfg, const IterateCallback& callback = {});

// Same iteration with a design matrix: the data term becomes X' prec X and
// the right-hand side X' prec x. With X = I this reduces to ar_iterate.
FitState ar_iterate_regression(const Eigen::VectorXd& x, const Eigen::MatrixXd& design,
                               const SparseSym& prec, const Graph& g, double lambda,
                               const ArConfig& cfg, const IterateCallback& callback = {});
FitState ar_iterate_regression(const Eigen::VectorXd& x,
                               const Eigen::SparseMatrix<double>& design,
                               const SparseSym& prec, const Graph& g, double lambda,
                               const ArConfig& cfg, const IterateCallback& callback = {});

struct PathRecord {
  double lambda = 0.0;
  Eigen::VectorXd theta_hat;
  std::vector<double> deltas;
  double effective_dim = 0.0;  // Tr((prec + lambda K)^-1 prec) at converged weights
  double cost2 = 0.0;          // 2 * cost
  double aic = 0.0;
  double bic = 0.0;
  double gcv = 0.0;
  int iterations = 0;
  double wall_seconds = 0.0;
  bool converged = false;
  bool failed = false;
  std::string error;
};

struct PathFit {
  std::vector<double> lambda_grid;
  std::vector<PathRecord> records;
  bool partial = false;  // some grid points failed
  // Indices of the per-criterion minima; -1 when the criterion is degenerate.
  int selected_aic = -1;
  int selected_bic = -1;
  int selected_gcv = -1;
};

// Fits every lambda in ascending order, warm-starting each grid point from
// the previous converged weights (when enabled). Failures at a grid point are
// recorded and the path continues from the last successful weights.
PathFit run_path(const Eigen::VectorXd& x, const SparseSym& prec, const Graph& g,
                 std::span<const double> lambdas, const ArConfig& cfg);

// count log-spaced points from lo to hi inclusive; count == 1 gives {lo}.
std::vector<double> log_spaced_grid(double lo, double hi, int count);

struct Segmentation {
  std::vector<int> zone_id;  // contiguous ids in first-occurrence order
  int zone_count = 0;
  Eigen::VectorXd fitted;          // per-vertex value
  std::vector<double> zone_means;  // mean of fitted per zone
  std::vector<int> cut_edges;      // edge indices with delta >= cutoff
};

// Zones are the connected components of the subgraph of kept edges
// (delta < cutoff). Vertex values are the shrinkage estimates from the fit.
Segmentation extract_zones(const Graph& g, const Eigen::VectorXd& theta,
                           std::span<const double> deltas, double cutoff);
Segmentation extract_zones(const Graph& g, const FitState& state, const ArConfig& cfg);

// Replaces the fitted values with the precision-weighted mean of x over each
// zone (the generalized least squares refit on the zone indicator basis).
void refit_zone_values(Segmentation& seg, const Eigen::VectorXd& x, const SparseSym& prec);

}  // namespace gfar
