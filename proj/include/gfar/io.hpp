#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gfar/graph.hpp"
#include "gfar/segment.hpp"
#include "gfar/sim.hpp"

namespace gfar {

// ---- readers -------------------------------------------------------------
// CSV files are plain comma-separated with a fixed header; fields are
// whitespace-trimmed and quoting is not supported.

// Header "src,dst"; one undirected edge per row, labels joined by name.
std::vector<std::pair<std::string, std::string>> read_edge_csv(std::istream& in,
                                                               const std::string& source);

// Header "id,value"; exactly one finite value per graph vertex.
Eigen::VectorXd read_values_csv(std::istream& in, const Graph& g, const std::string& source);

// Header "id,x,y"; exactly one point per graph vertex.
std::vector<Point2> read_centroids_csv(std::istream& in, const Graph& g,
                                       const std::string& source);

nlohmann::json load_json_file(const std::string& path);

// FeatureCollection of Polygon / MultiPolygon features carrying an "id"
// property. Areas are returned sorted by id, which fixes the vertex order.
PolygonSet read_geojson_polygons(const nlohmann::json& doc);

// Adds "zone" and "theta_hat" to the properties of every feature, joined by id.
void annotate_geojson(nlohmann::json& doc, const Graph& g, const Segmentation& seg);

// Unit-square map of a simulated grid, one feature per cell, carrying the
// truth, the observation, and (when present) the estimated zones.
nlohmann::json grid_geojson(const Scenario& sc, const Eigen::VectorXd& x,
                            const std::vector<int>& zone_effective,
                            const std::vector<int>* zone_est,
                            const Eigen::VectorXd* theta_hat);

// ---- CLI -----------------------------------------------------------------

struct RunConfig {
  std::string graph_csv;
  std::string geojson_path;
  std::string values_csv;
  std::string precision_mm;
  std::string centroids_csv;
  bool bridge = false;

  std::optional<double> lambda_min;  // default: 1e-3 * p / tr(prec)
  std::optional<double> lambda_max;  // default: 1e+3 * p / tr(prec)
  int lambda_count = 50;
  std::vector<double> lambdas;  // explicit grid, overrides min/max/count

  std::string criterion = "aic";
  double epsilon = 1e-6;
  double tol = 1e-8;
  double cutoff = 0.99;
  bool refit = false;
  std::optional<std::string> trace;  // default: exact up to p = 20000, else stochastic
  int probes = 64;
  std::uint64_t seed = 1;
  std::string out_dir;
};

struct Problem {
  Graph graph;
  Eigen::VectorXd x;
  SparseSym prec;
  std::vector<Point2> centroids;  // empty when unavailable
  bool bridged = false;
  int component_count = 0;  // before bridging
  nlohmann::json geojson_doc;
  bool has_geojson = false;
};

Problem load_problem(const RunConfig& cfg);

// Subcommand entry points; args exclude the program and subcommand names.
// Exit codes: 0 ok, 2 invalid input or usage, 3 numerical failure.
int cli_segment(const std::vector<std::string>& args);
int cli_simulate(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

// %.10g, the precision used for all numeric text output.
std::string format_double(double v);

// JSON value for a double, rounded to the output precision; non-finite
// values map to null (JSON has no representation for them).
nlohmann::json json_number(double v);

}  // namespace gfar
