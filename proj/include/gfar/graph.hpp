#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gfar/sparse_matrix.hpp"

namespace gfar {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Undirected edge, canonicalized to u < v.
struct Edge {
  int u = 0;
  int v = 0;
};

// Immutable undirected graph over vertices 0..p-1 with optional string
// labels. Edges are canonical (u < v), sorted, and unique; each carries a
// structural weight (1 unless stated otherwise) and a flag marking edges
// added artificially to connect components.
class Graph {
 public:
  Graph() = default;
  Graph(int p, std::vector<Edge> edges, std::vector<double> weights = {},
        std::vector<std::uint8_t> bridge_flags = {},
        std::vector<std::string> labels = {});

  // Vertices are the distinct labels in `pairs` plus `isolated_labels`,
  // indexed in sorted label order. Duplicate pairs collapse to one edge;
  // self-loops are rejected.
  static Graph from_edge_list(const std::vector<std::pair<std::string, std::string>>& pairs,
                              const std::vector<std::string>& isolated_labels = {});

  int vertex_count() const { return p_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }
  std::span<const double> weights() const { return weights_; }
  std::span<const std::uint8_t> bridge_flags() const { return bridge_flags_; }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int v) const { return labels_[static_cast<std::size_t>(v)]; }
  int index_of(const std::string& label) const;  // -1 when unknown

 private:
  int p_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  std::vector<std::uint8_t> bridge_flags_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> label_index_;
};

struct ComponentMap {
  std::vector<int> component_id;  // contiguous ids in first-occurrence order
  std::vector<int> component_sizes;
  int component_count = 0;
};

// Connected components over edges with weight > 0.
ComponentMap components(const Graph& g);

// Connects a disconnected graph by adding, for every pair of components, the
// edge between their closest vertices by centroid distance (ties broken by
// smallest vertex pair). Added edges have weight 1 and are flagged. A graph
// that is already connected is returned unchanged.
Graph bridge_components(const Graph& g, std::span<const Point2> centroids);

struct Ring {
  std::vector<Point2> pts;  // closing duplicate removed; >= 3 distinct points
  bool outer = true;
};

struct AreaPolygon {
  std::string id;
  std::vector<Ring> rings;  // outer rings and holes of all parts
};

struct PolygonSet {
  std::vector<AreaPolygon> areas;
};

// Rook adjacency: two areas are neighbors iff they share a boundary segment
// of positive length. Boundary segments are matched after quantizing the
// endpoints to a grid of pitch `tol`; point-only contact does not count.
Graph rook_adjacency(const PolygonSet& polys, double tol = 1e-9);

// Arithmetic mean of the outer-ring vertices of each area; a cheap label
// point for bridging, not a true centroid.
std::vector<Point2> ring_mean_centroids(const PolygonSet& polys);

// Weighted graph Laplacian K = D - A with a fixed pattern: one slot per
// vertex and two per edge, present regardless of the weight values. refresh()
// rewrites the values in O(p + |E|) without reallocating, so factorization
// patterns stay stable while weights evolve.
class LaplacianStencil {
 public:
  explicit LaplacianStencil(const Graph& g);

  const SparseSym& refresh(std::span<const double> edge_weights);
  const SparseSym& current() const { return k_; }

 private:
  int p_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::int64_t> diag_slot_;
  std::vector<std::array<std::int64_t, 2>> off_slot_;
  SparseSym k_;
};

// One-shot weighted Laplacian.
SparseSym laplacian(const Graph& g, std::span<const double> edge_weights);

}  // namespace gfar
