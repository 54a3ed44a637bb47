#include "gfar/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "gfar/rng.hpp"

namespace gfar {

Graph::Graph(int p, std::vector<Edge> edges, std::vector<double> weights,
             std::vector<std::uint8_t> bridge_flags, std::vector<std::string> labels)
    : p_(p) {
  if (p < 0) throw ValidationError("graph: vertex count must be non-negative");
  if (weights.empty()) weights.assign(edges.size(), 1.0);
  if (bridge_flags.empty()) bridge_flags.assign(edges.size(), 0);
  if (weights.size() != edges.size() || bridge_flags.size() != edges.size()) {
    throw ValidationError("graph: edge attribute arrays must match the edge count");
  }

  for (auto& e : edges) {
    if (e.u == e.v) {
      throw ValidationError("graph: self-loop at vertex " + std::to_string(e.u));
    }
    if (e.u < 0 || e.v < 0 || e.u >= p || e.v >= p) {
      throw ValidationError("graph: edge (" + std::to_string(e.u) + "," +
                            std::to_string(e.v) + ") outside vertex range");
    }
    if (e.u > e.v) std::swap(e.u, e.v);
  }
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError("graph: edge weights must be finite and non-negative");
    }
  }

  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(edges[a].u, edges[a].v) < std::pair(edges[b].u, edges[b].v);
  });
  edges_.reserve(edges.size());
  weights_.reserve(edges.size());
  bridge_flags_.reserve(edges.size());
  for (std::size_t i : order) {
    if (!edges_.empty() && edges_.back().u == edges[i].u && edges_.back().v == edges[i].v) {
      throw ValidationError("graph: duplicate edge (" + std::to_string(edges[i].u) + "," +
                            std::to_string(edges[i].v) + ")");
    }
    edges_.push_back(edges[i]);
    weights_.push_back(weights[i]);
    bridge_flags_.push_back(bridge_flags[i]);
  }

  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != p) {
      throw ValidationError("graph: label count does not match vertex count");
    }
    labels_ = std::move(labels);
    label_index_.reserve(labels_.size());
    for (int v = 0; v < p_; ++v) {
      if (!label_index_.emplace(labels_[static_cast<std::size_t>(v)], v).second) {
        throw ValidationError("graph: duplicate label '" +
                              labels_[static_cast<std::size_t>(v)] + "'");
      }
    }
  }
}

Graph Graph::from_edge_list(const std::vector<std::pair<std::string, std::string>>& pairs,
                            const std::vector<std::string>& isolated_labels) {
  std::set<std::string> names(isolated_labels.begin(), isolated_labels.end());
  for (const auto& [a, b] : pairs) {
    if (a == b) throw ValidationError("edge list: self-loop at '" + a + "'");
    names.insert(a);
    names.insert(b);
  }
  std::vector<std::string> labels(names.begin(), names.end());
  std::unordered_map<std::string, int> index;
  for (int v = 0; v < static_cast<int>(labels.size()); ++v) {
    index.emplace(labels[static_cast<std::size_t>(v)], v);
  }

  std::set<std::pair<int, int>> dedup;
  for (const auto& [a, b] : pairs) {
    const int u = index[a], v = index[b];
    dedup.insert(std::minmax(u, v));
  }
  std::vector<Edge> edges;
  edges.reserve(dedup.size());
  for (const auto& [u, v] : dedup) edges.push_back({u, v});
  const int p = static_cast<int>(labels.size());  // before the move below
  return Graph(p, std::move(edges), {}, {}, std::move(labels));
}

int Graph::index_of(const std::string& label) const {
  const auto it = label_index_.find(label);
  return it == label_index_.end() ? -1 : it->second;
}

ComponentMap components(const Graph& g) {
  const int p = g.vertex_count();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(p));
  for (int e = 0; e < g.edge_count(); ++e) {
    if (g.weights()[static_cast<std::size_t>(e)] <= 0.0) continue;
    const Edge& ed = g.edge(e);
    adj[static_cast<std::size_t>(ed.u)].push_back(ed.v);
    adj[static_cast<std::size_t>(ed.v)].push_back(ed.u);
  }

  ComponentMap cm;
  cm.component_id.assign(static_cast<std::size_t>(p), -1);
  std::vector<int> stack;
  for (int s = 0; s < p; ++s) {
    if (cm.component_id[static_cast<std::size_t>(s)] >= 0) continue;
    const int id = cm.component_count++;
    cm.component_sizes.push_back(0);
    stack.push_back(s);
    cm.component_id[static_cast<std::size_t>(s)] = id;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++cm.component_sizes[static_cast<std::size_t>(id)];
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (cm.component_id[static_cast<std::size_t>(w)] < 0) {
          cm.component_id[static_cast<std::size_t>(w)] = id;
          stack.push_back(w);
        }
      }
    }
  }
  return cm;
}

Graph bridge_components(const Graph& g, std::span<const Point2> centroids) {
  const ComponentMap cm = components(g);
  if (cm.component_count <= 1) return g;
  if (static_cast<int>(centroids.size()) != g.vertex_count()) {
    throw ValidationError("bridging requires one centroid per vertex, got " +
                          std::to_string(centroids.size()) + " for " +
                          std::to_string(g.vertex_count()) + " vertices");
  }

  std::vector<std::vector<int>> members(static_cast<std::size_t>(cm.component_count));
  for (int v = 0; v < g.vertex_count(); ++v) {
    members[static_cast<std::size_t>(cm.component_id[static_cast<std::size_t>(v)])]
        .push_back(v);
  }

  std::vector<Edge> edges(g.edges().begin(), g.edges().end());
  std::vector<double> weights(g.weights().begin(), g.weights().end());
  std::vector<std::uint8_t> flags(g.bridge_flags().begin(), g.bridge_flags().end());

  // One bridge per component pair: the closest centroid pair, ties broken by
  // the lexicographically smallest canonical vertex pair.
  for (int a = 0; a < cm.component_count; ++a) {
    for (int b = a + 1; b < cm.component_count; ++b) {
      double best_d2 = std::numeric_limits<double>::infinity();
      int best_u = -1, best_v = -1;
      for (int va : members[static_cast<std::size_t>(a)]) {
        for (int vb : members[static_cast<std::size_t>(b)]) {
          const auto [u, v] = std::minmax(va, vb);
          const double dx = centroids[static_cast<std::size_t>(va)].x -
                            centroids[static_cast<std::size_t>(vb)].x;
          const double dy = centroids[static_cast<std::size_t>(va)].y -
                            centroids[static_cast<std::size_t>(vb)].y;
          const double d2 = dx * dx + dy * dy;
          if (d2 < best_d2 ||
              (d2 == best_d2 && std::pair(u, v) < std::pair(best_u, best_v))) {
            best_d2 = d2;
            best_u = u;
            best_v = v;
          }
        }
      }
      edges.push_back({best_u, best_v});
      weights.push_back(1.0);
      flags.push_back(1);
    }
  }

  std::vector<std::string> labels = g.labels();
  return Graph(g.vertex_count(), std::move(edges), std::move(weights), std::move(flags),
               std::move(labels));
}

namespace {

struct SegKey {
  std::int64_t ax, ay, bx, by;
  bool operator==(const SegKey&) const = default;
};

struct SegKeyHash {
  std::size_t operator()(const SegKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::int64_t v : {k.ax, k.ay, k.bx, k.by}) {
      h = mix_seed(h, static_cast<std::uint64_t>(v));
    }
    return static_cast<std::size_t>(h);
  }
};

std::int64_t quantize(double x, double tol, const std::string& id) {
  if (!std::isfinite(x)) {
    throw ValidationError("polygon '" + id + "' has a non-finite coordinate");
  }
  return std::llround(x / tol);
}

}  // namespace

Graph rook_adjacency(const PolygonSet& polys, double tol) {
  if (!(tol > 0.0) || !std::isfinite(tol)) {
    throw ValidationError("rook adjacency: tolerance must be positive");
  }
  const int p = static_cast<int>(polys.areas.size());

  std::vector<std::string> labels;
  labels.reserve(polys.areas.size());
  for (const auto& area : polys.areas) labels.push_back(area.id);

  // Every directed boundary segment, quantized. A shared border appears with
  // opposite orientation in the two areas (GeoJSON winds outer rings one way)
  // but orientation conventions vary in the wild, so both orders are matched.
  std::unordered_map<SegKey, std::vector<int>, SegKeyHash> segments;
  for (int i = 0; i < p; ++i) {
    const auto& area = polys.areas[static_cast<std::size_t>(i)];
    for (const auto& ring : area.rings) {
      const std::size_t n = ring.pts.size();
      if (n < 3) {
        throw ValidationError("polygon '" + area.id + "' has a ring with fewer than 3 vertices");
      }
      std::vector<std::pair<std::int64_t, std::int64_t>> q(n);
      for (std::size_t k = 0; k < n; ++k) {
        q[k] = {quantize(ring.pts[k].x, tol, area.id),
                quantize(ring.pts[k].y, tol, area.id)};
      }
      for (std::size_t k = 0; k < n; ++k) {
        const auto& a = q[k];
        const auto& b = q[(k + 1) % n];
        if (a == b) {
          throw ValidationError("polygon '" + area.id +
                                "' has a degenerate boundary segment at the matching tolerance");
        }
        SegKey key{a.first, a.second, b.first, b.second};
        if (key.ax > key.bx || (key.ax == key.bx && key.ay > key.by)) {
          std::swap(key.ax, key.bx);
          std::swap(key.ay, key.by);
        }
        segments[key].push_back(i);
      }
    }
  }

  std::set<std::pair<int, int>> pairs;
  for (const auto& [key, owners] : segments) {
    for (std::size_t a = 0; a < owners.size(); ++a) {
      for (std::size_t b = a + 1; b < owners.size(); ++b) {
        if (owners[a] != owners[b]) pairs.insert(std::minmax(owners[a], owners[b]));
      }
    }
  }

  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& [u, v] : pairs) edges.push_back({u, v});
  return Graph(p, std::move(edges), {}, {}, std::move(labels));
}

std::vector<Point2> ring_mean_centroids(const PolygonSet& polys) {
  std::vector<Point2> out;
  out.reserve(polys.areas.size());
  for (const auto& area : polys.areas) {
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (const auto& ring : area.rings) {
      if (!ring.outer) continue;
      for (const auto& pt : ring.pts) {
        sx += pt.x;
        sy += pt.y;
        ++n;
      }
    }
    if (n == 0) {
      throw ValidationError("polygon '" + area.id + "' has no outer ring vertices");
    }
    out.push_back({sx / static_cast<double>(n), sy / static_cast<double>(n)});
  }
  return out;
}

LaplacianStencil::LaplacianStencil(const Graph& g)
    : p_(g.vertex_count()), edges_(g.edges().begin(), g.edges().end()) {
  std::vector<SparseSym::Triplet> entries;
  entries.reserve(static_cast<std::size_t>(p_) + 2 * edges_.size());
  for (int j = 0; j < p_; ++j) entries.emplace_back(j, j, 0.0);
  for (const auto& e : edges_) {
    entries.emplace_back(e.u, e.v, 0.0);
    entries.emplace_back(e.v, e.u, 0.0);
  }
  k_ = SparseSym::from_triplets(p_, entries);

  const auto& m = k_.matrix();
  auto slot_of = [&m](int row, int col) {
    const int* inner = m.innerIndexPtr();
    const int* outer = m.outerIndexPtr();
    const int* first = inner + outer[col];
    const int* last = inner + outer[col + 1];
    const int* it = std::lower_bound(first, last, row);
    return static_cast<std::int64_t>(it - inner);
  };

  diag_slot_.reserve(static_cast<std::size_t>(p_));
  for (int j = 0; j < p_; ++j) diag_slot_.push_back(slot_of(j, j));
  off_slot_.reserve(edges_.size());
  for (const auto& e : edges_) {
    off_slot_.push_back({slot_of(e.v, e.u), slot_of(e.u, e.v)});
  }
}

const SparseSym& LaplacianStencil::refresh(std::span<const double> edge_weights) {
  if (edge_weights.size() != edges_.size()) {
    throw ValidationError("laplacian: weight count " + std::to_string(edge_weights.size()) +
                          " does not match edge count " + std::to_string(edges_.size()));
  }
  double* v = k_.values();
  std::fill(v, v + k_.nonzeros(), 0.0);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const double w = edge_weights[e];
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError("laplacian: weights must be finite and non-negative");
    }
    v[diag_slot_[static_cast<std::size_t>(edges_[e].u)]] += w;
    v[diag_slot_[static_cast<std::size_t>(edges_[e].v)]] += w;
    v[off_slot_[e][0]] -= w;
    v[off_slot_[e][1]] -= w;
  }
  return k_;
}

SparseSym laplacian(const Graph& g, std::span<const double> edge_weights) {
  LaplacianStencil stencil(g);
  return stencil.refresh(edge_weights);
}

}  // namespace gfar
