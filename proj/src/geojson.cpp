#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "gfar/io.hpp"

namespace gfar {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

std::string canonical_id(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  fail("feature id must be a string or a number");
}

// RFC 7946 puts the identifier in the Feature's own "id" member;
// properties.id is the common informal variant. Accept both.
std::string feature_id(const json& feature) {
  if (feature.contains("id")) return canonical_id(feature["id"]);
  const auto props = feature.find("properties");
  if (props != feature.end() && props->is_object() && props->contains("id")) {
    return canonical_id((*props)["id"]);
  }
  fail("geojson: every feature needs an 'id' member or an 'id' property");
}

Ring parse_ring(const json& coords, const std::string& id, bool outer) {
  if (!coords.is_array() || coords.size() < 4) {
    fail("feature '" + id + "': ring must be an array of at least 4 positions");
  }
  Ring ring;
  ring.outer = outer;
  ring.pts.reserve(coords.size());
  for (const auto& pos : coords) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
      fail("feature '" + id + "': position must be an array of at least 2 numbers");
    }
    const double x = pos[0].get<double>();
    const double y = pos[1].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y)) {
      fail("feature '" + id + "': non-finite coordinate");
    }
    ring.pts.push_back({x, y});
  }
  const Point2 first = ring.pts.front();
  const Point2 last = ring.pts.back();
  if (first.x != last.x || first.y != last.y) {
    fail("feature '" + id + "': ring is not closed");
  }
  ring.pts.pop_back();
  std::set<std::pair<double, double>> distinct;
  for (const auto& pt : ring.pts) distinct.insert({pt.x, pt.y});
  if (distinct.size() < 3) {
    fail("feature '" + id + "': ring has fewer than 3 distinct vertices");
  }
  return ring;
}

void parse_polygon(const json& coords, const std::string& id, AreaPolygon& area) {
  if (!coords.is_array() || coords.empty()) {
    fail("feature '" + id + "': polygon must have at least one ring");
  }
  for (std::size_t r = 0; r < coords.size(); ++r) {
    area.rings.push_back(parse_ring(coords[r], id, r == 0));
  }
}

}  // namespace

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(path + ": " + e.what());
  }
}

PolygonSet read_geojson_polygons(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    fail("geojson: expected a FeatureCollection");
  }
  const auto features = doc.find("features");
  if (features == doc.end() || !features->is_array()) {
    fail("geojson: missing features array");
  }

  PolygonSet polys;
  polys.areas.reserve(features->size());
  for (const auto& feature : *features) {
    if (!feature.is_object() || feature.value("type", "") != "Feature") {
      fail("geojson: every element of features must be a Feature");
    }
    AreaPolygon area;
    area.id = feature_id(feature);

    const auto geom = feature.find("geometry");
    if (geom == feature.end() || !geom->is_object()) {
      fail("feature '" + area.id + "': missing geometry");
    }
    const std::string type = geom->value("type", "");
    const auto coords = geom->find("coordinates");
    if (coords == geom->end()) fail("feature '" + area.id + "': missing coordinates");
    if (type == "Polygon") {
      parse_polygon(*coords, area.id, area);
    } else if (type == "MultiPolygon") {
      if (!coords->is_array() || coords->empty()) {
        fail("feature '" + area.id + "': empty MultiPolygon");
      }
      for (const auto& poly : *coords) parse_polygon(poly, area.id, area);
    } else {
      fail("feature '" + area.id + "': unsupported geometry type '" + type + "'");
    }
    polys.areas.push_back(std::move(area));
  }

  std::sort(polys.areas.begin(), polys.areas.end(),
            [](const AreaPolygon& a, const AreaPolygon& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < polys.areas.size(); ++i) {
    if (polys.areas[i].id == polys.areas[i - 1].id) {
      fail("geojson: duplicate feature id '" + polys.areas[i].id + "'");
    }
  }
  return polys;
}

void annotate_geojson(nlohmann::json& doc, const Graph& g, const Segmentation& seg) {
  for (auto& feature : doc["features"]) {
    const std::string id = feature_id(feature);
    const int v = g.index_of(id);
    if (v < 0) fail("geojson: feature '" + id + "' is not a graph vertex");
    feature["properties"]["zone"] = seg.zone_id[static_cast<std::size_t>(v)];
    feature["properties"]["theta_hat"] = json_number(seg.fitted(v));
  }
}

nlohmann::json grid_geojson(const Scenario& sc, const Eigen::VectorXd& x,
                            const std::vector<int>& zone_effective,
                            const std::vector<int>* zone_est,
                            const Eigen::VectorXd* theta_hat) {
  json features = json::array();
  for (int r = 0; r < sc.rows; ++r) {
    for (int c = 0; c < sc.cols; ++c) {
      const int i = r * sc.cols + c;
      const double x0 = c, y0 = r;
      json ring = json::array({json::array({x0, y0}), json::array({x0 + 1, y0}),
                               json::array({x0 + 1, y0 + 1}), json::array({x0, y0 + 1}),
                               json::array({x0, y0})});
      json props = {
          {"id", std::to_string(i)},
          {"row", r},
          {"col", c},
          {"zone_drawn", sc.zone_drawn[static_cast<std::size_t>(i)]},
          {"zone_effective", zone_effective[static_cast<std::size_t>(i)]},
          {"theta_true", json_number(sc.theta_true(i))},
          {"x", json_number(x(i))},
      };
      if (zone_est) props["zone_est"] = (*zone_est)[static_cast<std::size_t>(i)];
      if (theta_hat) props["theta_hat"] = json_number((*theta_hat)(i));
      features.push_back({{"type", "Feature"},
                          {"properties", std::move(props)},
                          {"geometry",
                           {{"type", "Polygon"}, {"coordinates", json::array({ring})}}}});
    }
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

}  // namespace gfar
