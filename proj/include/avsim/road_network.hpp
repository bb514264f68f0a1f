#pragma once

// Road geometry and the road-aligned (s, d) frame. Centerlines are
// piecewise-linear polylines; routes are chains of directed edges whose
// concatenated polylines define the route centerline. d is measured from the
// road centerline, positive to the left; lane 0 is the rightmost lane.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "avsim/error.hpp"
#include "avsim/geometry.hpp"

namespace avsim {

inline constexpr std::string_view kNetworkFormat = "avsim-net/1";

/// Default lateral distance beyond which world_to_frenet reports off-road.
inline constexpr double kDefaultMaxOffset = 20.0;

struct Node {
  std::string id;
  Vec2 pos;
};

struct Edge {
  std::string id;
  std::string from;
  std::string to;
  std::vector<Vec2> polyline;
  int lanes = 1;
  double lane_width = 3.5;
  double speed_limit = 13.9;

  double road_width() const { return lanes * lane_width; }
};

struct RouteSpec {
  std::string id;
  std::vector<std::string> edges;
};

struct FrenetPose {
  std::string route_id;
  double s = 0.0;
  double d = 0.0;
  int lane_index = 0;
};

struct WorldPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Resolved centerline of a route.
class Route {
 public:
  const std::string& id() const { return id_; }
  double length() const { return cum_.back(); }
  bool closed() const { return closed_; }
  std::size_t segment_count() const { return dirs_.size(); }
  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& vertex_s() const { return cum_; }
  const std::vector<std::size_t>& edge_indices() const { return edge_indices_; }
  const std::vector<std::string>& edge_ids() const { return spec_.edges; }

  /// Segment k such that vertex_s[k] <= s < vertex_s[k+1] (last segment at s = L).
  std::size_t segment_at(double s) const {
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    const auto k = static_cast<std::ptrdiff_t>(it - cum_.begin()) - 1;
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(dirs_.size()) - 1));
  }

  /// Position within edge_indices() of the edge containing s.
  std::size_t route_edge_at(double s) const {
    const auto it = std::upper_bound(edge_start_.begin(), edge_start_.end(), s);
    const auto k = static_cast<std::ptrdiff_t>(it - edge_start_.begin()) - 1;
    return static_cast<std::size_t>(
        std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(edge_start_.size()) - 1));
  }

  double edge_start(std::size_t route_edge) const { return edge_start_[route_edge]; }

  Vec2 direction(std::size_t segment) const { return dirs_[segment]; }
  double segment_length(std::size_t segment) const { return cum_[segment + 1] - cum_[segment]; }

  /// Maps s into [0, L) on closed routes; identity on open routes.
  double wrap(double s) const {
    if (!closed_) return s;
    const double len = length();
    s = std::fmod(s, len);
    if (s < 0.0) s += len;
    return s;
  }

  /// Signed forward distance from s_from to s_to; on closed routes the shortest
  /// representative in (-L/2, L/2].
  double delta_s(double s_from, double s_to) const {
    double ds = s_to - s_from;
    if (!closed_) return ds;
    const double len = length();
    ds = std::fmod(ds, len);
    if (ds > 0.5 * len) ds -= len;
    if (ds <= -0.5 * len) ds += len;
    return ds;
  }

 private:
  friend class RoadNetwork;

  RouteSpec spec_;
  std::string id_;
  bool closed_ = false;
  std::vector<Vec2> points_;
  std::vector<double> cum_;
  std::vector<Vec2> dirs_;
  std::vector<std::size_t> edge_indices_;
  std::vector<double> edge_start_;
};

class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Validates and resolves a network. Throws ValidationError naming the
  /// offending element.
  static RoadNetwork build(std::vector<Node> nodes, std::vector<Edge> edges,
                           std::vector<RouteSpec> routes) {
    RoadNetwork net;
    net.nodes_ = std::move(nodes);
    net.edges_ = std::move(edges);

    for (std::size_t i = 0; i < net.nodes_.size(); ++i) {
      if (!net.node_index_.emplace(net.nodes_[i].id, i).second)
        throw ValidationError("duplicate node id", net.nodes_[i].id);
    }
    for (std::size_t i = 0; i < net.edges_.size(); ++i) {
      const Edge& e = net.edges_[i];
      if (!net.edge_index_.emplace(e.id, i).second)
        throw ValidationError("duplicate edge id", e.id);
      for (const std::string* ref : {&e.from, &e.to}) {
        if (!net.node_index_.contains(*ref))
          throw ValidationError("edge " + e.id + " references unknown node", *ref);
      }
      if (e.lanes < 1) throw ValidationError("edge needs at least one lane", e.id);
      if (!(e.lane_width > 0.0)) throw ValidationError("lane width must be positive on edge", e.id);
      if (!(e.speed_limit > 0.0)) throw ValidationError("speed limit must be positive on edge", e.id);
      if (e.polyline.size() < 2) throw ValidationError("edge polyline needs two points", e.id);
      for (std::size_t k = 0; k + 1 < e.polyline.size(); ++k) {
        if (!(norm(e.polyline[k + 1] - e.polyline[k]) > 0.0))
          throw ValidationError("zero-length edge segment", e.id);
      }
      const Vec2 from = net.nodes_[net.node_index_.at(e.from)].pos;
      const Vec2 to = net.nodes_[net.node_index_.at(e.to)].pos;
      if (norm(e.polyline.front() - from) > 1e-6 || norm(e.polyline.back() - to) > 1e-6)
        throw ValidationError("edge polyline does not start/end at its nodes", e.id);
    }

    for (RouteSpec& spec : routes) {
      if (spec.edges.empty()) throw ValidationError("route has no edges", spec.id);
      if (net.route_index_.contains(spec.id)) throw ValidationError("duplicate route id", spec.id);
      Route r;
      r.id_ = spec.id;
      for (std::size_t k = 0; k < spec.edges.size(); ++k) {
        const auto it = net.edge_index_.find(spec.edges[k]);
        if (it == net.edge_index_.end())
          throw ValidationError("route " + spec.id + " references unknown edge", spec.edges[k]);
        const Edge& e = net.edges_[it->second];
        if (k > 0 && net.edges_[r.edge_indices_.back()].to != e.from)
          throw ValidationError("route edges do not share a node in route", spec.id);
        r.edge_indices_.push_back(it->second);
        if (r.points_.empty()) {
          r.points_.push_back(e.polyline.front());
          r.cum_.push_back(0.0);
        }
        r.edge_start_.push_back(r.cum_.back());
        for (std::size_t p = 1; p < e.polyline.size(); ++p) {
          const Vec2 a = r.points_.back();
          const Vec2 b = e.polyline[p];
          const double len = norm(b - a);
          r.points_.push_back(b);
          r.cum_.push_back(r.cum_.back() + len);
          r.dirs_.push_back((1.0 / len) * (b - a));
        }
      }
      r.closed_ = net.edges_[r.edge_indices_.front()].from == net.edges_[r.edge_indices_.back()].to;
      r.spec_ = spec;
      net.route_index_.emplace(spec.id, net.routes_.size());
      net.routes_.push_back(std::move(r));
    }
    return net;
  }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Route>& routes() const { return routes_; }

  const Route* find_route(std::string_view id) const {
    const auto it = route_index_.find(std::string(id));
    return it == route_index_.end() ? nullptr : &routes_[it->second];
  }

  const Route& route(std::string_view id) const {
    const Route* r = find_route(id);
    if (r == nullptr) throw ValidationError("unknown route", std::string(id));
    return *r;
  }

  const Edge* find_edge(std::string_view id) const {
    const auto it = edge_index_.find(std::string(id));
    return it == edge_index_.end() ? nullptr : &edges_[it->second];
  }

  const Edge& edge_at(const Route& r, double s) const {
    return edges_[r.edge_indices()[r.route_edge_at(s)]];
  }

  int lane_count(const Route& r, double s) const { return edge_at(r, s).lanes; }

  double half_width(const Route& r, double s) const { return 0.5 * edge_at(r, s).road_width(); }

  int lane_index(const Route& r, double s, double d) const {
    const Edge& e = edge_at(r, s);
    return static_cast<int>(std::floor((d + 0.5 * e.road_width()) / e.lane_width));
  }

  double lane_center(const Route& r, double s, int lane) const {
    const Edge& e = edge_at(r, s);
    return -0.5 * e.road_width() + (lane + 0.5) * e.lane_width;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<Route> routes_;
  std::map<std::string, std::size_t> node_index_;
  std::map<std::string, std::size_t> edge_index_;
  std::map<std::string, std::size_t> route_index_;
};

namespace detail {

/// Unit lateral direction at arc length s: the segment's left normal, or the
/// angle-bisector of adjacent segment normals exactly at an interior vertex.
inline Vec2 lateral_direction(const Route& r, double s, std::size_t seg) {
  const auto& cum = r.vertex_s();
  const std::size_t n = r.segment_count();
  std::optional<std::pair<std::size_t, std::size_t>> joint;
  if (seg > 0 && s == cum[seg]) joint = std::pair{seg - 1, seg};
  if (r.closed() && n > 1 && (s == 0.0 || s == cum.back())) joint = std::pair{n - 1, std::size_t{0}};
  Vec2 normal = left_normal(r.direction(seg));
  if (joint) {
    const Vec2 sum = left_normal(r.direction(joint->first)) + left_normal(r.direction(joint->second));
    const double len = norm(sum);
    if (len > 1e-12) normal = (1.0 / len) * sum;
  }
  return normal;
}

}  // namespace detail

inline WorldPose frenet_to_world(const RoadNetwork& net, const FrenetPose& pose) {
  const Route& r = net.route(pose.route_id);
  if (!(pose.s >= -1e-9 && pose.s <= r.length() + 1e-9))
    throw ValidationError("arc length out of range on route", pose.route_id);
  const double s = std::clamp(pose.s, 0.0, r.length());
  const std::size_t seg = r.segment_at(s);
  const Vec2 base = r.points()[seg] + (s - r.vertex_s()[seg]) * r.direction(seg);
  const Vec2 normal = detail::lateral_direction(r, s, seg);
  const Vec2 p = base + pose.d * normal;
  // Heading follows the lateral-direction convention so that vertices get the mean tangent.
  return {p.x, p.y, normalize_angle(std::atan2(-normal.x, normal.y))};
}

inline FrenetPose world_to_frenet(const RoadNetwork& net, std::string_view route_id, Vec2 p,
                                  double max_offset = kDefaultMaxOffset) {
  const Route& r = net.route(route_id);
  double best_dist = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double best_d = 0.0;
  for (std::size_t k = 0; k < r.segment_count(); ++k) {
    const Vec2 a = r.points()[k];
    const Vec2 u = r.direction(k);
    const double len = r.segment_length(k);
    const double t = std::clamp(dot(p - a, u), 0.0, len);
    const Vec2 q = a + t * u;
    const double dist = norm(p - q);
    if (dist < best_dist - 1e-12) {
      best_dist = dist;
      best_s = r.vertex_s()[k] + t;
      if (t > 0.0 && t < len) {
        best_d = cross(u, p - a);
      } else {
        const double s_vertex = r.vertex_s()[k] + t;
        const Vec2 normal = detail::lateral_direction(r, s_vertex, r.segment_at(s_vertex));
        best_d = dot(p - q, normal) >= 0.0 ? dist : -dist;
      }
    }
  }
  if (best_dist > max_offset)
    throw OffRoadError("point is " + std::to_string(best_dist) + " m from route " +
                       std::string(route_id));
  FrenetPose out{std::string(route_id), best_s, best_d, 0};
  out.lane_index = net.lane_index(r, best_s, best_d);
  return out;
}

inline FrenetPose world_to_frenet(const RoadNetwork& net, std::string_view route_id,
                                  const WorldPose& p, double max_offset = kDefaultMaxOffset) {
  return world_to_frenet(net, route_id, Vec2{p.x, p.y}, max_offset);
}

// ---------------------------------------------------------------------------
// File format

inline nlohmann::json network_to_json(const RoadNetwork& net) {
  using nlohmann::json;
  json doc;
  doc["format"] = kNetworkFormat;
  json nodes = json::array();
  for (const Node& n : net.nodes()) nodes.push_back({{"id", n.id}, {"x", n.pos.x}, {"y", n.pos.y}});
  json edges = json::array();
  for (const Edge& e : net.edges()) {
    json poly = json::array();
    for (const Vec2& p : e.polyline) poly.push_back({p.x, p.y});
    edges.push_back({{"id", e.id},
                     {"from", e.from},
                     {"to", e.to},
                     {"polyline", poly},
                     {"lanes", e.lanes},
                     {"lane_width", e.lane_width},
                     {"speed_limit", e.speed_limit}});
  }
  json routes = json::array();
  for (const Route& r : net.routes()) routes.push_back({{"id", r.id()}, {"edges", r.edge_ids()}});
  doc["nodes"] = nodes;
  doc["edges"] = edges;
  doc["routes"] = routes;
  return doc;
}

inline RoadNetwork network_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("network document must be a JSON object");
  if (doc.value("format", std::string{}) != kNetworkFormat)
    throw ParseError("network format must be \"" + std::string(kNetworkFormat) + "\"");
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<RouteSpec> routes;
  std::string where = "nodes";
  try {
    for (const auto& n : doc.at("nodes")) {
      where = "node " + n.value("id", std::string{"?"});
      nodes.push_back({n.at("id").get<std::string>(), {n.at("x").get<double>(), n.at("y").get<double>()}});
    }
    where = "edges";
    for (const auto& e : doc.at("edges")) {
      where = "edge " + e.value("id", std::string{"?"});
      Edge edge;
      edge.id = e.at("id").get<std::string>();
      edge.from = e.at("from").get<std::string>();
      edge.to = e.at("to").get<std::string>();
      for (const auto& p : e.at("polyline")) edge.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      edge.lanes = e.at("lanes").get<int>();
      edge.lane_width = e.at("lane_width").get<double>();
      edge.speed_limit = e.at("speed_limit").get<double>();
      edges.push_back(std::move(edge));
    }
    where = "routes";
    for (const auto& r : doc.at("routes")) {
      where = "route " + r.value("id", std::string{"?"});
      routes.push_back({r.at("id").get<std::string>(), r.at("edges").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("malformed network (" + where + "): " + ex.what());
  }
  return RoadNetwork::build(std::move(nodes), std::move(edges), std::move(routes));
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError("cannot parse " + path.string() + ": " + ex.what());
  }
}

inline RoadNetwork load_network(const std::filesystem::path& path) {
  return network_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Shipped networks

namespace detail {

inline std::vector<Vec2> arc_polyline(Vec2 center, double radius, double from_deg, double to_deg,
                                      int segments) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= segments; ++i) {
    const double a = deg2rad(from_deg + (to_deg - from_deg) * i / segments);
    pts.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return pts;
}

}  // namespace detail

/// Counter-clockwise stadium loop: two 1 km straights joined by 250 m radius
/// half circles, three 3.5 m lanes, one closed route "loop".
inline RoadNetwork make_highway_loop() {
  constexpr double straight = 1000.0;
  constexpr double radius = 250.0;
  constexpr int arc_segments = 36;
  std::vector<Node> nodes{{"a", {0.0, -radius}}, {"b", {straight, -radius}},
                          {"c", {straight, radius}}, {"d", {0.0, radius}}};
  auto edge = [](std::string id, std::string from, std::string to, std::vector<Vec2> poly) {
    return Edge{std::move(id), std::move(from), std::move(to), std::move(poly), 3, 3.5, 33.3};
  };
  // Arc endpoints are pinned to the exact node coordinates.
  auto east_arc = detail::arc_polyline({straight, 0.0}, radius, -90.0, 90.0, arc_segments);
  east_arc.front() = nodes[1].pos;
  east_arc.back() = nodes[2].pos;
  auto west_arc = detail::arc_polyline({0.0, 0.0}, radius, 90.0, 270.0, arc_segments);
  west_arc.front() = nodes[3].pos;
  west_arc.back() = nodes[0].pos;
  std::vector<Edge> edges{edge("south", "a", "b", {nodes[0].pos, nodes[1].pos}),
                          edge("east", "b", "c", east_arc),
                          edge("north", "c", "d", {nodes[2].pos, nodes[3].pos}),
                          edge("west", "d", "a", west_arc)};
  std::vector<RouteSpec> routes{{"loop", {"south", "east", "north", "west"}}};
  return RoadNetwork::build(std::move(nodes), std::move(edges), std::move(routes));
}

/// 3x3 grid of signal-free intersections, 200 m apart, formed by six one-way
/// two-lane streets with alternating directions. Each street is one open route
/// that starts and ends 100 m outside the grid.
inline RoadNetwork make_urban_grid() {
  constexpr double spacing = 200.0;
  constexpr double lead = 100.0;
  constexpr int n = 3;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<RouteSpec> routes;
  auto cross_id = [](int i, int j) { return "x" + std::to_string(i) + std::to_string(j); };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) nodes.push_back({cross_id(i, j), {i * spacing, j * spacing}});

  const double far = (n - 1) * spacing + lead;
  for (int street = 0; street < n; ++street) {
    for (const bool horizontal : {true, false}) {
      const bool forward = street % 2 == 0;
      const std::string name = std::string(horizontal ? "row" : "col") + std::to_string(street);
      auto at = [&](double along) {
        return horizontal ? Vec2{along, street * spacing} : Vec2{street * spacing, along};
      };
      std::vector<std::pair<std::string, Vec2>> chain;
      chain.emplace_back(name + "_in", at(forward ? -lead : far));
      for (int k = 0; k < n; ++k) {
        const int idx = forward ? k : n - 1 - k;
        chain.emplace_back(horizontal ? cross_id(idx, street) : cross_id(street, idx),
                           at(idx * spacing));
      }
      chain.emplace_back(name + "_out", at(forward ? far : -lead));
      nodes.push_back({chain.front().first, chain.front().second});
      nodes.push_back({chain.back().first, chain.back().second});
      RouteSpec route{name, {}};
      for (std::size_t k = 0; k + 1 < chain.size(); ++k) {
        const std::string id = name + "_" + std::to_string(k);
        edges.push_back({id, chain[k].first, chain[k + 1].first, {chain[k].second, chain[k + 1].second},
                         2, 3.5, 13.9});
        route.edges.push_back(id);
      }
      routes.push_back(std::move(route));
    }
  }
  return RoadNetwork::build(std::move(nodes), std::move(edges), std::move(routes));
}

inline std::vector<std::pair<std::string, RoadNetwork>> builtin_networks() {
  std::vector<std::pair<std::string, RoadNetwork>> out;
  out.emplace_back("highway", make_highway_loop());
  out.emplace_back("urban", make_urban_grid());
  return out;
}

/// Built-in network by name, or a network file path.
inline RoadNetwork resolve_network(const std::string& name_or_path,
                                   const std::filesystem::path& base_dir = {}) {
  if (name_or_path == "highway") return make_highway_loop();
  if (name_or_path == "urban") return make_urban_grid();
  std::filesystem::path p(name_or_path);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return load_network(p);
}

}  // namespace avsim
