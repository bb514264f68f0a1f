#pragma once

// Microscopic traffic: demand sampling, fixed-step updates of IDM background
// vehicles and one externally controlled ego, gap-acceptance lane changes,
// first-come priority at unsignalized crossings, and body-overlap collisions.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "avsim/error.hpp"
#include "avsim/geometry.hpp"
#include "avsim/idm.hpp"
#include "avsim/rng.hpp"
#include "avsim/road_network.hpp"

namespace avsim {

inline constexpr std::string_view kDemandFormat = "avsim-demand/1";
inline constexpr double kDefaultDt = 0.1;
/// Deceleration applied when a follower already overlaps its leader.
inline constexpr double kEmergencyDecel = 9.0;

struct Distribution {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;

  void validate(const std::string& name) const {
    if (!(max >= min)) throw ValidationError("infeasible truncation (max < min) for", name);
    if (!(mean >= min && mean <= max)) throw ValidationError("mean outside [min, max] for", name);
    if (!(std >= 0.0)) throw ValidationError("negative std for", name);
  }
};

/// Sampled quantities, in draw order.
inline const std::array<std::string, 9>& demand_parameters() {
  static const std::array<std::string, 9> names{"v0", "T", "s0", "a_max", "b",
                                                "delta", "length", "width", "height"};
  return names;
}

inline const std::map<std::string, Distribution>& default_distributions() {
  static const std::map<std::string, Distribution> d{
      {"v0", {30.0, 3.0, 20.0, 40.0}},    {"T", {1.5, 0.3, 0.8, 2.5}},
      {"s0", {2.0, 0.5, 1.0, 4.0}},       {"a_max", {1.5, 0.3, 0.8, 2.5}},
      {"b", {2.0, 0.3, 1.0, 3.0}},        {"delta", {4.0, 0.0, 4.0, 4.0}},
      {"length", {4.6, 0.4, 3.8, 5.5}},   {"width", {1.85, 0.1, 1.6, 2.1}},
      {"height", {1.5, 0.15, 1.3, 2.0}},
  };
  return d;
}

enum class Placement {
  kEntry,   ///< depart one by one at the route start, depart_spacing apart
  kSpread,  ///< placed evenly along the route at time zero
};

struct RouteDemand {
  std::string route;
  int count = 0;
  double depart_spacing = 2.0;
  Placement placement = Placement::kEntry;
  std::map<std::string, Distribution> distributions = default_distributions();
};

struct DemandConfig {
  std::uint64_t seed = 1;
  std::vector<RouteDemand> routes;

  void validate() const {
    for (const RouteDemand& r : routes) {
      if (r.count < 0) throw ValidationError("negative vehicle count for route", r.route);
      if (!(r.depart_spacing >= 0.0)) throw ValidationError("negative depart spacing for route", r.route);
      for (const auto& [name, dist] : r.distributions) {
        dist.validate(name);
        if (name == "delta" ? !(dist.min >= 1.0) : !(dist.min > 0.0))
          throw ValidationError("distribution admits invalid values for", name);
      }
    }
  }
};

struct VehicleState {
  int id = 0;
  FrenetPose pose;
  double v = 0.0;
  double accel = 0.0;
  double length = 4.6;
  double width = 1.85;
  double height = 1.5;
  IdmParams params;
  bool is_ego = false;
  double lat_speed = 0.0;
  double depart_time = 0.0;
  double odometer = 0.0;
  double last_lane_change = -std::numeric_limits<double>::infinity();
  bool prepositioned = false;  ///< inserted at t = 0 without entry-gap checks
};

struct CollisionPair {
  int a = 0;
  int b = 0;
  friend auto operator<=>(const CollisionPair&, const CollisionPair&) = default;
};

/// A point where two route centerlines cross or touch.
struct ConflictPoint {
  std::array<std::string, 2> routes;
  std::array<double, 2> s{};
  /// Half road width of the *other* route at the crossing, per side.
  std::array<double, 2> crossing_half_width{};
};

struct ConflictArrival {
  int vehicle = 0;
  int side = 0;
  double time = 0.0;
};

struct TrafficOptions {
  bool lane_changes = true;
  double lane_change_cooldown = 5.0;
  /// Distance before a crossing at which vehicles register their arrival.
  double approach_distance = 40.0;
  double conflict_margin = 1.0;
};

struct TrafficState {
  double time = 0.0;
  std::uint64_t step = 0;
  std::vector<VehicleState> vehicles;  ///< active, ascending id
  std::vector<VehicleState> pending;   ///< not yet departed, ascending (depart_time, id)
  std::vector<CollisionPair> collisions;
  std::vector<int> finished;  ///< ids removed at their route end during the last step
  std::vector<std::vector<ConflictArrival>> conflict_queues;

  const VehicleState* find(int id) const {
    const auto it = std::lower_bound(vehicles.begin(), vehicles.end(), id,
                                     [](const VehicleState& v, int key) { return v.id < key; });
    return it != vehicles.end() && it->id == id ? &*it : nullptr;
  }
  VehicleState* find(int id) {
    return const_cast<VehicleState*>(std::as_const(*this).find(id));
  }
};

// ---------------------------------------------------------------------------
// Demand

/// Samples with an externally owned generator, which callers may keep drawing
/// from afterwards.
inline std::vector<VehicleState> sample_demand(const DemandConfig& cfg, const RoadNetwork& net,
                                               rng::Pcg32& gen) {
  cfg.validate();
  std::vector<VehicleState> out;
  int next_id = 0;
  for (const RouteDemand& block : cfg.routes) {
    const Route& route = net.route(block.route);
    const int lanes = net.lane_count(route, 0.0);
    for (int k = 0; k < block.count; ++k) {
      std::map<std::string, double> x;
      for (const std::string& name : demand_parameters()) {
        const auto it = block.distributions.find(name);
        const Distribution& d =
            it != block.distributions.end() ? it->second : default_distributions().at(name);
        x[name] = rng::truncated_normal(gen, d.mean, d.std, d.min, d.max);
      }
      VehicleState veh;
      veh.id = next_id++;
      veh.params = {x["v0"], x["T"], x["s0"], x["a_max"], x["b"], x["delta"]};
      veh.length = x["length"];
      veh.width = x["width"];
      veh.height = x["height"];
      const int lane = k % lanes;
      double s = 0.0;
      if (block.placement == Placement::kSpread) {
        const int in_lane = (block.count - lane + lanes - 1) / lanes;
        const double spacing = route.length() / in_lane;
        s = (k / lanes + (lane + 0.5) / lanes) * spacing;
        veh.prepositioned = true;
      } else {
        s = 0.5 * veh.length;
        veh.depart_time = k * block.depart_spacing;
      }
      veh.pose = {block.route, s, net.lane_center(route, s, lane), lane};
      veh.v = std::min(veh.params.v0, net.edge_at(route, s).speed_limit);
      out.push_back(std::move(veh));
    }
  }
  return out;
}

inline std::vector<VehicleState> sample_demand(const DemandConfig& cfg, const RoadNetwork& net) {
  rng::Pcg32 gen(cfg.seed, rng::Stream::kDemand);
  return sample_demand(cfg, net, gen);
}

inline nlohmann::json demand_to_json(const DemandConfig& cfg) {
  using nlohmann::json;
  json routes = json::array();
  for (const RouteDemand& r : cfg.routes) {
    json dists = json::object();
    for (const auto& [name, d] : r.distributions)
      dists[name] = {{"mean", d.mean}, {"std", d.std}, {"min", d.min}, {"max", d.max}};
    routes.push_back({{"route", r.route},
                      {"count", r.count},
                      {"depart_spacing", r.depart_spacing},
                      {"placement", r.placement == Placement::kSpread ? "spread" : "entry"},
                      {"distributions", dists}});
  }
  return {{"format", kDemandFormat}, {"seed", cfg.seed}, {"routes", routes}};
}

inline DemandConfig demand_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", std::string{}) != kDemandFormat)
    throw ParseError("demand format must be \"" + std::string(kDemandFormat) + "\"");
  DemandConfig cfg;
  std::string where = "seed";
  try {
    cfg.seed = doc.value("seed", std::uint64_t{1});
    for (const auto& r : doc.at("routes")) {
      where = "route block " + r.value("route", std::string{"?"});
      RouteDemand block;
      block.route = r.at("route").get<std::string>();
      block.count = r.at("count").get<int>();
      block.depart_spacing = r.value("depart_spacing", block.depart_spacing);
      const std::string placement = r.value("placement", std::string{"entry"});
      if (placement == "spread") {
        block.placement = Placement::kSpread;
      } else if (placement != "entry") {
        throw ValidationError("unknown placement for route", block.route);
      }
      if (r.contains("distributions")) {
        for (const auto& [name, d] : r.at("distributions").items()) {
          if (!default_distributions().contains(name))
            throw ValidationError("unknown demand parameter", name);
          block.distributions[name] = {d.at("mean").get<double>(), d.at("std").get<double>(),
                                       d.at("min").get<double>(), d.at("max").get<double>()};
        }
      }
      cfg.routes.push_back(std::move(block));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError("malformed demand (" + where + "): " + ex.what());
  }
  cfg.validate();
  return cfg;
}

inline DemandConfig load_demand(const std::filesystem::path& path) {
  return demand_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Geometry helpers

inline OrientedBox vehicle_box(const RoadNetwork& net, const VehicleState& v) {
  const WorldPose w = frenet_to_world(net, v.pose);
  return {{w.x, w.y}, w.heading, v.length, v.width, v.height};
}

/// Nearest vehicles ahead of and behind position s whose lateral extent
/// overlaps the band [d - half_width, d + half_width] on the same route.
/// Distances are center-to-center along the route; loop routes wrap.
struct BandNeighbors {
  const VehicleState* leader = nullptr;
  double leader_ds = std::numeric_limits<double>::infinity();
  const VehicleState* follower = nullptr;
  double follower_ds = std::numeric_limits<double>::infinity();
};

inline BandNeighbors query_band(const TrafficState& state, const Route& route, double s, double d,
                                double half_width, int self_id) {
  BandNeighbors out;
  const double len = route.length();
  for (const VehicleState& o : state.vehicles) {
    if (o.id == self_id || o.pose.route_id != route.id()) continue;
    if (std::abs(o.pose.d - d) >= 0.5 * o.width + half_width) continue;
    double ahead = 0.0;
    double behind = 0.0;
    bool is_ahead = false;
    if (route.closed()) {
      const double fwd = route.wrap(o.pose.s - s);
      if (fwd == 0.0) {
        is_ahead = o.id > self_id;
      } else {
        ahead = fwd;
        behind = len - fwd;
        if (ahead < out.leader_ds) {
          out.leader_ds = ahead;
          out.leader = &o;
        }
        if (behind < out.follower_ds) {
          out.follower_ds = behind;
          out.follower = &o;
        }
        continue;
      }
    } else {
      const double ds = o.pose.s - s;
      is_ahead = ds > 0.0 || (ds == 0.0 && o.id > self_id);
      ahead = ds;
      behind = -ds;
    }
    if (is_ahead && ahead < out.leader_ds) {
      out.leader_ds = ahead;
      out.leader = &o;
    } else if (!is_ahead && behind < out.follower_ds) {
      out.follower_ds = behind;
      out.follower = &o;
    }
  }
  return out;
}

inline double bumper_gap(double center_ds, const VehicleState& a, const VehicleState& b) {
  return center_ds - 0.5 * (a.length + b.length);
}

// ---------------------------------------------------------------------------
// Crossings

/// All points where the centerlines of two different routes cross or touch.
inline std::vector<ConflictPoint> find_conflicts(const RoadNetwork& net) {
  std::vector<ConflictPoint> out;
  const auto& routes = net.routes();
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (std::size_t j = i + 1; j < routes.size(); ++j) {
      const Route& ra = routes[i];
      const Route& rb = routes[j];
      for (std::size_t ka = 0; ka < ra.segment_count(); ++ka) {
        const Vec2 p = ra.points()[ka];
        const Vec2 r = ra.points()[ka + 1] - p;
        for (std::size_t kb = 0; kb < rb.segment_count(); ++kb) {
          const Vec2 q = rb.points()[kb];
          const Vec2 e = rb.points()[kb + 1] - q;
          const double denom = cross(r, e);
          if (std::abs(denom) < 1e-12) continue;
          const double t = cross(q - p, e) / denom;
          const double u = cross(q - p, r) / denom;
          constexpr double tol = 1e-9;
          if (t < -tol || t > 1.0 + tol || u < -tol || u > 1.0 + tol) continue;
          const double sa = ra.vertex_s()[ka] + std::clamp(t, 0.0, 1.0) * ra.segment_length(ka);
          const double sb = rb.vertex_s()[kb] + std::clamp(u, 0.0, 1.0) * rb.segment_length(kb);
          const bool duplicate = std::any_of(out.begin(), out.end(), [&](const ConflictPoint& c) {
            return c.routes[0] == ra.id() && c.routes[1] == rb.id() &&
                   std::abs(c.s[0] - sa) < 1e-6 && std::abs(c.s[1] - sb) < 1e-6;
          });
          if (duplicate) continue;
          out.push_back({{ra.id(), rb.id()}, {sa, sb}, {net.half_width(rb, sb), net.half_width(ra, sa)}});
        }
      }
    }
  }
  return out;
}

namespace detail {

struct ConflictZone {
  std::size_t conflict = 0;
  int side = 0;
  double lo = 0.0;
  double hi = 0.0;
};

inline std::vector<ConflictZone> zones_for(const std::vector<ConflictPoint>& conflicts,
                                           const std::string& route_id, const TrafficOptions& opt) {
  std::vector<ConflictZone> out;
  for (std::size_t c = 0; c < conflicts.size(); ++c) {
    for (int side = 0; side < 2; ++side) {
      if (conflicts[c].routes[side] != route_id) continue;
      const double half = conflicts[c].crossing_half_width[side] + opt.conflict_margin;
      out.push_back({c, side, conflicts[c].s[side] - half, conflicts[c].s[side] + half});
    }
  }
  return out;
}

inline bool arrives_before(const ConflictArrival& a, const ConflictArrival& b) {
  return a.time < b.time || (a.time == b.time && a.vehicle < b.vehicle);
}

/// Refreshes arrival registrations for every active vehicle.
inline void update_conflict_queues(TrafficState& state, const std::vector<ConflictPoint>& conflicts,
                                   const TrafficOptions& opt) {
  state.conflict_queues.resize(conflicts.size());
  for (auto& q : state.conflict_queues) {
    std::erase_if(q, [&](const ConflictArrival& a) { return state.find(a.vehicle) == nullptr; });
  }
  for (const VehicleState& v : state.vehicles) {
    for (const ConflictZone& z : zones_for(conflicts, v.pose.route_id, opt)) {
      auto& q = state.conflict_queues[z.conflict];
      const auto it = std::find_if(q.begin(), q.end(), [&](const ConflictArrival& a) {
        return a.vehicle == v.id && a.side == z.side;
      });
      const double front = v.pose.s + 0.5 * v.length;
      const double rear = v.pose.s - 0.5 * v.length;
      if (rear > z.hi) {
        if (it != q.end()) q.erase(it);
      } else if (front >= z.lo - opt.approach_distance && it == q.end()) {
        q.push_back({v.id, z.side, state.time});
      }
    }
  }
}

/// Bumper distance to the nearest crossing the vehicle must yield at, if any.
inline std::optional<double> yield_gap(const TrafficState& state, const VehicleState& v,
                                       const std::vector<ConflictPoint>& conflicts,
                                       const TrafficOptions& opt) {
  std::optional<double> best;
  const double front = v.pose.s + 0.5 * v.length;
  for (const ConflictZone& z : zones_for(conflicts, v.pose.route_id, opt)) {
    if (front >= z.lo || z.conflict >= state.conflict_queues.size()) continue;
    const auto& q = state.conflict_queues[z.conflict];
    const auto self = std::find_if(q.begin(), q.end(), [&](const ConflictArrival& a) {
      return a.vehicle == v.id && a.side == z.side;
    });
    if (self == q.end()) continue;
    const bool must_yield = std::any_of(q.begin(), q.end(), [&](const ConflictArrival& a) {
      return a.side != z.side && arrives_before(a, *self);
    });
    if (must_yield) {
      const double gap = z.lo - front;
      if (!best || gap < *best) best = gap;
    }
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dynamics

/// Car-following acceleration a background vehicle would apply in `state`:
/// IDM toward the nearest overlapping vehicle ahead, further limited by a stop
/// at any crossing where it has to yield.
inline double background_acceleration(const TrafficState& state, const RoadNetwork& net,
                                      const VehicleState& v,
                                      const std::vector<ConflictPoint>& conflicts = {},
                                      const TrafficOptions& opt = {}) {
  const Route& route = net.route(v.pose.route_id);
  const BandNeighbors nb = query_band(state, route, v.pose.s, v.pose.d, 0.5 * v.width, v.id);
  double accel = 0.0;
  try {
    if (nb.leader != nullptr) {
      accel = idm_acceleration(v.v, bumper_gap(nb.leader_ds, v, *nb.leader), v.v - nb.leader->v, v.params);
    } else {
      accel = idm_acceleration(v.v, std::nullopt, 0.0, v.params);
    }
    if (const auto stop = detail::yield_gap(state, v, conflicts, opt); stop && *stop > 0.0)
      accel = std::min(accel, idm_acceleration(v.v, *stop, v.v, v.params));
  } catch (const DegenerateGapError&) {
    accel = -kEmergencyDecel;
  }
  return accel;
}

/// Gap-acceptance lane change for a background vehicle. A change is considered
/// only when the current lane is constrained (a slower vehicle within
/// 2(s0 + vT) + 10 m) and the cooldown has elapsed; the left lane is tried
/// before the right one. A target is accepted when the lead gap is at least
/// s0 + vT of the changer, the lag gap at least s0 + vT of the new follower,
/// and the lead gap is larger than in the current lane.
inline std::optional<int> lane_change_decision(const TrafficState& state, const RoadNetwork& net,
                                               int vehicle_id, const TrafficOptions& opt = {}) {
  const VehicleState* self = state.find(vehicle_id);
  if (self == nullptr || self->is_ego) return std::nullopt;
  if (state.time - self->last_lane_change < opt.lane_change_cooldown) return std::nullopt;
  const Route& route = net.route(self->pose.route_id);
  const double s = self->pose.s;
  const IdmParams& p = self->params;
  const BandNeighbors current = query_band(state, route, s, self->pose.d, 0.5 * self->width, self->id);
  if (current.leader == nullptr) return std::nullopt;
  const double current_gap = bumper_gap(current.leader_ds, *self, *current.leader);
  const double lookahead = 2.0 * (p.s0 + self->v * p.T) + 10.0;
  if (current_gap >= lookahead || current.leader->v >= p.v0 - 1.0) return std::nullopt;

  const int lane = net.lane_index(route, s, self->pose.d);
  const int lanes = net.lane_count(route, s);
  for (const int target : {lane + 1, lane - 1}) {
    if (target < 0 || target >= lanes) continue;
    const double d_target = net.lane_center(route, s, target);
    const BandNeighbors nb = query_band(state, route, s, d_target, 0.5 * self->width, self->id);
    double lead_gap = std::numeric_limits<double>::infinity();
    if (nb.leader != nullptr) {
      lead_gap = bumper_gap(nb.leader_ds, *self, *nb.leader);
      if (lead_gap < p.s0 + self->v * p.T) continue;
    }
    if (nb.follower != nullptr) {
      const VehicleState& f = *nb.follower;
      if (bumper_gap(nb.follower_ds, *self, f) < f.params.s0 + f.v * f.params.T) continue;
    }
    if (lead_gap <= current_gap) continue;
    return target;
  }
  return std::nullopt;
}

/// All overlapping vehicle pairs (a < b), ascending.
inline std::vector<CollisionPair> detect_collisions(const TrafficState& state, const RoadNetwork& net) {
  std::vector<OrientedBox> boxes;
  boxes.reserve(state.vehicles.size());
  for (const VehicleState& v : state.vehicles) boxes.push_back(vehicle_box(net, v));
  std::vector<CollisionPair> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const double reach = boxes[i].bounding_radius() + boxes[j].bounding_radius();
      if (norm(boxes[i].center - boxes[j].center) > reach) continue;
      if (footprints_overlap(boxes[i], boxes[j]))
        out.push_back({state.vehicles[i].id, state.vehicles[j].id});
    }
  }
  return out;
}

namespace detail {

inline void insert_departures(TrafficState& state, const RoadNetwork& net) {
  std::vector<VehicleState> still_pending;
  for (VehicleState& cand : state.pending) {
    if (cand.depart_time > state.time + 1e-9) {
      still_pending.push_back(std::move(cand));
      continue;
    }
    const Route& route = net.route(cand.pose.route_id);
    const BandNeighbors nb =
        query_band(state, route, cand.pose.s, cand.pose.d, 0.5 * cand.width, cand.id);
    double v = std::min(cand.params.v0, net.edge_at(route, cand.pose.s).speed_limit);
    bool ok = true;
    if (nb.leader != nullptr) {
      const double gap = bumper_gap(nb.leader_ds, cand, *nb.leader);
      if (gap < 100.0) v = std::min(v, nb.leader->v);
      ok = gap > 0.0 && gap >= cand.params.s0 + v * cand.params.T;
    }
    if (ok && nb.follower != nullptr) {
      const VehicleState& f = *nb.follower;
      ok = bumper_gap(nb.follower_ds, cand, f) >= f.params.s0 + f.v * f.params.T;
    }
    if (!ok) {
      still_pending.push_back(std::move(cand));
      continue;
    }
    cand.v = v;
    const auto pos = std::lower_bound(state.vehicles.begin(), state.vehicles.end(), cand.id,
                                      [](const VehicleState& a, int key) { return a.id < key; });
    state.vehicles.insert(pos, std::move(cand));
  }
  state.pending = std::move(still_pending);
}

}  // namespace detail

/// Builds the time-zero state from sampled vehicles: vehicles due at t = 0 are
/// inserted (subject to entry gaps), the rest wait in the pending list.
inline TrafficState initial_traffic(std::vector<VehicleState> vehicles, const RoadNetwork& net,
                                    const std::vector<ConflictPoint>& conflicts = {},
                                    const TrafficOptions& opt = {}) {
  TrafficState state;
  std::sort(vehicles.begin(), vehicles.end(), [](const VehicleState& a, const VehicleState& b) {
    return a.depart_time < b.depart_time || (a.depart_time == b.depart_time && a.id < b.id);
  });
  for (VehicleState& v : vehicles) {
    v.pose.lane_index = net.lane_index(net.route(v.pose.route_id), v.pose.s, v.pose.d);
    if (v.prepositioned) {
      state.vehicles.push_back(std::move(v));
    } else {
      state.pending.push_back(std::move(v));
    }
  }
  std::sort(state.vehicles.begin(), state.vehicles.end(),
            [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
  detail::insert_departures(state, net);
  detail::update_conflict_queues(state, conflicts, opt);
  state.collisions = detect_collisions(state, net);
  return state;
}

struct EgoAction {
  double a_long = 0.0;
  double a_lat = 0.0;
};

/// Advances the traffic by one step of dt seconds. Order: departures, lane
/// changes (ascending id, sequential), accelerations from the post-lane-change
/// snapshot, semi-implicit Euler integration with speed clamped at zero,
/// wrap/removal at route ends, crossing registrations, collision detection.
/// The ego (if any) applies `ego_action` verbatim and is never removed; on an
/// open route it stops advancing at the route end.
inline TrafficState step_traffic(TrafficState state, const RoadNetwork& net, double dt,
                                 std::optional<EgoAction> ego_action = std::nullopt,
                                 const std::vector<ConflictPoint>& conflicts = {},
                                 const TrafficOptions& opt = {}) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  detail::insert_departures(state, net);

  if (opt.lane_changes) {
    for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
      if (state.vehicles[i].is_ego) continue;
      if (const auto target = lane_change_decision(state, net, state.vehicles[i].id, opt)) {
        VehicleState& v = state.vehicles[i];
        const Route& route = net.route(v.pose.route_id);
        v.pose.d = net.lane_center(route, v.pose.s, *target);
        v.pose.lane_index = *target;
        v.last_lane_change = state.time;
      }
    }
  }

  std::vector<double> accel(state.vehicles.size());
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    const VehicleState& v = state.vehicles[i];
    accel[i] = v.is_ego ? (ego_action ? ego_action->a_long : 0.0)
                        : background_acceleration(state, net, v, conflicts, opt);
  }

  std::vector<VehicleState> kept;
  kept.reserve(state.vehicles.size());
  state.finished.clear();
  for (std::size_t i = 0; i < state.vehicles.size(); ++i) {
    VehicleState v = std::move(state.vehicles[i]);
    const Route& route = net.route(v.pose.route_id);
    v.accel = accel[i];
    v.v = std::max(0.0, v.v + v.accel * dt);
    const double advance = v.v * dt;
    v.odometer += advance;
    v.pose.s += advance;
    if (v.is_ego && ego_action) {
      v.lat_speed += ego_action->a_lat * dt;
      v.pose.d += v.lat_speed * dt;
    }
    if (route.closed()) {
      v.pose.s = route.wrap(v.pose.s);
    } else if (v.pose.s > route.length()) {
      if (!v.is_ego) {
        state.finished.push_back(v.id);
        continue;
      }
      v.pose.s = route.length();
    }
    v.pose.lane_index = net.lane_index(route, v.pose.s, v.pose.d);
    kept.push_back(std::move(v));
  }
  state.vehicles = std::move(kept);
  state.time += dt;
  ++state.step;
  detail::update_conflict_queues(state, conflicts, opt);
  state.collisions = detect_collisions(state, net);
  return state;
}

// ---------------------------------------------------------------------------
// Trajectory log (CSV)

inline void write_trajectory_header(std::ostream& out) { out << "step,id,route,s,d,v,a\n"; }

inline void append_trajectory(std::ostream& out, const TrafficState& state) {
  for (const VehicleState& v : state.vehicles) {
    out << fmt::format("{},{},{},{},{},{},{}\n", state.step, v.id, v.pose.route_id, v.pose.s,
                       v.pose.d, v.v, v.accel);
  }
}

}  // namespace avsim
