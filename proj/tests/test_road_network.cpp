#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "avsim/rng.hpp"
#include "avsim/road_network.hpp"
#include "avsim/traffic.hpp"
#include "test_support.hpp"

namespace avsim {
namespace {

using testing::straight_road;

nlohmann::json two_edge_doc() {
  return nlohmann::json::parse(R"({
    "format": "avsim-net/1",
    "nodes": [{"id": "n0", "x": 0, "y": 0}, {"id": "n1", "x": 300, "y": 0},
              {"id": "n2", "x": 300, "y": 400}],
    "edges": [
      {"id": "e0", "from": "n0", "to": "n1", "polyline": [[0, 0], [300, 0]],
       "lanes": 2, "lane_width": 3.5, "speed_limit": 30},
      {"id": "e1", "from": "n1", "to": "n2", "polyline": [[300, 0], [300, 150], [300, 400]],
       "lanes": 2, "lane_width": 3.5, "speed_limit": 30}],
    "routes": [{"id": "main", "edges": ["e0", "e1"]}]
  })");
}

TEST(LoadNetwork, TwoEdgeRouteLengthIsSumOfEdges) {
  const auto dir = testing::temp_dir("net_two_edge");
  {
    std::ofstream(dir / "net.json") << two_edge_doc().dump(2);
  }
  const RoadNetwork net = load_network(dir / "net.json");
  ASSERT_EQ(net.routes().size(), 1U);
  EXPECT_DOUBLE_EQ(net.route("main").length(), 300.0 + 400.0);
  EXPECT_FALSE(net.route("main").closed());
}

TEST(LoadNetwork, MissingNodeIsNamed) {
  auto doc = two_edge_doc();
  doc["edges"][1]["to"] = "n9";
  try {
    network_from_json(doc);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.element(), "n9");
    EXPECT_NE(std::string(e.what()).find("n9"), std::string::npos);
  }
}

TEST(LoadNetwork, DanglingEdgeAndZeroLengthAreNamed) {
  auto doc = two_edge_doc();
  doc["routes"][0]["edges"][1] = "e7";
  try {
    network_from_json(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.element(), "e7");
  }
  doc = two_edge_doc();
  doc["edges"][1]["polyline"] = {{300, 0}, {300, 0}, {300, 400}};
  try {
    network_from_json(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.element(), "e1");
  }
}

TEST(LoadNetwork, RejectsWrongFormatAndBrokenJson) {
  auto doc = two_edge_doc();
  doc["format"] = "avsim-net/2";
  EXPECT_THROW(network_from_json(doc), ParseError);
  doc = two_edge_doc();
  doc["edges"][0].erase("lanes");
  EXPECT_THROW(network_from_json(doc), ParseError);
  const auto dir = testing::temp_dir("net_broken");
  {
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  EXPECT_THROW(load_network(dir / "bad.json"), ParseError);
}

TEST(LoadNetwork, RouteEdgesMustShareNodes) {
  auto doc = two_edge_doc();
  doc["routes"][0]["edges"] = {"e1", "e0"};
  EXPECT_THROW(network_from_json(doc), ValidationError);
}

TEST(LoadNetwork, ShippedHighwayLoopIsClosed) {
  const RoadNetwork net = load_network(std::filesystem::path(AVSIM_DATA_DIR) / "networks/highway.json");
  const Route& loop = net.route("loop");
  const Edge* first = net.find_edge(loop.edge_ids().front());
  const Edge* last = net.find_edge(loop.edge_ids().back());
  ASSERT_NE(first, nullptr);
  ASSERT_NE(last, nullptr);
  EXPECT_EQ(first->from, last->to);
  EXPECT_TRUE(loop.closed());
}

TEST(LoadNetwork, ShippedFilesMatchBuiltins) {
  for (const auto& [name, builtin] : builtin_networks()) {
    const RoadNetwork shipped =
        load_network(std::filesystem::path(AVSIM_DATA_DIR) / "networks" / (name + ".json"));
    EXPECT_EQ(network_to_json(shipped), network_to_json(builtin)) << name;
  }
}

TEST(BuiltinNetworks, HighwayAndUrbanArePresentAndValid) {
  const auto nets = builtin_networks();
  ASSERT_GE(nets.size(), 2U);
  std::set<std::string> names;
  for (const auto& [name, net] : nets) {
    names.insert(name);
    // Round trip through the file format re-runs every validation rule.
    EXPECT_NO_THROW(network_from_json(network_to_json(net))) << name;
  }
  EXPECT_TRUE(names.contains("highway"));
  EXPECT_TRUE(names.contains("urban"));

  const RoadNetwork& highway = nets[0].second;
  for (const Edge& e : highway.edges()) EXPECT_GE(e.lanes, 2) << e.id;

  // Urban: count edges that end at a node where two routes cross.
  const RoadNetwork& urban = nets[1].second;
  const auto conflicts = find_conflicts(urban);
  EXPECT_EQ(conflicts.size(), 9U);
  std::set<std::string> crossing_edges;
  for (const Edge& e : urban.edges()) {
    for (const ConflictPoint& c : conflicts) {
      const WorldPose p = frenet_to_world(urban, {c.routes[0], c.s[0], 0.0, 0});
      if (norm(e.polyline.back() - Vec2{p.x, p.y}) < 1e-9) crossing_edges.insert(e.id);
    }
  }
  EXPECT_GE(crossing_edges.size(), 4U);
}

TEST(BuiltinNetworks, RouteLengthEqualsSumOfEdgeLengths) {
  for (const auto& [name, net] : builtin_networks()) {
    for (const Route& r : net.routes()) {
      double sum = 0.0;
      for (const std::string& id : r.edge_ids()) {
        const Edge* e = net.find_edge(id);
        for (std::size_t k = 0; k + 1 < e->polyline.size(); ++k) sum += norm(e->polyline[k + 1] - e->polyline[k]);
      }
      EXPECT_NEAR(r.length(), sum, 1e-9) << name << "/" << r.id();
    }
  }
}

TEST(FrenetToWorld, StraightEdge) {
  const RoadNetwork net = straight_road(100.0, 2);
  const WorldPose a = frenet_to_world(net, {"r", 30.0, 0.0, 0});
  EXPECT_DOUBLE_EQ(a.x, 30.0);
  EXPECT_DOUBLE_EQ(a.y, 0.0);
  EXPECT_DOUBLE_EQ(a.heading, 0.0);
  const WorldPose b = frenet_to_world(net, {"r", 30.0, 2.0, 0});
  EXPECT_DOUBLE_EQ(b.x, 30.0);
  EXPECT_DOUBLE_EQ(b.y, 2.0);
  EXPECT_DOUBLE_EQ(b.heading, 0.0);
}

TEST(FrenetToWorld, Errors) {
  const RoadNetwork net = straight_road();
  EXPECT_THROW(frenet_to_world(net, {"r", 100.5, 0.0, 0}), ValidationError);
  EXPECT_THROW(frenet_to_world(net, {"r", -1.0, 0.0, 0}), ValidationError);
  EXPECT_THROW(frenet_to_world(net, {"nope", 1.0, 0.0, 0}), ValidationError);
}

TEST(FrenetToWorld, QuarterArcMidpointMatchesCircle) {
  // Oracle: analytic circle of radius R; by symmetry half the polyline length
  // sits at 45 degrees, on a chord whose sagitta is R (1 - cos(dtheta / 2)).
  constexpr double radius = 100.0;
  constexpr int segments = 91;
  std::vector<Vec2> arc;
  for (int i = 0; i <= segments; ++i) {
    const double a = 0.5 * std::numbers::pi * i / segments;
    arc.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  const RoadNetwork net = RoadNetwork::build({{"a", arc.front()}, {"b", arc.back()}},
                                             {{"e", "a", "b", arc, 1, 3.5, 20.0}}, {{"arc", {"e"}}});
  const Route& r = net.route("arc");
  const WorldPose mid = frenet_to_world(net, {"arc", 0.5 * r.length(), 0.0, 0});
  const double c = radius * std::cos(std::numbers::pi / 4.0);
  EXPECT_LT(std::hypot(mid.x - c, mid.y - c), 0.01);
  EXPECT_NEAR(mid.heading, 3.0 * std::numbers::pi / 4.0, 1e-9);
}

TEST(FrenetToWorld, BisectorNormalAtKink) {
  const RoadNetwork net = RoadNetwork::build(
      {{"a", {0, 0}}, {"b", {100, 100}}},
      {{"e", "a", "b", {{0, 0}, {100, 0}, {100, 100}}, 1, 3.5, 20.0}}, {{"r", {"e"}}});
  const WorldPose w = frenet_to_world(net, {"r", 100.0, 2.0, 0});
  EXPECT_NEAR(w.x, 100.0 - std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(w.y, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(w.heading, std::numbers::pi / 4.0, 1e-12);
}

TEST(FrenetToWorld, ContinuousAlongEdges) {
  constexpr double step = 0.5;
  constexpr double max_jump = 30.0 * kDefaultDt;
  for (const auto& [name, net] : builtin_networks()) {
    for (const Route& r : net.routes()) {
      const Edge& e = net.edge_at(r, 0.0);
      for (int lane = 0; lane < e.lanes; ++lane) {
        const double d = net.lane_center(r, 0.0, lane);
        WorldPose prev = frenet_to_world(net, {r.id(), 0.0, d, 0});
        for (double s = step; s <= r.length(); s += step) {
          const WorldPose cur = frenet_to_world(net, {r.id(), s, d, 0});
          ASSERT_LE(std::hypot(cur.x - prev.x, cur.y - prev.y), max_jump) << name << " s=" << s;
          prev = cur;
        }
      }
    }
  }
}

TEST(WorldToFrenet, InverseOfStraightCase) {
  const RoadNetwork net = straight_road(100.0, 2);
  const FrenetPose f = world_to_frenet(net, "r", Vec2{30.0, 2.0});
  EXPECT_DOUBLE_EQ(f.s, 30.0);
  EXPECT_DOUBLE_EQ(f.d, 2.0);
  EXPECT_EQ(f.lane_index, 1);
  EXPECT_EQ(world_to_frenet(net, "r", Vec2{30.0, -2.0}).lane_index, 0);
}

TEST(WorldToFrenet, FarPointIsOffRoad) {
  const RoadNetwork net = straight_road();
  EXPECT_THROW(world_to_frenet(net, "r", Vec2{50.0, 500.0}), OffRoadError);
}

TEST(WorldToFrenet, EquidistantTieTakesSmallerS) {
  // A U-shaped route; the point is equidistant from both legs.
  const RoadNetwork net = RoadNetwork::build(
      {{"a", {0, 0}}, {"b", {0, 10}}},
      {{"e", "a", "b", {{0, 0}, {100, 0}, {100, 10}, {0, 10}}, 1, 3.5, 20.0}}, {{"u", {"e"}}});
  const FrenetPose f = world_to_frenet(net, "u", Vec2{50.0, 5.0});
  EXPECT_DOUBLE_EQ(f.s, 50.0);
  EXPECT_DOUBLE_EQ(f.d, 5.0);
}

TEST(WorldToFrenet, RandomRoundTripOnBuiltins) {
  rng::Pcg32 gen(2024U, rng::Stream::kScenario);
  for (const auto& [name, net] : builtin_networks()) {
    int checked = 0;
    while (checked < 1000) {
      const Route& r = net.routes()[gen.bounded(static_cast<std::uint32_t>(net.routes().size()))];
      const double s = gen.uniform(0.0, r.length());
      const double half = net.half_width(r, s);
      const double d = gen.uniform(-half, half);
      const auto& vs = r.vertex_s();
      const auto it = std::lower_bound(vs.begin(), vs.end(), s);
      double to_vertex = std::numeric_limits<double>::infinity();
      if (it != vs.end()) to_vertex = *it - s;
      if (it != vs.begin()) to_vertex = std::min(to_vertex, s - *std::prev(it));
      if (to_vertex < net.edge_at(r, s).lane_width) continue;
      const WorldPose w = frenet_to_world(net, {r.id(), s, d, 0});
      const FrenetPose back = world_to_frenet(net, r.id(), w);
      const WorldPose again = frenet_to_world(net, back);
      ASSERT_LT(std::abs(back.s - s), 1e-6) << name;
      ASSERT_LT(std::abs(back.d - d), 1e-6) << name;
      ASSERT_LT(std::hypot(again.x - w.x, again.y - w.y), 1e-6) << name;
      ++checked;
    }
  }
}

TEST(Route, WrapAndDeltaOnLoop) {
  const RoadNetwork net = testing::ring_road(100.0, 64);
  const Route& r = net.route("ring");
  ASSERT_TRUE(r.closed());
  const double len = r.length();
  EXPECT_NEAR(r.wrap(len + 5.0), 5.0, 1e-9);
  EXPECT_NEAR(r.wrap(-5.0), len - 5.0, 1e-9);
  EXPECT_NEAR(r.delta_s(len - 5.0, 5.0), 10.0, 1e-9);
  EXPECT_NEAR(r.delta_s(5.0, len - 5.0), -10.0, 1e-9);
}

}  // namespace
}  // namespace avsim
