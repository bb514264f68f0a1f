#pragma once

// Line protocol for driving an Environment from another process. Each request
// is one JSON object per line on the input stream; each response is one JSON
// object per line on the output stream.
//
//   {"cmd":"spec"}                       layout and bounds
//   {"cmd":"reset","seed":7}             seed optional
//   {"cmd":"step","action":[a_long,a_lat]}
//   {"cmd":"observe"}
//   {"cmd":"frame"}                      latest sensor frame or null
//   {"cmd":"close"}
//
// Responses carry "ok"; failures add "error" and "kind".

#include <istream>
#include <memory>
#include <ostream>
#include <string>

#include <json.hpp>

#include "avsim/env.hpp"
#include "avsim/error.hpp"

namespace avsim {

namespace detail {

inline nlohmann::json observation_payload(const Observation& obs) {
  return {{"ok", true}, {"observation", observation_to_json(obs)}, {"vector", flatten(obs)}};
}

inline nlohmann::json frame_payload(const std::shared_ptr<const SensorFrame>& frame) {
  if (!frame) return {{"ok", true}, {"frame", nullptr}};
  nlohmann::json points = nlohmann::json::array();
  for (const LidarPoint& p : frame->points) points.push_back({p.x, p.y, p.z, p.intensity});
  nlohmann::json boxes = nlohmann::json::array();
  for (const GroundTruthBox& b : frame->gt_boxes) boxes.push_back({b.box.x_min, b.box.y_min, b.box.x_max, b.box.y_max});
  return {{"ok", true},
          {"frame", {{"frame_id", frame->frame_id}, {"time", frame->time}, {"points", points}, {"boxes", boxes}}}};
}

}  // namespace detail

/// Serves requests until "close" or end of input. Returns the number of
/// requests handled.
inline int run_session(std::istream& in, std::ostream& out, Environment& env) {
  std::shared_ptr<const SensorFrame> last_frame;
  int handled = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++handled;
    nlohmann::json resp;
    bool close = false;
    try {
      nlohmann::json req;
      try {
        req = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(std::string("request is not JSON: ") + ex.what());
      }
      const std::string cmd = req.value("cmd", std::string{});
      if (cmd == "spec") {
        const EnvConfig& c = env.config();
        resp = {{"ok", true},
                {"neighbors", c.neighbors},
                {"observation_size", 4 + 5 * c.neighbors},
                {"action_low", {-c.max_a_long, -c.max_a_lat}},
                {"action_high", {c.max_a_long, c.max_a_lat}},
                {"max_steps", c.max_steps},
                {"dt", c.dt},
                {"sensors", c.sensors_enabled}};
      } else if (cmd == "reset") {
        std::optional<std::uint64_t> seed;
        if (req.contains("seed") && !req.at("seed").is_null()) seed = req.at("seed").get<std::uint64_t>();
        const Observation& obs = env.reset(seed);
        last_frame = obs.frame;
        resp = detail::observation_payload(obs);
        resp["ego_id"] = env.ego_id();
      } else if (cmd == "step") {
        const auto& a = req.at("action");
        if (!a.is_array() || a.size() != 2) throw ValidationError("action must be [a_long, a_lat]");
        const StepResult r = env.step({a[0].get<double>(), a[1].get<double>()});
        if (r.observation.frame) last_frame = r.observation.frame;
        resp = detail::observation_payload(r.observation);
        resp["record"] = episode_record(r);
        resp["terminated"] = r.terminated;
        resp["reason"] = r.terminated ? nlohmann::json(to_string(r.reason)) : nlohmann::json(nullptr);
        resp["time"] = r.time;
      } else if (cmd == "observe") {
        resp = detail::observation_payload(env.observe());
      } else if (cmd == "frame") {
        if (!env.active()) throw ProtocolError("frame requested before reset");
        resp = detail::frame_payload(last_frame);
      } else if (cmd == "close") {
        resp = {{"ok", true}};
        close = true;
      } else {
        throw ProtocolError("unknown command '" + cmd + "'");
      }
    } catch (const ProtocolError& ex) {
      resp = {{"ok", false}, {"error", ex.what()}, {"kind", "protocol"}};
    } catch (const ValidationError& ex) {
      resp = {{"ok", false}, {"error", ex.what()}, {"kind", "validation"}};
    } catch (const ParseError& ex) {
      resp = {{"ok", false}, {"error", ex.what()}, {"kind", "parse"}};
    } catch (const nlohmann::json::exception& ex) {
      resp = {{"ok", false}, {"error", ex.what()}, {"kind", "parse"}};
    } catch (const Error& ex) {
      resp = {{"ok", false}, {"error", ex.what()}, {"kind", "error"}};
    }
    out << resp.dump() << '\n';
    out.flush();
    if (close) break;
  }
  return handled;
}

}  // namespace avsim
