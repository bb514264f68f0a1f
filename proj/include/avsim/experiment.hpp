#pragma once

// Repeated episodes with a detector in the loop, pooled into a report with
// one row per (scenario, threshold).

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "avsim/env.hpp"
#include "avsim/eval.hpp"

namespace avsim {

/// Pluggable detector: boxes for one rendered frame. `seed` is the run seed.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const SensorFrame& frame, std::uint64_t seed) const = 0;
};

class SyntheticDetector final : public Detector {
 public:
  explicit SyntheticDetector(SceneryCondition cond) : cond_(cond) { cond_.validate(); }
  std::vector<Detection> detect(const SensorFrame& frame, std::uint64_t seed) const override {
    return synthetic_detect(frame.gt_boxes, cond_, seed, frame.frame_id, frame.width, frame.height);
  }

 private:
  SceneryCondition cond_;
};

/// Optional observers for artifact export. Called in episode order.
struct ExperimentHooks {
  std::function<void(int run, std::uint64_t seed, const Environment&)> on_reset;
  std::function<void(int run, const Environment&, const StepResult&)> on_step;
  std::function<void(int run, const SensorFrame&, const std::vector<Detection>&)> on_frame;
};

struct ExperimentOptions {
  int runs = 3;
  std::uint64_t base_seed = 1;
  std::vector<double> thresholds = default_thresholds();
  double min_score = 0.0;
  std::string scenario;  ///< row label; defaults to the condition's lighting
};

/// Runs `runs` episodes with seeds base_seed + r and a random ego driven by the
/// car-following policy. Every rendered frame is passed through `detector` and
/// pooled across runs.
inline EvalReport run_experiment(const EnvConfig& cfg, const Detector& detector, const ExperimentOptions& opt,
                                 const ExperimentHooks& hooks = {}) {
  if (opt.runs < 1) throw ValidationError("at least one run is required");
  validate_thresholds(opt.thresholds);
  if (!cfg.sensors_enabled || !cfg.sensors.camera_enabled)
    throw ValidationError("experiments need the camera enabled");
  const std::string scenario = opt.scenario.empty() ? to_string(cfg.condition.lighting) : opt.scenario;

  EvalReport report;
  std::vector<EvalFrame> pooled;
  nlohmann::json runs_meta = nlohmann::json::array();
  Environment env(cfg);
  for (int run = 0; run < opt.runs; ++run) {
    const std::uint64_t seed = opt.base_seed + static_cast<std::uint64_t>(run);
    std::vector<EvalFrame> frames;
    auto consume = [&](const Observation& obs) {
      if (!obs.frame) return;
      const SensorFrame& f = *obs.frame;
      EvalFrame ef{f.frame_id, detector.detect(f, seed), gt_boxes_only(f.gt_boxes)};
      if (hooks.on_frame) hooks.on_frame(run, f, ef.detections);
      frames.push_back(std::move(ef));
    };
    consume(env.reset(seed));
    if (hooks.on_reset) hooks.on_reset(run, seed, env);
    std::string reason;
    int steps = 0;
    while (!env.terminated()) {
      const StepResult r = env.step(env.idm_action());
      ++steps;
      if (hooks.on_step) hooks.on_step(run, env, r);
      consume(r.observation);
      if (r.terminated) reason = to_string(r.reason);
    }
    std::size_t gt_count = 0;
    for (const EvalFrame& f : frames) gt_count += f.gts.size();
    for (const SweepRow& row : sweep_thresholds(frames, opt.thresholds, opt.min_score))
      report.per_run.push_back({scenario, run, seed, row});
    runs_meta.push_back({{"run", run},
                         {"seed", seed},
                         {"ego_id", env.ego_id()},
                         {"steps", steps},
                         {"termination", reason},
                         {"frames", frames.size()},
                         {"gt_boxes", gt_count}});
    pooled.insert(pooled.end(), std::make_move_iterator(frames.begin()), std::make_move_iterator(frames.end()));
  }
  for (const SweepRow& row : sweep_thresholds(pooled, opt.thresholds, opt.min_score))
    report.pooled.push_back({scenario, std::nullopt, 0, row});

  int vehicles = 0;
  for (const RouteDemand& r : cfg.demand.routes) vehicles += r.count;
  report.metadata[scenario] = {{"runs", runs_meta},
                               {"vehicles", vehicles},
                               {"frames", pooled.size()},
                               {"condition", condition_to_json(cfg.condition)}};
  return report;
}

/// Appends `b` to `a` (rows in order, metadata keys merged).
inline void merge_report(EvalReport& a, const EvalReport& b) {
  a.pooled.insert(a.pooled.end(), b.pooled.begin(), b.pooled.end());
  a.per_run.insert(a.per_run.end(), b.per_run.begin(), b.per_run.end());
  for (const auto& [k, v] : b.metadata.items()) a.metadata[k] = v;
}

}  // namespace avsim
