#pragma once

// `avsim` command-line front end. Exit codes: 0 success, 1 domain or
// validation failure, 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "avsim/env.hpp"
#include "avsim/eval.hpp"
#include "avsim/experiment.hpp"
#include "avsim/io.hpp"
#include "avsim/plot.hpp"
#include "avsim/sensor_io.hpp"
#include "avsim/session.hpp"

#ifndef AVSIM_VERSION
#define AVSIM_VERSION "0.0.0"
#endif

namespace avsim::cli {

namespace fs = std::filesystem;

inline std::string version_text() {
  return fmt::format("avsim {}\nformats: {} {} {} AVPC/{}", AVSIM_VERSION, kNetworkFormat, kDemandFormat, kEnvFormat,
                     kPointCloudVersion);
}

/// Raised for flag combinations CLI11 cannot express; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string frame_name(std::string_view prefix, std::uint64_t id, std::string_view ext) {
  return fmt::format("{}_{:06d}.{}", prefix, id, ext);
}

inline std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

inline void check_thresholds(const std::vector<double>& taus) {
  try {
    validate_thresholds(taus);
  } catch (const ValidationError& ex) {
    throw UsageError(std::string("--thresholds: ") + ex.what());
  }
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

// ---------------------------------------------------------------------------
// gen-demand

struct GenDemandArgs {
  std::string network = "highway";
  std::vector<std::string> routes;
  int count = 0;
  std::uint64_t seed = 1;
  std::string placement = "entry";
  double spacing = 2.0;
  std::string out;
};

inline nlohmann::json vehicle_to_json(const VehicleState& v) {
  return {{"id", v.id},
          {"route", v.pose.route_id},
          {"s", v.pose.s},
          {"d", v.pose.d},
          {"lane", v.pose.lane_index},
          {"v", v.v},
          {"depart_time", v.depart_time},
          {"length", v.length},
          {"width", v.width},
          {"height", v.height},
          {"idm",
           {{"v0", v.params.v0}, {"T", v.params.T}, {"s0", v.params.s0}, {"a_max", v.params.a_max},
            {"b", v.params.b}, {"delta", v.params.delta}}}};
}

/// The count is split over the routes in order, earlier routes taking the remainder.
inline int cmd_gen_demand(const GenDemandArgs& a, std::ostream& out) {
  const RoadNetwork net = resolve_network(a.network);
  std::vector<std::string> routes = a.routes;
  if (routes.empty()) routes.push_back(net.routes().front().id());
  if (a.count < 0) throw ValidationError("--count must be non-negative");
  DemandConfig cfg;
  cfg.seed = a.seed;
  const int n = static_cast<int>(routes.size());
  for (int i = 0; i < n; ++i) {
    if (!net.find_route(routes[i])) throw ValidationError("unknown route", routes[i]);
    RouteDemand block;
    block.route = routes[i];
    block.count = a.count / n + (i < a.count % n ? 1 : 0);
    block.depart_spacing = a.spacing;
    block.placement = a.placement == "spread" ? Placement::kSpread : Placement::kEntry;
    cfg.routes.push_back(std::move(block));
  }
  cfg.validate();
  nlohmann::json doc = demand_to_json(cfg);
  doc["network"] = a.network;
  nlohmann::json sampled = nlohmann::json::array();
  for (const VehicleState& v : sample_demand(cfg, net)) sampled.push_back(vehicle_to_json(v));
  doc["sampled"] = std::move(sampled);
  write_file_atomic(a.out, doc.dump(2) + "\n");
  out << fmt::format("wrote {} vehicles to {}\n", doc["sampled"].size(), a.out);
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string env;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> exports{"trajectories"};
  std::string actions;
};

/// Actions file: JSON Lines of [a_long, a_lat] or {"a_long":..,"a_lat":..}.
inline std::vector<Action> load_actions(const fs::path& path) {
  std::vector<Action> out;
  for (const std::string& line : read_lines(path)) {
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.is_array() && j.size() == 2) {
        out.push_back({j[0].get<double>(), j[1].get<double>()});
      } else {
        out.push_back({j.at("a_long").get<double>(), j.at("a_lat").get<double>()});
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("malformed action line in " + path.string() + ": " + ex.what());
    }
  }
  return out;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  EnvConfig cfg = load_env_config(a.env);
  if (a.steps) cfg.max_steps = *a.steps;
  if (a.seed) cfg.seed = *a.seed;
  const std::set<std::string> ex(a.exports.begin(), a.exports.end());
  const bool want_frames = ex.contains("gt") || ex.contains("pointclouds") || ex.contains("rasters") ||
                           ex.contains("detections");
  if (want_frames && !cfg.sensors_enabled) throw ValidationError("sensor exports need sensors enabled in", a.env);
  if (ex.contains("pointclouds") && !cfg.sensors.lidar_enabled)
    throw ValidationError("point cloud export needs the lidar enabled in", a.env);
  if ((ex.contains("gt") || ex.contains("rasters") || ex.contains("detections")) && !cfg.sensors.camera_enabled)
    throw ValidationError("camera exports need the camera enabled in", a.env);
  cfg.validate();
  std::optional<std::vector<Action>> actions;
  if (!a.actions.empty()) actions = load_actions(a.actions);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  Environment env(cfg);
  std::ostringstream traj;
  std::string episode, gt, dets;
  nlohmann::json manifest_files = nlohmann::json::object();
  std::vector<std::string> clouds, depth_files, instance_files;
  const SyntheticDetector detector(cfg.condition);

  auto handle_frame = [&](const Observation& obs) {
    if (!obs.frame) return;
    const SensorFrame& f = *obs.frame;
    if (ex.contains("gt")) gt += gt_record(f) + "\n";
    if (ex.contains("detections")) dets += detection_record(f.frame_id, detector.detect(f, cfg.seed)) + "\n";
    if (ex.contains("pointclouds")) {
      const std::string name = "pointclouds/" + frame_name("frame", f.frame_id, "avpc");
      write_file_atomic(dir / name, encode_point_cloud(f.points));
      clouds.push_back(name);
    }
    if (ex.contains("rasters")) {
      const std::string dn = "rasters/" + frame_name("depth", f.frame_id, "pgm");
      const std::string in = "rasters/" + frame_name("instance", f.frame_id, "pgm");
      write_file_atomic(dir / dn, encode_depth_pgm(f));
      write_file_atomic(dir / in, encode_instance_pgm(f));
      depth_files.push_back(dn);
      instance_files.push_back(in);
    }
  };

  write_trajectory_header(traj);
  handle_frame(env.reset());
  append_trajectory(traj, env.traffic());
  int steps = 0;
  std::string reason;
  while (!env.terminated()) {
    Action act = env.idm_action();
    if (actions) {
      if (steps >= static_cast<int>(actions->size()))
        throw ValidationError("actions file ended before the episode at step", std::to_string(steps));
      act = (*actions)[static_cast<std::size_t>(steps)];
    }
    const StepResult r = env.step(act);
    ++steps;
    episode += episode_record(r) + "\n";
    append_trajectory(traj, env.traffic());
    handle_frame(r.observation);
    if (r.terminated) reason = to_string(r.reason);
  }

  write_file_atomic(dir / "episode.jsonl", episode);
  manifest_files["episode"] = "episode.jsonl";
  if (ex.contains("trajectories")) {
    write_file_atomic(dir / "trajectories.csv", traj.str());
    manifest_files["trajectories"] = "trajectories.csv";
  }
  if (ex.contains("gt")) {
    write_file_atomic(dir / "gt.jsonl", gt);
    manifest_files["gt"] = "gt.jsonl";
  }
  if (ex.contains("detections")) {
    write_file_atomic(dir / "detections.jsonl", dets);
    manifest_files["detections"] = "detections.jsonl";
  }
  if (ex.contains("pointclouds")) manifest_files["pointclouds"] = clouds;
  if (ex.contains("rasters")) {
    manifest_files["depth_rasters"] = depth_files;
    manifest_files["instance_rasters"] = instance_files;
  }
  const nlohmann::json manifest = {{"tool", "avsim"},
                                   {"version", AVSIM_VERSION},
                                   {"command", "simulate"},
                                   {"config_hash", hex64(fnv1a(env_config_to_json(cfg).dump()))},
                                   {"seed", cfg.seed},
                                   {"ego_id", env.ego_id()},
                                   {"steps", steps},
                                   {"termination", reason},
                                   {"artifacts", manifest_files}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  out << fmt::format("simulated {} steps (ego {}, {}), outputs in {}\n", steps, env.ego_id(), reason, dir.string());
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string gt;
  std::string det;
  std::string detector;
  std::string condition = "morning";
  std::uint64_t seed = 1;
  std::vector<double> thresholds = default_thresholds();
  std::string out;
  std::string scenario;
  double min_score = 0.0;
};

inline std::string join_ids(const std::vector<std::uint64_t>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? ", " : "") + std::to_string(ids[i]);
  return s;
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  check_thresholds(a.thresholds);
  if (a.det.empty() == a.detector.empty()) throw UsageError("give exactly one of --det and --detector");
  std::map<std::uint64_t, GroundTruthRecord> gts;
  for (const std::string& line : read_lines(a.gt)) {
    GroundTruthRecord rec = parse_gt_record(line);
    const std::uint64_t id = rec.frame_id;
    if (!gts.emplace(id, std::move(rec)).second)
      throw ValidationError("duplicate frame id in ground truth", std::to_string(id));
  }
  std::vector<EvalFrame> frames;
  std::string scenario = a.scenario;
  if (!a.det.empty()) {
    std::map<std::uint64_t, std::vector<Detection>> dets;
    for (const std::string& line : read_lines(a.det)) {
      DetectionRecord rec = parse_detection_record(line);
      if (!dets.emplace(rec.frame_id, std::move(rec.detections)).second)
        throw ValidationError("duplicate frame id in detections", std::to_string(rec.frame_id));
    }
    std::vector<std::uint64_t> no_det, no_gt;
    for (const auto& [id, rec] : gts)
      if (!dets.contains(id)) no_det.push_back(id);
    for (const auto& [id, d] : dets)
      if (!gts.contains(id)) no_gt.push_back(id);
    if (!no_det.empty() || !no_gt.empty()) {
      std::string msg = "frame ids do not match:";
      if (!no_det.empty()) msg += " missing from detections: " + join_ids(no_det) + ";";
      if (!no_gt.empty()) msg += " missing from ground truth: " + join_ids(no_gt) + ";";
      msg.pop_back();
      throw ValidationError(msg);
    }
    for (auto& [id, rec] : gts) frames.push_back({id, std::move(dets[id]), gt_boxes_only(rec.boxes)});
    if (scenario.empty()) scenario = "eval";
  } else {
    const Lighting light = lighting_from_string(a.condition);
    const SceneryCondition cond =
        a.detector == "noiseless" ? SceneryCondition::ideal(light) : SceneryCondition::preset(light);
    for (auto& [id, rec] : gts)
      frames.push_back({id, synthetic_detect(rec.boxes, cond, a.seed, id), gt_boxes_only(rec.boxes)});
    if (scenario.empty()) scenario = a.condition;
  }
  EvalReport report;
  for (const SweepRow& row : sweep_thresholds(frames, a.thresholds, a.min_score))
    report.pooled.push_back({scenario, std::nullopt, 0, row});
  report.metadata = {{"frames", frames.size()}, {"gt", a.gt}};
  const fs::path dir = a.out;
  write_file_atomic(dir / "report.csv", pooled_csv(report));
  write_file_atomic(dir / "report.md", markdown_report(report));
  out << markdown_table(report.pooled);
  return 0;
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string env;
  int runs = 3;
  std::vector<std::string> conditions{"morning", "night"};
  std::vector<double> thresholds = default_thresholds();
  std::uint64_t seed = 1;
  std::string out_dir;
  int export_every = 50;
  std::string detector = "synthetic";
  double min_score = 0.0;
};

inline int cmd_experiment(const ExperimentArgs& a, std::ostream& out) {
  check_thresholds(a.thresholds);
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  const EnvConfig base = load_env_config(a.env);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  EvalReport report;
  nlohmann::json artifacts = {{"report_csv", "report.csv"}, {"report_runs_csv", "report_runs.csv"},
                              {"report_md", "report.md"}};
  nlohmann::json per_condition = nlohmann::json::array();

  for (const std::string& name : a.conditions) {
    EnvConfig cfg = base;
    const Lighting light = lighting_from_string(name);
    cfg.condition = a.detector == "noiseless" ? SceneryCondition::ideal(light) : SceneryCondition::preset(light);
    if (a.export_every > 0 && !cfg.sensors.lidar_enabled)
      throw ValidationError("point cloud export needs the lidar enabled in", a.env);

    std::map<int, std::ostringstream> traj;
    std::map<int, std::string> gt, dets;
    std::map<int, std::vector<std::string>> clouds;
    ExperimentHooks hooks;
    hooks.on_reset = [&](int run, std::uint64_t, const Environment& env) {
      write_trajectory_header(traj[run]);
      append_trajectory(traj[run], env.traffic());
    };
    hooks.on_step = [&](int run, const Environment& env, const StepResult&) { append_trajectory(traj[run], env.traffic()); };
    hooks.on_frame = [&](int run, const SensorFrame& f, const std::vector<Detection>& d) {
      gt[run] += gt_record(f) + "\n";
      dets[run] += detection_record(f.frame_id, d) + "\n";
      if (a.export_every > 0 && f.frame_id % static_cast<std::uint64_t>(a.export_every) == 0) {
        const std::string rel = fmt::format("pointclouds/{}_run{}/{}", name, run, frame_name("frame", f.frame_id, "avpc"));
        write_file_atomic(dir / rel, encode_point_cloud(f.points));
        clouds[run].push_back(rel);
      }
    };
    ExperimentOptions opt;
    opt.runs = a.runs;
    opt.base_seed = a.seed;
    opt.thresholds = a.thresholds;
    opt.min_score = a.min_score;
    opt.scenario = name;
    merge_report(report, run_experiment(cfg, SyntheticDetector(cfg.condition), opt, hooks));

    for (int run = 0; run < a.runs; ++run) {
      const std::string stem = fmt::format("{}_run{}", name, run);
      write_file_atomic(dir / "trajectories" / (stem + ".csv"), traj[run].str());
      write_file_atomic(dir / "gt" / (stem + ".jsonl"), gt[run]);
      write_file_atomic(dir / "detections" / (stem + ".jsonl"), dets[run]);
      per_condition.push_back({{"scenario", name},
                               {"run", run},
                               {"seed", a.seed + static_cast<std::uint64_t>(run)},
                               {"trajectories", "trajectories/" + stem + ".csv"},
                               {"gt", "gt/" + stem + ".jsonl"},
                               {"detections", "detections/" + stem + ".jsonl"},
                               {"pointclouds", clouds[run]}});
    }
  }
  artifacts["runs"] = per_condition;

  write_file_atomic(dir / "report.csv", pooled_csv(report));
  write_file_atomic(dir / "report_runs.csv", per_run_csv(report));
  write_file_atomic(dir / "report.md", markdown_report(report));
  const nlohmann::json manifest = {{"tool", "avsim"},
                                   {"version", AVSIM_VERSION},
                                   {"command", "experiment"},
                                   {"config_hash", hex64(fnv1a(env_config_to_json(base).dump()))},
                                   {"seed", a.seed},
                                   {"runs", a.runs},
                                   {"conditions", a.conditions},
                                   {"thresholds", a.thresholds},
                                   {"detector", a.detector},
                                   {"artifacts", artifacts}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  out << markdown_table(report.pooled);
  return 0;
}

// ---------------------------------------------------------------------------
// plot, networks, env-session

inline int cmd_plot(const std::string& report, const std::string& out_path, std::ostream& out) {
  const auto rows = parse_pooled_csv(read_file(report));
  write_file_atomic(out_path, render_report_svg(rows));
  out << "wrote " << out_path << "\n";
  return 0;
}

inline int cmd_networks(const std::string& export_dir, std::ostream& out) {
  for (const auto& [name, net] : builtin_networks()) {
    out << name << ":";
    for (const Route& r : net.routes()) out << fmt::format(" {} ({:.1f} m{})", r.id(), r.length(), r.closed() ? ", closed" : "");
    out << "\n";
    if (!export_dir.empty()) write_file_atomic(fs::path(export_dir) / (name + ".json"), network_to_json(net).dump(2) + "\n");
  }
  return 0;
}

inline int cmd_env_session(const std::string& env_path, std::istream& in, std::ostream& out) {
  Environment env(load_env_config(env_path));
  run_session(in, out, env);
  return 0;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic traffic, sensor and detection-evaluation simulator", "avsim"};
  app.set_version_flag("--version", version_text());
  app.require_subcommand(1);

  GenDemandArgs gd;
  auto* c_gen = app.add_subcommand("gen-demand", "Sample background vehicles into a demand file");
  c_gen->add_option("--network", gd.network, "Built-in network name or network file")->capture_default_str();
  c_gen->add_option("--route", gd.routes, "Route id (repeatable; default: first route)");
  c_gen->add_option("--count", gd.count, "Number of vehicles")->required();
  c_gen->add_option("--seed", gd.seed, "Sampling seed")->capture_default_str();
  c_gen->add_option("--placement", gd.placement, "entry or spread")
      ->check(CLI::IsMember({"entry", "spread"}))
      ->capture_default_str();
  c_gen->add_option("--spacing", gd.spacing, "Departure spacing for entry placement (s)")->capture_default_str();
  c_gen->add_option("--out", gd.out, "Output demand file")->required();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run one episode and export its artifacts");
  c_sim->add_option("--env", sim.env, "Environment config file")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--steps", sim.steps, "Override max_steps")->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Override the episode seed");
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->required();
  c_sim->add_option("--export", sim.exports, "trajectories,pointclouds,gt,rasters,detections")
      ->delimiter(',')
      ->check(CLI::IsMember({"trajectories", "pointclouds", "gt", "rasters", "detections"}))
      ->capture_default_str();
  c_sim->add_option("--actions", sim.actions, "JSON Lines of ego actions (default: car-following policy)")
      ->check(CLI::ExistingFile);

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score detections against ground truth");
  c_eval->add_option("--gt", ev.gt, "Ground-truth JSON Lines")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--det", ev.det, "Detections JSON Lines")->check(CLI::ExistingFile);
  c_eval->add_option("--detector", ev.detector, "Built-in detector instead of --det")
      ->check(CLI::IsMember({"synthetic", "noiseless"}));
  c_eval->add_option("--condition", ev.condition, "Lighting for the synthetic detector")
      ->check(CLI::IsMember({"morning", "night"}))
      ->capture_default_str();
  c_eval->add_option("--seed", ev.seed, "Synthetic detector seed")->capture_default_str();
  c_eval->add_option("--thresholds", ev.thresholds, "Ascending IoU thresholds in (0, 1]")->delimiter(',');
  c_eval->add_option("--out", ev.out, "Output directory for report.csv and report.md")->required();
  c_eval->add_option("--scenario", ev.scenario, "Row label in the report");
  c_eval->add_option("--min-score", ev.min_score, "Ignore detections scoring below this")->capture_default_str();

  ExperimentArgs xp;
  auto* c_exp = app.add_subcommand("experiment", "Repeated episodes per lighting condition, pooled report");
  c_exp->add_option("--env", xp.env, "Environment config file")->required()->check(CLI::ExistingFile);
  c_exp->add_option("--runs", xp.runs, "Runs per condition")->capture_default_str();
  c_exp->add_option("--conditions", xp.conditions, "Lighting conditions")
      ->delimiter(',')
      ->check(CLI::IsMember({"morning", "night"}))
      ->capture_default_str();
  c_exp->add_option("--thresholds", xp.thresholds, "Ascending IoU thresholds in (0, 1]")->delimiter(',');
  c_exp->add_option("--seed", xp.seed, "Base seed; run r uses seed + r")->capture_default_str();
  c_exp->add_option("--out-dir", xp.out_dir, "Output directory")->required();
  c_exp->add_option("--export-every", xp.export_every, "Point cloud export interval in steps (0: none)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_exp->add_option("--detector", xp.detector, "synthetic or noiseless")
      ->check(CLI::IsMember({"synthetic", "noiseless"}))
      ->capture_default_str();
  c_exp->add_option("--min-score", xp.min_score, "Ignore detections scoring below this")->capture_default_str();

  std::string plot_report, plot_out;
  auto* c_plot = app.add_subcommand("plot", "Grouped bar chart (SVG) of a pooled report");
  c_plot->add_option("--report", plot_report, "Pooled report CSV")->required()->check(CLI::ExistingFile);
  c_plot->add_option("--out", plot_out, "Output SVG")->required();

  std::string export_dir;
  auto* c_net = app.add_subcommand("networks", "List built-in networks");
  c_net->add_option("--export-dir", export_dir, "Write each network as JSON here");

  std::string session_env;
  auto* c_sess = app.add_subcommand("env-session", "Serve the JSON line protocol on stdin/stdout");
  c_sess->add_option("--env", session_env, "Environment config file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> argv_store = args;
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version_text() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_gen->parsed()) return cmd_gen_demand(gd, out);
    if (c_sim->parsed()) return cmd_simulate(sim, out);
    if (c_eval->parsed()) return cmd_evaluate(ev, out);
    if (c_exp->parsed()) return cmd_experiment(xp, out);
    if (c_plot->parsed()) return cmd_plot(plot_report, plot_out, out);
    if (c_net->parsed()) return cmd_networks(export_dir, out);
    if (c_sess->parsed()) return cmd_env_session(session_env, in, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cin, std::cout, std::cerr);
}

}  // namespace avsim::cli
