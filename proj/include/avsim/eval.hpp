#pragma once

// Detection evaluation: IoU, threshold-independent greedy matching, TP/FP/FN
// at an IoU threshold, micro-averaged threshold sweeps, the synthetic
// lighting-degraded detector, and CSV / Markdown reports.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "avsim/error.hpp"
#include "avsim/rng.hpp"
#include "avsim/sensor_io.hpp"
#include "avsim/sensors.hpp"

namespace avsim {

struct Detection {
  BBox2D box;
  double score = 1.0;
};

inline double iou(const BBox2D& a, const BBox2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct MatchPair {
  std::size_t det = 0;
  std::size_t gt = 0;
  double iou = 0.0;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  ///< descending iou
  std::vector<std::size_t> unmatched_dets;
  std::vector<std::size_t> unmatched_gts;
};

/// Greedy one-to-one matching over all (det, gt) pairs by descending IoU; ties
/// go to the lower detection index, then the lower gt index. Pairs with zero
/// overlap are never matched.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox2D> gts) {
  std::vector<MatchPair> cand;
  for (std::size_t i = 0; i < dets.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (const double v = iou(dets[i].box, gts[j]); v > 0.0) cand.push_back({i, j, v});
  std::sort(cand.begin(), cand.end(), [](const MatchPair& a, const MatchPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.det != b.det) return a.det < b.det;
    return a.gt < b.gt;
  });
  MatchResult out;
  std::vector<bool> det_used(dets.size(), false);
  std::vector<bool> gt_used(gts.size(), false);
  for (const MatchPair& p : cand) {
    if (det_used[p.det] || gt_used[p.gt]) continue;
    det_used[p.det] = true;
    gt_used[p.gt] = true;
    out.pairs.push_back(p);
  }
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (!det_used[i]) out.unmatched_dets.push_back(i);
  for (std::size_t j = 0; j < gts.size(); ++j)
    if (!gt_used[j]) out.unmatched_gts.push_back(j);
  return out;
}

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline void validate_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("IoU threshold must be in (0, 1]");
}

/// TP: matched pairs with iou >= tau. Every other detection is an FP and every
/// other ground truth an FN.
inline ConfusionCounts classify(const MatchResult& m, double tau) {
  validate_tau(tau);
  ConfusionCounts c;
  for (const MatchPair& p : m.pairs)
    if (p.iou >= tau) ++c.tp;
  const auto below = static_cast<std::int64_t>(m.pairs.size()) - c.tp;
  c.fp = below + static_cast<std::int64_t>(m.unmatched_dets.size());
  c.fn = below + static_cast<std::int64_t>(m.unmatched_gts.size());
  return c;
}

/// TP / (TP + FP); nothing when the denominator is zero.
inline std::optional<double> precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

/// TP / (TP + FN); nothing when the denominator is zero.
inline std::optional<double> recall(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return std::nullopt;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> t{0.5, 0.6, 0.7, 0.8};
  return t;
}

inline void validate_thresholds(std::span<const double> taus) {
  if (taus.empty()) throw ValidationError("at least one IoU threshold is required");
  for (std::size_t i = 0; i < taus.size(); ++i) {
    validate_tau(taus[i]);
    if (i > 0 && !(taus[i] > taus[i - 1])) throw ValidationError("IoU thresholds must be strictly ascending");
  }
}

struct EvalFrame {
  std::uint64_t frame_id = 0;
  std::vector<Detection> detections;
  std::vector<BBox2D> gts;
};

struct SweepRow {
  double tau = 0.0;
  ConfusionCounts counts;
  std::optional<double> precision;
  std::optional<double> recall;
};

/// Micro-averaged sweep: per-tau counts are summed over frames, then turned
/// into precision and recall. Detections scoring below `min_score` are ignored.
inline std::vector<SweepRow> sweep_thresholds(std::span<const EvalFrame> frames, std::span<const double> taus,
                                              double min_score = 0.0) {
  validate_thresholds(taus);
  std::vector<SweepRow> rows(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) rows[k].tau = taus[k];
  std::vector<Detection> kept;
  for (const EvalFrame& f : frames) {
    kept.clear();
    for (const Detection& d : f.detections)
      if (d.score >= min_score) kept.push_back(d);
    const MatchResult m = match_detections(kept, f.gts);
    for (std::size_t k = 0; k < taus.size(); ++k) rows[k].counts += classify(m, taus[k]);
  }
  for (SweepRow& r : rows) {
    r.precision = precision(r.counts);
    r.recall = recall(r.counts);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Synthetic detector

/// Each ground-truth box is dropped with probability p_miss(distance); kept
/// boxes get independent Gaussian noise on each corner coordinate and a score
/// drawn from U(0.5, 1). A Poisson number of spurious boxes is added per frame.
/// Draws come from the detector stream seeded by (seed, frame_id).
inline std::vector<Detection> synthetic_detect(std::span<const GroundTruthBox> gts, const SceneryCondition& cond,
                                               std::uint64_t seed, std::uint64_t frame_id, int width = 800,
                                               int height = 600) {
  rng::Pcg32 gen(rng::derive_seed(seed, frame_id), rng::Stream::kDetector);
  const double w = width;
  const double h = height;
  std::vector<Detection> out;
  for (const GroundTruthBox& g : gts) {
    if (gen.uniform() < cond.miss_probability(g.distance)) continue;
    double x0 = g.box.x_min + cond.jitter_sigma * gen.normal();
    double y0 = g.box.y_min + cond.jitter_sigma * gen.normal();
    double x1 = g.box.x_max + cond.jitter_sigma * gen.normal();
    double y1 = g.box.y_max + cond.jitter_sigma * gen.normal();
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    const BBox2D box{std::clamp(x0, 0.0, w), std::clamp(y0, 0.0, h), std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h)};
    out.push_back({box, gen.uniform(0.5, 1.0)});
  }
  const int spurious = gen.poisson(cond.false_positive_rate);
  for (int k = 0; k < spurious; ++k) {
    const double bw = gen.uniform(10.0, 150.0);
    const double bh = bw * gen.uniform(0.5, 1.0);
    const double x0 = gen.uniform(0.0, std::max(0.0, w - bw));
    const double y0 = gen.uniform(0.0, std::max(0.0, h - bh));
    out.push_back({{x0, y0, std::min(w, x0 + bw), std::min(h, y0 + bh)}, gen.uniform(0.5, 1.0)});
  }
  return out;
}

inline std::vector<BBox2D> gt_boxes_only(std::span<const GroundTruthBox> gts) {
  std::vector<BBox2D> out;
  out.reserve(gts.size());
  for (const GroundTruthBox& g : gts) out.push_back(g.box);
  return out;
}

// ---------------------------------------------------------------------------
// Detections file (JSON Lines)

struct DetectionRecord {
  std::uint64_t frame_id = 0;
  std::vector<Detection> detections;
};

inline std::string detection_record(std::uint64_t frame_id, std::span<const Detection> dets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Detection& d : dets)
    arr.push_back({{"x_min", d.box.x_min}, {"y_min", d.box.y_min}, {"x_max", d.box.x_max},
                   {"y_max", d.box.y_max}, {"score", d.score}});
  return nlohmann::json{{"frame_id", frame_id}, {"detections", std::move(arr)}}.dump();
}

inline DetectionRecord parse_detection_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    DetectionRecord rec;
    rec.frame_id = j.at("frame_id").get<std::uint64_t>();
    for (const auto& d : j.at("detections")) {
      const double score = d.value("score", 1.0);
      if (!(score >= 0.0 && score <= 1.0)) throw ValidationError("detection score outside [0, 1]");
      rec.detections.push_back({bbox_from_json(d), score});
    }
    return rec;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed detection record: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  std::string scenario;
  std::optional<int> run;  ///< unset for pooled rows
  std::uint64_t seed = 0;  ///< run seed; unset (0) for pooled rows
  SweepRow row;
};

struct EvalReport {
  std::vector<ReportRow> pooled;
  std::vector<ReportRow> per_run;
  nlohmann::json metadata = nlohmann::json::object();
};

inline std::string format_ratio(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "n/a"; }

inline std::string pooled_csv(const EvalReport& r) {
  std::string out = "scenario,tau,TP,FP,FN,precision,recall\n";
  for (const ReportRow& row : r.pooled) {
    out += fmt::format("{},{},{},{},{},{},{}\n", row.scenario, row.row.tau, row.row.counts.tp, row.row.counts.fp,
                       row.row.counts.fn, format_ratio(row.row.precision), format_ratio(row.row.recall));
  }
  return out;
}

inline std::string per_run_csv(const EvalReport& r) {
  std::string out = "scenario,run,seed,tau,TP,FP,FN,precision,recall\n";
  for (const ReportRow& row : r.per_run) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", row.scenario, row.run.value_or(0), row.seed, row.row.tau,
                       row.row.counts.tp, row.row.counts.fp, row.row.counts.fn, format_ratio(row.row.precision),
                       format_ratio(row.row.recall));
  }
  return out;
}

/// Scenarios as rows, precision then recall per threshold as columns.
inline std::string markdown_table(const std::vector<ReportRow>& rows) {
  std::vector<std::string> scenarios;
  std::vector<double> taus;
  for (const ReportRow& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
    if (std::find(taus.begin(), taus.end(), r.row.tau) == taus.end()) taus.push_back(r.row.tau);
  }
  std::sort(taus.begin(), taus.end());
  auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("n/a"); };
  std::string head = "| IoU threshold |";
  std::string sep = "|---|";
  for (const char* metric : {"Precision", "Recall"}) {
    for (const double t : taus) {
      head += fmt::format(" {} {} |", metric, t);
      sep += "---:|";
    }
  }
  std::string out = head + "\n" + sep + "\n";
  for (const std::string& s : scenarios) {
    std::string line = "| " + s + " |";
    for (int metric = 0; metric < 2; ++metric) {
      for (const double t : taus) {
        const auto it = std::find_if(rows.begin(), rows.end(),
                                     [&](const ReportRow& r) { return r.scenario == s && r.row.tau == t; });
        const std::optional<double> v =
            it == rows.end() ? std::nullopt : (metric == 0 ? it->row.precision : it->row.recall);
        line += " " + cell(v) + " |";
      }
    }
    out += line + "\n";
  }
  return out;
}

inline std::string markdown_report(const EvalReport& r) {
  std::string out = "# Detection results\n\n## Pooled\n\n" + markdown_table(r.pooled);
  if (!r.per_run.empty()) {
    std::vector<int> runs;
    for (const ReportRow& row : r.per_run)
      if (std::find(runs.begin(), runs.end(), *row.run) == runs.end()) runs.push_back(*row.run);
    std::sort(runs.begin(), runs.end());
    for (const int run : runs) {
      std::vector<ReportRow> sel;
      for (const ReportRow& row : r.per_run)
        if (*row.run == run) sel.push_back(row);
      out += fmt::format("\n## Run {}\n\n", run) + markdown_table(sel);
    }
  }
  if (!r.metadata.empty()) out += "\n## Metadata\n\n```json\n" + r.metadata.dump(2) + "\n```\n";
  return out;
}

/// Parses a pooled CSV report back into rows.
inline std::vector<ReportRow> parse_pooled_csv(std::string_view text) {
  std::vector<ReportRow> rows;
  std::size_t pos = 0;
  bool header = true;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t a = 0;
    while (true) {
      const std::size_t b = line.find(',', a);
      f.emplace_back(line.substr(a, b == std::string_view::npos ? line.size() - a : b - a));
      if (b == std::string_view::npos) break;
      a = b + 1;
    }
    if (header) {
      if (f != std::vector<std::string>{"scenario", "tau", "TP", "FP", "FN", "precision", "recall"})
        throw ParseError("report header must be scenario,tau,TP,FP,FN,precision,recall");
      header = false;
      continue;
    }
    if (f.size() != 7) throw ParseError(fmt::format("report line {} has {} fields", line_no, f.size()));
    try {
      auto ratio = [](const std::string& s) -> std::optional<double> {
        if (s == "n/a") return std::nullopt;
        const double v = std::stod(s);
        if (!(v >= 0.0 && v <= 1.0)) throw ParseError("ratio outside [0, 1]");
        return v;
      };
      ReportRow row;
      row.scenario = f[0];
      row.row.tau = std::stod(f[1]);
      row.row.counts = {std::stoll(f[2]), std::stoll(f[3]), std::stoll(f[4])};
      row.row.precision = ratio(f[5]);
      row.row.recall = ratio(f[6]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("report line {} is malformed", line_no));
    }
  }
  if (header) throw ParseError("report is empty");
  return rows;
}

}  // namespace avsim
