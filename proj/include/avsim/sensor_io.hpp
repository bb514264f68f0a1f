#pragma once

// File formats for sensor output: AVPC binary point clouds, ground-truth JSON
// Lines and 16-bit PGM rasters.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "avsim/error.hpp"
#include "avsim/sensors.hpp"

namespace avsim {

inline constexpr std::uint32_t kPointCloudVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline void put_u16_be(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v & 0xffu));
}

}  // namespace detail

/// AVPC: "AVPC", u32 version, u32 count, then count records of float32
/// x, y, z, intensity. All little-endian.
inline std::string encode_point_cloud(const std::vector<LidarPoint>& points) {
  std::string out = "AVPC";
  out.reserve(12 + points.size() * 16);
  detail::put_u32(out, kPointCloudVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(points.size()));
  for (const LidarPoint& p : points) {
    for (const double v : {p.x, p.y, p.z, p.intensity})
      detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

inline std::vector<std::array<float, 4>> decode_point_cloud(std::string_view data) {
  if (data.size() < 12 || data.substr(0, 4) != "AVPC") throw ParseError("not an AVPC point cloud");
  if (detail::get_u32(data, 4) != kPointCloudVersion) throw ParseError("unsupported AVPC version");
  const std::uint32_t count = detail::get_u32(data, 8);
  if (data.size() != 12 + std::size_t(count) * 16) throw ParseError("AVPC size does not match its count");
  std::vector<std::array<float, 4>> out(count);
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t k = 0; k < 4; ++k)
      out[i][k] = std::bit_cast<float>(detail::get_u32(data, 12 + 16 * i + 4 * k));
  return out;
}

/// One ground-truth JSON Lines record (no trailing newline).
inline std::string gt_record(const SensorFrame& frame) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const GroundTruthBox& b : frame.gt_boxes) {
    boxes.push_back({{"vehicle_id", b.vehicle_id},
                     {"x_min", b.box.x_min},
                     {"y_min", b.box.y_min},
                     {"x_max", b.box.x_max},
                     {"y_max", b.box.y_max},
                     {"distance", b.distance}});
  }
  nlohmann::json rec = {{"frame_id", frame.frame_id},
                        {"time", frame.time},
                        {"lighting", to_string(frame.lighting)},
                        {"boxes", std::move(boxes)}};
  return rec.dump();
}

struct GroundTruthRecord {
  std::uint64_t frame_id = 0;
  double time = 0.0;
  std::vector<GroundTruthBox> boxes;
};

inline BBox2D bbox_from_json(const nlohmann::json& j) {
  BBox2D b{j.at("x_min").get<double>(), j.at("y_min").get<double>(), j.at("x_max").get<double>(),
           j.at("y_max").get<double>()};
  if (!b.valid()) throw ValidationError("box has min > max");
  return b;
}

inline GroundTruthRecord parse_gt_record(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    GroundTruthRecord rec;
    rec.frame_id = j.at("frame_id").get<std::uint64_t>();
    rec.time = j.value("time", 0.0);
    for (const auto& b : j.at("boxes")) {
      rec.boxes.push_back({b.value("vehicle_id", 0), bbox_from_json(b), b.value("distance", 0.0), 0});
    }
    return rec;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("malformed ground-truth record: ") + ex.what());
  }
}

/// Binary PGM (P5) with 16-bit big-endian samples.
inline std::string encode_pgm16(int width, int height, const std::vector<std::uint16_t>& pixels) {
  std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  out.reserve(out.size() + pixels.size() * 2);
  for (const std::uint16_t p : pixels) detail::put_u16_be(out, p);
  return out;
}

/// Depth raster in centimetres, saturating at 65535.
inline std::string encode_depth_pgm(const SensorFrame& frame) {
  std::vector<std::uint16_t> px(frame.depth.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint16_t>(std::min(65535.0, std::round(frame.depth[i] * 100.0)));
  return encode_pgm16(frame.width, frame.height, px);
}

/// Instance raster: vehicle id + 1, 0 for background.
inline std::string encode_instance_pgm(const SensorFrame& frame) {
  std::vector<std::uint16_t> px(frame.instance.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint16_t>(std::clamp(frame.instance[i] + 1, 0, 65535));
  return encode_pgm16(frame.width, frame.height, px);
}

}  // namespace avsim
