#pragma once

// On-disk demonstration datasets.
//
//   <root>/manifest.json                dataset manifest (format, version, episode list)
//   <root>/episode_NNNNN/episode.json   goal, task, variation, frame count, collide flags
//   <root>/episode_NNNNN/frame_NNNNN.bin one little-endian record per frame
//
// Frame record fields, in order:
//   u32 magic 'PAFR', u32 version,
//   i64 timestep,
//   f64[3] gripper position (m), f64[4] gripper quaternion (w, x, y, z),
//   u8 gripper open, f64[2] finger positions (m),
//   u32 J, f64[J] joint velocities (rad/s),
//   u32 view count, then per view:
//     u32 height, u32 width, f64[9] intrinsics (row-major, px),
//     f64[16] camera->world extrinsics (row-major, m),
//     u8[height*width*3] rgb in [0,255], f32[height*width] depth (m).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <span>
#include <vector>

#include "json.hpp"

#include "peract/binary_io.hpp"
#include "peract/demo_pipeline.hpp"
#include "peract/errors.hpp"

namespace peract {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kFrameMagic = 0x52464150;  // "PAFR"

namespace detail {

inline std::string numbered(const char* prefix, std::size_t i, const char* suffix = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%05zu%s", prefix, i, suffix);
  return buf;
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptData("malformed manifest '" + path.string() + "': " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void check_version(const nlohmann::json& j, const std::filesystem::path& where) {
  if (!j.contains("version") || !j["version"].is_number_unsigned()) {
    throw CorruptData("manifest '" + where.string() + "' has no version tag");
  }
  const auto v = j["version"].get<std::uint32_t>();
  if (v != kDatasetVersion) {
    throw IncompatibleVersion("dataset '" + where.string() + "' has version " + std::to_string(v) + ", expected " +
                              std::to_string(kDatasetVersion));
  }
}

inline void write_frame(const DemoFrame& f, const std::filesystem::path& path) {
  io::Writer w;
  w.put(kFrameMagic);
  w.put(kDatasetVersion);
  w.put<std::int64_t>(f.timestep);
  w.put_array(f.gripper_position.data(), 3);
  const double q[4] = {f.gripper_orientation.w(), f.gripper_orientation.x(), f.gripper_orientation.y(),
                       f.gripper_orientation.z()};
  w.put_array(q, 4);
  w.put<std::uint8_t>(f.gripper_open ? 1 : 0);
  w.put_array(f.finger_positions.data(), 2);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.joint_velocities.size()));
  w.put_array(f.joint_velocities.data(), static_cast<std::size_t>(f.joint_velocities.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.views.size()));
  for (const auto& v : f.views) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.width));
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> k = v.intrinsics;
    const Eigen::Matrix<double, 4, 4, Eigen::RowMajor> e = v.extrinsics;
    w.put_array(k.data(), 9);
    w.put_array(e.data(), 16);
    w.put_array(v.rgb.data(), v.rgb.size());
    w.put_array(v.depth.data(), v.depth.size());
  }
  w.save(path.string());
}

inline DemoFrame read_frame(const std::filesystem::path& path) {
  auto r = io::Reader::from_file(path.string());
  if (r.get<std::uint32_t>() != kFrameMagic) throw CorruptData("'" + path.string() + "' is not a frame record");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion) {
    throw IncompatibleVersion("frame record '" + path.string() + "' has version " + std::to_string(version));
  }
  DemoFrame f;
  f.timestep = r.get<std::int64_t>();
  r.get_array(f.gripper_position.data(), 3);
  double q[4];
  r.get_array(q, 4);
  f.gripper_orientation = Quat(q[0], q[1], q[2], q[3]);
  f.gripper_open = r.get<std::uint8_t>() != 0;
  r.get_array(f.finger_positions.data(), 2);
  const auto joints = r.get<std::uint32_t>();
  if (joints > r.remaining() / sizeof(double)) throw CorruptData("truncated record in '" + path.string() + "'");
  f.joint_velocities.resize(joints);
  r.get_array(f.joint_velocities.data(), joints);
  const auto nviews = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nviews; ++i) {
    CameraView v;
    v.height = static_cast<int>(r.get<std::uint32_t>());
    v.width = static_cast<int>(r.get<std::uint32_t>());
    const auto pixels = static_cast<std::size_t>(v.height) * static_cast<std::size_t>(v.width);
    if (pixels * 7 > r.remaining()) throw CorruptData("truncated record in '" + path.string() + "'");
    Eigen::Matrix<double, 3, 3, Eigen::RowMajor> k;
    Eigen::Matrix<double, 4, 4, Eigen::RowMajor> e;
    r.get_array(k.data(), 9);
    r.get_array(e.data(), 16);
    v.intrinsics = k;
    v.extrinsics = e;
    v.rgb.resize(pixels * 3);
    v.depth.resize(pixels);
    r.get_array(v.rgb.data(), v.rgb.size());
    r.get_array(v.depth.data(), v.depth.size());
    f.views.push_back(std::move(v));
  }
  if (!r.at_end()) throw CorruptData("trailing bytes in '" + path.string() + "'");
  return f;
}

}  // namespace detail

inline void save_episode(const DemoEpisode& episode, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["version"] = kDatasetVersion;
  j["task_id"] = episode.task_id;
  j["variation_id"] = episode.variation_id;
  j["language_goal"] = episode.language_goal;
  j["num_frames"] = episode.frames.size();
  std::vector<int> flags;
  for (bool b : episode.collide_flags) flags.push_back(b ? 1 : 0);
  j["collide_flags"] = flags;
  for (std::size_t i = 0; i < episode.frames.size(); ++i) {
    detail::write_frame(episode.frames[i], dir / detail::numbered("frame_", i, ".bin"));
  }
  detail::write_json(dir / "episode.json", j);
}

[[nodiscard]] inline DemoEpisode load_episode(const std::filesystem::path& dir) {
  const auto j = detail::read_json(dir / "episode.json");
  detail::check_version(j, dir / "episode.json");
  DemoEpisode e;
  try {
    e.task_id = j.at("task_id").get<std::string>();
    e.variation_id = j.at("variation_id").get<int>();
    e.language_goal = j.at("language_goal").get<std::string>();
    const auto n = j.at("num_frames").get<std::size_t>();
    for (int flag : j.at("collide_flags").get<std::vector<int>>()) e.collide_flags.push_back(flag != 0);
    if (e.collide_flags.size() != n) throw CorruptData("collide flag count does not match frame count");
    for (std::size_t i = 0; i < n; ++i) {
      const auto path = dir / detail::numbered("frame_", i, ".bin");
      if (!std::filesystem::exists(path)) throw CorruptData("missing frame record '" + path.string() + "'");
      e.frames.push_back(detail::read_frame(path));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw CorruptData("malformed episode manifest in '" + dir.string() + "': " + ex.what());
  }
  return e;
}

inline void save_dataset(std::span<const DemoEpisode> episodes, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  nlohmann::json manifest;
  manifest["format"] = "peract-demos";
  manifest["version"] = kDatasetVersion;
  manifest["episodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto name = detail::numbered("episode_", i);
    save_episode(episodes[i], root / name);
    manifest["episodes"].push_back(
        {{"dir", name}, {"task_id", episodes[i].task_id}, {"num_frames", episodes[i].frames.size()}});
  }
  // Manifest last: a dataset without one was interrupted mid-write.
  detail::write_json(root / "manifest.json", manifest);
}

/// Episode directories listed in the manifest, in order.
[[nodiscard]] inline std::vector<std::filesystem::path> dataset_episode_dirs(const std::filesystem::path& root) {
  const auto manifest = detail::read_json(root / "manifest.json");
  detail::check_version(manifest, root / "manifest.json");
  std::vector<std::filesystem::path> dirs;
  try {
    for (const auto& ep : manifest.at("episodes")) dirs.push_back(root / ep.at("dir").get<std::string>());
  } catch (const nlohmann::json::exception& ex) {
    throw CorruptData("malformed dataset manifest: " + std::string(ex.what()));
  }
  return dirs;
}

[[nodiscard]] inline std::vector<DemoEpisode> load_dataset(const std::filesystem::path& root) {
  std::vector<DemoEpisode> episodes;
  for (const auto& dir : dataset_episode_dirs(root)) episodes.push_back(load_episode(dir));
  return episodes;
}

}  // namespace peract
