#include "mmjoints/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace mmjoints {

using nlohmann::json;

namespace {

json pose_to_json(const Pose& pose) {
  json rows = json::array();
  for (int j = 0; j < pose.joint_count(); ++j) {
    rows.push_back({pose.joints(j, 0), pose.joints(j, 1), pose.joints(j, 2)});
  }
  return rows;
}

Pose pose_from_json(const json& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int d = 0; d < 3; ++d) m(static_cast<Eigen::Index>(j), d) = rows[j][static_cast<std::size_t>(d)].get<double>();
  }
  return Pose(std::move(m));
}

json record_to_json(const DatasetRecord& r) {
  json points = json::array();
  for (const auto& p : r.frame.points) {
    points.push_back({p.position.x(), p.position.y(), p.position.z(), p.intensity, p.doppler});
  }
  return json{{"clip_id", r.clip_id},
              {"frame_id", r.frame_id},
              {"timestamp", r.timestamp},
              {"activity", r.activity},
              {"split", r.split},
              {"points", std::move(points)},
              {"gt_pose", pose_to_json(r.gt_pose)}};
}

DatasetRecord record_from_json(const json& j) {
  DatasetRecord r;
  r.clip_id = j.at("clip_id").get<int>();
  r.frame_id = j.at("frame_id").get<long>();
  r.timestamp = j.at("timestamp").get<double>();
  r.activity = j.at("activity").get<std::string>();
  r.split = j.at("split").get<std::string>();
  for (const auto& p : j.at("points")) {
    RadarPoint point;
    point.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
    point.intensity = p[3].get<double>();
    point.doppler = p[4].get<double>();
    r.frame.points.push_back(point);
  }
  r.frame.frame_id = r.frame_id;
  r.frame.timestamp = r.timestamp;
  r.gt_pose = pose_from_json(j.at("gt_pose"));
  return r;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ostringstream out;
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  atomic_write_text(path, out.str());
}

std::vector<DatasetRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("dataset not found: " + path);
  std::vector<DatasetRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(json::parse(line)));
  }
  return records;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  json j{{"config_hash", m.config_hash},
         {"seed", m.seed},
         {"total_frames", m.total_frames},
         {"clip_count", m.clip_count},
         {"frames_per_split", m.frames_per_split},
         {"frames_per_activity", m.frames_per_activity},
         {"clips_per_split", m.clips_per_split},
         {"stats",
          {{"psi_bar", m.stats.psi_bar},
           {"torso_bar", m.stats.torso_bar},
           {"d_min", m.stats.d_min},
           {"d_ref", m.stats.d_ref}}}};
  atomic_write_text(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("manifest not found: " + path);
  const json j = json::parse(in);
  DatasetManifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.total_frames = j.at("total_frames").get<long>();
  m.clip_count = j.at("clip_count").get<int>();
  m.frames_per_split = j.at("frames_per_split").get<std::map<std::string, long>>();
  m.frames_per_activity = j.at("frames_per_activity").get<std::map<std::string, long>>();
  m.clips_per_split = j.at("clips_per_split").get<std::map<std::string, int>>();
  m.stats.psi_bar = j.at("stats").at("psi_bar").get<double>();
  m.stats.torso_bar = j.at("stats").at("torso_bar").get<double>();
  m.stats.d_min = j.at("stats").at("d_min").get<double>();
  m.stats.d_ref = j.at("stats").at("d_ref").get<double>();
  return m;
}

std::vector<DatasetWindow> build_windows(const std::vector<DatasetRecord>& records,
                                         const std::string& split, int k) {
  if (k < 1) throw ValidationError("build_windows: k must be >= 1");
  std::vector<DatasetWindow> out;
  // records are clip-ordered on disk; group consecutive runs of one clip
  std::size_t start = 0;
  while (start < records.size()) {
    std::size_t stop = start;
    while (stop < records.size() && records[stop].clip_id == records[start].clip_id) stop += 1;
    if (records[start].split == split) {
      for (std::size_t f = start + static_cast<std::size_t>(k) - 1; f < stop; ++f) {
        DatasetWindow w;
        for (std::size_t i = f + 1 - static_cast<std::size_t>(k); i <= f; ++i) {
          w.frames.push_back(records[i].frame);
        }
        w.gt_pose = records[f].gt_pose;
        w.clip_id = records[f].clip_id;
        w.frame_id = records[f].frame_id;
        w.activity = records[f].activity;
        out.push_back(std::move(w));
      }
    }
    start = stop;
  }
  return out;
}

}  // namespace mmjoints
