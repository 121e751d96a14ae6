#pragma once

#include "mmjoints/simulator.hpp"
#include "mmjoints/types.hpp"

#include <map>
#include <string>
#include <vector>

namespace mmjoints {

/// One dataset line: a rendered frame with its ground truth and provenance.
struct DatasetRecord {
  int clip_id = 0;
  long frame_id = 0;
  double timestamp = 0.0;
  std::string activity;
  std::string split;  // train | val | test
  PointCloudFrame frame;
  Pose gt_pose;
};

struct DatasetManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  long total_frames = 0;
  int clip_count = 0;
  std::map<std::string, long> frames_per_split;
  std::map<std::string, long> frames_per_activity;
  std::map<std::string, int> clips_per_split;
  DatasetStats stats;  // psi_bar computed over the training split
};

/// Newline-delimited JSON records; lossless round-trip for every field.
void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> read_dataset(const std::string& path);

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// Sliding K-frame windows within one clip; the window's ground truth is the
/// pose at its last frame.
struct DatasetWindow {
  std::vector<PointCloudFrame> frames;
  Pose gt_pose;
  int clip_id = 0;
  long frame_id = 0;  // last frame of the window
  std::string activity;
};

std::vector<DatasetWindow> build_windows(const std::vector<DatasetRecord>& records,
                                         const std::string& split, int k);

/// Atomic text write: temp file in the same directory, then rename.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace mmjoints
