#pragma once

#include "mmjoints/em.hpp"
#include "mmjoints/latent.hpp"
#include "mmjoints/simulator.hpp"

#include <string>

namespace mmjoints {

struct SimulateConfig {
  int clips_train = 3;  // per activity
  int clips_val = 1;
  int clips_test = 2;
  double clip_duration_s = 10.0;
  double scale_train_lo = 0.94;
  double scale_train_hi = 1.04;
  double scale_val_lo = 0.90;
  double scale_val_hi = 0.94;
  double scale_test_lo = 1.04;
  double scale_test_hi = 1.12;
  bool include_freestyle = false;
};

struct TrainSchedule {
  int pose_epochs = 40;
  int opl_epochs = 30;
  int signal_epochs = 40;
  int estimator_epochs = 30;
  int generator_epochs = 30;
  int surrogate_epochs = 40;
  int descriptor_epochs = 60;
  int downstream_epochs = 40;
  double lr = 1e-3;
};

/// Whole-pipeline configuration. Presets fill defaults; individual fields
/// override field-wise via config file and MMJOINTS_* environment variables.
struct PipelineConfig {
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  SimulateConfig simulate;
  RadarConfig radar;
  FitConfig fit;
  LatentHyperparams latent;
  EstimatorSpec estimator;
  TrainSchedule train;

  static PipelineConfig from_preset(const std::string& preset);
  void validate() const;
};

/// Loads a JSON config file (optional), applies the preset, file overrides,
/// then MMJOINTS_<SECTION>__<KEY> environment overrides.
PipelineConfig load_config(const std::string& config_path, const std::string& preset_override,
                           long seed_override);

std::string config_to_json_string(const PipelineConfig& config);

/// Pipeline stages in dependency order.
enum class Stage { Pose = 0, Signal, Estimator, Generator, Surrogate, Descriptor };

const char* stage_name(Stage s);
Stage stage_from_string(const std::string& name);

/// 16-hex-digit hash of the configuration slice a stage depends on, chained
/// through its prerequisite stages. A stage reruns iff its hash changes.
std::string stage_hash(const PipelineConfig& config, Stage stage);
std::string simulate_hash(const PipelineConfig& config);
std::string full_config_hash(const PipelineConfig& config);

}  // namespace mmjoints
