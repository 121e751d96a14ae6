#include "mmjoints/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>

namespace mmjoints {

using nlohmann::json;

namespace {

json simulate_to_json(const SimulateConfig& s) {
  return json{{"clips_train", s.clips_train},
              {"clips_val", s.clips_val},
              {"clips_test", s.clips_test},
              {"clip_duration_s", s.clip_duration_s},
              {"scale_train_lo", s.scale_train_lo},
              {"scale_train_hi", s.scale_train_hi},
              {"scale_val_lo", s.scale_val_lo},
              {"scale_val_hi", s.scale_val_hi},
              {"scale_test_lo", s.scale_test_lo},
              {"scale_test_hi", s.scale_test_hi},
              {"include_freestyle", s.include_freestyle}};
}

json radar_to_json(const RadarConfig& r) {
  return json{{"radar_x", r.radar_position_cm.x()},
              {"radar_y", r.radar_position_cm.y()},
              {"radar_z", r.radar_position_cm.z()},
              {"points_budget", r.points_budget},
              {"intensity_constant", r.intensity_constant},
              {"noise_std_cm", r.noise_std_cm},
              {"upper_dropout", r.upper_dropout},
              {"lower_dropout", r.lower_dropout}};
}

json fit_to_json(const FitConfig& f) {
  return json{{"max_iterations", f.max_iterations},
              {"tolerance", f.tolerance},
              {"variance_floor", f.variance_floor},
              {"g_max", f.g_max}};
}

json latent_to_json(const LatentHyperparams& h) {
  return json{{"d_p", h.d_p},
              {"d_s", h.d_s},
              {"k_frames", h.k_frames},
              {"c_max", h.c_max},
              {"m_max", h.m_max},
              {"g_max", h.g_max},
              {"samples_per_neighbor", h.samples_per_neighbor},
              {"lambda_step2", h.lambda_step2},
              {"lambda_step3", h.lambda_step3},
              {"lambda0", h.lambda0},
              {"lambda1", h.lambda1},
              {"lambda2", h.lambda2},
              {"lambda_div", h.lambda_div},
              {"lambda_inter", h.lambda_inter},
              {"triplet_margin", h.triplet_margin},
              {"huber_delta", h.huber_delta}};
}

json estimator_to_json(const EstimatorSpec& e) {
  return json{{"kind", estimator_kind_name(e.kind)}, {"window", e.window}, {"seed", e.seed}};
}

json train_to_json(const TrainSchedule& t) {
  return json{{"pose_epochs", t.pose_epochs},
              {"opl_epochs", t.opl_epochs},
              {"signal_epochs", t.signal_epochs},
              {"estimator_epochs", t.estimator_epochs},
              {"generator_epochs", t.generator_epochs},
              {"surrogate_epochs", t.surrogate_epochs},
              {"descriptor_epochs", t.descriptor_epochs},
              {"downstream_epochs", t.downstream_epochs},
              {"lr", t.lr}};
}

json config_to_json(const PipelineConfig& c) {
  return json{{"preset", c.preset},
              {"seed", c.seed},
              {"simulate", simulate_to_json(c.simulate)},
              {"radar", radar_to_json(c.radar)},
              {"fit", fit_to_json(c.fit)},
              {"latent", latent_to_json(c.latent)},
              {"estimator", estimator_to_json(c.estimator)},
              {"train", train_to_json(c.train)}};
}

template <typename T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void apply_json(PipelineConfig& c, const json& j) {
  maybe(j, "preset", c.preset);
  maybe(j, "seed", c.seed);
  maybe(j, "out_dir", c.out_dir);
  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    maybe(s, "clips_train", c.simulate.clips_train);
    maybe(s, "clips_val", c.simulate.clips_val);
    maybe(s, "clips_test", c.simulate.clips_test);
    maybe(s, "clip_duration_s", c.simulate.clip_duration_s);
    maybe(s, "scale_train_lo", c.simulate.scale_train_lo);
    maybe(s, "scale_train_hi", c.simulate.scale_train_hi);
    maybe(s, "scale_val_lo", c.simulate.scale_val_lo);
    maybe(s, "scale_val_hi", c.simulate.scale_val_hi);
    maybe(s, "scale_test_lo", c.simulate.scale_test_lo);
    maybe(s, "scale_test_hi", c.simulate.scale_test_hi);
    maybe(s, "include_freestyle", c.simulate.include_freestyle);
  }
  if (j.contains("radar")) {
    const auto& r = j.at("radar");
    double x = c.radar.radar_position_cm.x(), y = c.radar.radar_position_cm.y(),
           z = c.radar.radar_position_cm.z();
    maybe(r, "radar_x", x);
    maybe(r, "radar_y", y);
    maybe(r, "radar_z", z);
    c.radar.radar_position_cm = {x, y, z};
    maybe(r, "points_budget", c.radar.points_budget);
    maybe(r, "intensity_constant", c.radar.intensity_constant);
    maybe(r, "noise_std_cm", c.radar.noise_std_cm);
    maybe(r, "upper_dropout", c.radar.upper_dropout);
    maybe(r, "lower_dropout", c.radar.lower_dropout);
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    maybe(f, "max_iterations", c.fit.max_iterations);
    maybe(f, "tolerance", c.fit.tolerance);
    maybe(f, "variance_floor", c.fit.variance_floor);
    maybe(f, "g_max", c.fit.g_max);
  }
  if (j.contains("latent")) {
    const auto& l = j.at("latent");
    maybe(l, "d_p", c.latent.d_p);
    maybe(l, "d_s", c.latent.d_s);
    maybe(l, "k_frames", c.latent.k_frames);
    maybe(l, "c_max", c.latent.c_max);
    maybe(l, "m_max", c.latent.m_max);
    maybe(l, "g_max", c.latent.g_max);
    maybe(l, "samples_per_neighbor", c.latent.samples_per_neighbor);
    maybe(l, "lambda_step2", c.latent.lambda_step2);
    maybe(l, "lambda_step3", c.latent.lambda_step3);
    maybe(l, "lambda0", c.latent.lambda0);
    maybe(l, "lambda1", c.latent.lambda1);
    maybe(l, "lambda2", c.latent.lambda2);
    maybe(l, "lambda_div", c.latent.lambda_div);
    maybe(l, "lambda_inter", c.latent.lambda_inter);
    maybe(l, "triplet_margin", c.latent.triplet_margin);
    maybe(l, "huber_delta", c.latent.huber_delta);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    if (e.contains("kind")) c.estimator.kind = estimator_kind_from_string(e.at("kind").get<std::string>());
    maybe(e, "window", c.estimator.window);
    maybe(e, "seed", c.estimator.seed);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe(t, "pose_epochs", c.train.pose_epochs);
    maybe(t, "opl_epochs", c.train.opl_epochs);
    maybe(t, "signal_epochs", c.train.signal_epochs);
    maybe(t, "estimator_epochs", c.train.estimator_epochs);
    maybe(t, "generator_epochs", c.train.generator_epochs);
    maybe(t, "surrogate_epochs", c.train.surrogate_epochs);
    maybe(t, "descriptor_epochs", c.train.descriptor_epochs);
    maybe(t, "downstream_epochs", c.train.downstream_epochs);
    maybe(t, "lr", c.train.lr);
  }
}

// MMJOINTS_SEED=7, MMJOINTS_LATENT__D_P=16, MMJOINTS_RADAR__LOWER_DROPOUT=0.5
void apply_env_overrides(PipelineConfig& c) {
  json base = config_to_json(c);
  json overrides;
  const auto try_env = [&](const std::string& section, const std::string& key, const json& value) {
    std::string name = "MMJOINTS_";
    if (!section.empty()) {
      std::string upper_section = section;
      for (auto& ch : upper_section) ch = static_cast<char>(std::toupper(ch));
      name += upper_section + "__";
    }
    std::string upper_key = key;
    for (auto& ch : upper_key) ch = static_cast<char>(std::toupper(ch));
    name += upper_key;
    const char* raw = std::getenv(name.c_str());
    if (!raw) return;
    json parsed;
    if (value.is_string()) {
      parsed = std::string(raw);
    } else {
      parsed = json::parse(raw, nullptr, false);
      if (parsed.is_discarded()) throw ValidationError("cannot parse env override " + name);
    }
    if (section.empty()) {
      overrides[key] = parsed;
    } else {
      overrides[section][key] = parsed;
    }
  };

  for (const auto& [key, value] : base.items()) {
    if (value.is_object()) {
      for (const auto& [sub_key, sub_value] : value.items()) try_env(key, sub_key, sub_value);
    } else {
      try_env("", key, value);
    }
  }
  try_env("", "out_dir", json(c.out_dir));
  if (!overrides.is_null()) apply_json(c, overrides);
}

}  // namespace

PipelineConfig PipelineConfig::from_preset(const std::string& preset) {
  PipelineConfig c;
  c.preset = preset;
  if (preset == "desk") {
    c.latent = LatentHyperparams::desk();
  } else if (preset == "paper") {
    c.latent = LatentHyperparams::paper_scale();
    c.simulate.clips_train = 12;
    c.simulate.clips_val = 2;
    c.simulate.clips_test = 4;
    c.simulate.clip_duration_s = 20.0;
    c.fit.g_max = 6;
    c.train.pose_epochs = 80;
    c.train.signal_epochs = 80;
    c.train.estimator_epochs = 60;
    c.train.generator_epochs = 60;
    c.train.surrogate_epochs = 80;
    c.train.descriptor_epochs = 120;
  } else {
    throw ValidationError("unknown preset: " + preset);
  }
  return c;
}

void PipelineConfig::validate() const {
  if (preset != "desk" && preset != "paper") throw ValidationError("unknown preset: " + preset);
  if (simulate.clips_train < 1 || simulate.clips_val < 0 || simulate.clips_test < 1) {
    throw ValidationError("config: clip counts invalid");
  }
  if (simulate.clip_duration_s < 0.0) throw ValidationError("config: duration must be >= 0");
  radar.validate();
  fit.validate();
  latent.validate();
  estimator.validate();
  if (latent.k_frames != estimator.window) {
    throw ValidationError("config: estimator window must equal latent.k_frames");
  }
}

PipelineConfig load_config(const std::string& config_path, const std::string& preset_override,
                           long seed_override) {
  std::string preset = preset_override;
  json file_json;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ValidationError("config file not found: " + config_path);
    file_json = json::parse(in);
    if (preset.empty() && file_json.contains("preset")) {
      preset = file_json.at("preset").get<std::string>();
    }
  }
  if (preset.empty()) preset = "desk";

  PipelineConfig c = PipelineConfig::from_preset(preset);
  if (!file_json.is_null()) apply_json(c, file_json);
  c.preset = preset;
  apply_env_overrides(c);
  if (seed_override >= 0) c.seed = static_cast<std::uint64_t>(seed_override);
  c.validate();
  return c;
}

std::string config_to_json_string(const PipelineConfig& config) {
  json j = config_to_json(config);
  return j.dump(2) + "\n";
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Pose: return "pose";
    case Stage::Signal: return "signal";
    case Stage::Estimator: return "estimator";
    case Stage::Generator: return "generator";
    case Stage::Surrogate: return "surrogate";
    case Stage::Descriptor: return "descriptor";
  }
  throw ValidationError("unknown stage");
}

Stage stage_from_string(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Stage::Descriptor); ++i) {
    if (name == stage_name(static_cast<Stage>(i))) return static_cast<Stage>(i);
  }
  throw ValidationError("unknown stage: " + name);
}

namespace {
std::string hash_json(const json& j) { return to_hex(fnv1a64(j.dump())); }
}  // namespace

std::string simulate_hash(const PipelineConfig& c) {
  return hash_json(json{{"seed", c.seed},
                        {"simulate", simulate_to_json(c.simulate)},
                        {"radar", radar_to_json(c.radar)}});
}

std::string stage_hash(const PipelineConfig& c, Stage stage) {
  switch (stage) {
    case Stage::Pose:
      return hash_json(json{{"upstream", simulate_hash(c)},
                            {"latent", latent_to_json(c.latent)},
                            {"fit", fit_to_json(c.fit)},
                            {"epochs", c.train.pose_epochs},
                            {"opl_epochs", c.train.opl_epochs},
                            {"lr", c.train.lr}});
    case Stage::Signal:
      return hash_json(json{{"upstream", stage_hash(c, Stage::Pose)},
                            {"epochs", c.train.signal_epochs},
                            {"lr", c.train.lr}});
    case Stage::Estimator:
      return hash_json(json{{"upstream", simulate_hash(c)},
                            {"estimator", estimator_to_json(c.estimator)},
                            {"k_frames", c.latent.k_frames},
                            {"epochs", c.train.estimator_epochs},
                            {"lr", c.train.lr}});
    case Stage::Generator:
      return hash_json(json{{"upstream", stage_hash(c, Stage::Signal)},
                            {"epochs", c.train.generator_epochs},
                            {"lr", c.train.lr}});
    case Stage::Surrogate:
      return hash_json(json{{"generator", stage_hash(c, Stage::Generator)},
                            {"estimator", stage_hash(c, Stage::Estimator)},
                            {"epochs", c.train.surrogate_epochs},
                            {"lr", c.train.lr}});
    case Stage::Descriptor:
      return hash_json(json{{"upstream", stage_hash(c, Stage::Surrogate)},
                            {"epochs", c.train.descriptor_epochs},
                            {"lr", c.train.lr}});
  }
  throw ValidationError("unknown stage");
}

std::string full_config_hash(const PipelineConfig& c) { return hash_json(config_to_json(c)); }

}  // namespace mmjoints
