#pragma once

#include "mmjoints/latent.hpp"
#include "mmjoints/simulator.hpp"

#include <json.hpp>

#include <string>

namespace mmjoints {

// JSON codecs for every checkpointed model. Doubles serialize via the
// shortest round-trip representation, so write/read is bit-exact.

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

nlohmann::json mixture_to_json(const GaussianMixture& m);
GaussianMixture mixture_from_json(const nlohmann::json& j);

nlohmann::json vae_to_json(const PoseVae& vae);
PoseVae vae_from_json(const nlohmann::json& j);

nlohmann::json signal_encoder_to_json(const SignalEncoder& enc);
SignalEncoder signal_encoder_from_json(const nlohmann::json& j);

nlohmann::json basis_to_json(const PoseBasis& basis);
PoseBasis basis_from_json(const nlohmann::json& j);

nlohmann::json generator_to_json(const DistributionGenerator& gen);
DistributionGenerator generator_from_json(const nlohmann::json& j);

nlohmann::json refiner_to_json(const SurrogateRefiner& refiner);
SurrogateRefiner refiner_from_json(const nlohmann::json& j);

nlohmann::json descriptor_head_to_json(const DescriptorHead& head);
DescriptorHead descriptor_head_from_json(const nlohmann::json& j);

nlohmann::json estimator_to_json_model(const PoseEstimator& est);
PoseEstimator estimator_from_json_model(const nlohmann::json& j);

/// Checkpoint envelope: payload plus the stage hash, seed, and kind tag that
/// downstream stages verify before loading.
struct Checkpoint {
  std::string kind;
  std::string stage_hash;
  std::uint64_t seed = 0;
  nlohmann::json payload;
};

void write_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::string& path);

/// Loads and verifies the stage hash; DependencyError on absence or mismatch.
Checkpoint require_checkpoint(const std::string& path, const std::string& expected_kind,
                              const std::string& expected_hash);

}  // namespace mmjoints
