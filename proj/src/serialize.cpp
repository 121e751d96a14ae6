#include "mmjoints/serialize.hpp"

#include "mmjoints/dataset.hpp"

#include <fstream>

namespace mmjoints {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = data[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json network_to_json(const Network& net) {
  json acts = json::array();
  for (auto a : net.spec.activations) acts.push_back(activation_name(a));
  json heads = json::array();
  for (const auto& h : net.spec.heads) heads.push_back({{"transform", head_name(h.transform)}, {"size", h.size}});
  json weights = json::array();
  for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
  json biases = json::array();
  for (const auto& b : net.biases) biases.push_back(vector_to_json(b));
  return json{{"layer_sizes", net.spec.layer_sizes},
              {"activations", std::move(acts)},
              {"heads", std::move(heads)},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)}};
}

Network network_from_json(const json& j) {
  Network net;
  net.spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  for (const auto& a : j.at("activations")) {
    net.spec.activations.push_back(activation_from_string(a.get<std::string>()));
  }
  for (const auto& h : j.at("heads")) {
    net.spec.heads.push_back(
        {head_from_string(h.at("transform").get<std::string>()), h.at("size").get<int>()});
  }
  net.spec.validate();
  for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) net.biases.push_back(vector_from_json(b));
  return net;
}

json mixture_to_json(const GaussianMixture& m) {
  json components = json::array();
  for (const auto& c : m.components) {
    components.push_back({{"mean", vector_to_json(c.mean)}, {"std", vector_to_json(c.std)}});
  }
  return json{{"weights", vector_to_json(m.weights)}, {"components", std::move(components)}};
}

GaussianMixture mixture_from_json(const json& j) {
  GaussianMixture m;
  m.weights = vector_from_json(j.at("weights"));
  for (const auto& c : j.at("components")) {
    m.components.push_back({vector_from_json(c.at("mean")), vector_from_json(c.at("std"))});
  }
  m.validate();
  return m;
}

json vae_to_json(const PoseVae& vae) {
  return json{{"encoder", network_to_json(vae.encoder)},
              {"decoder", network_to_json(vae.decoder)},
              {"norm_mean", vector_to_json(vae.normalizer.mean)},
              {"norm_std", vector_to_json(vae.normalizer.std)},
              {"d_p", vae.d_p}};
}

PoseVae vae_from_json(const json& j) {
  PoseVae vae;
  vae.encoder = network_from_json(j.at("encoder"));
  vae.decoder = network_from_json(j.at("decoder"));
  vae.normalizer.mean = vector_from_json(j.at("norm_mean"));
  vae.normalizer.std = vector_from_json(j.at("norm_std"));
  vae.d_p = j.at("d_p").get<int>();
  return vae;
}

json signal_encoder_to_json(const SignalEncoder& enc) {
  return json{{"point_net", network_to_json(enc.point_net)},
              {"trunk", network_to_json(enc.trunk)},
              {"k_frames", enc.k_frames},
              {"d_s", enc.d_s},
              {"n_classes", enc.n_classes}};
}

SignalEncoder signal_encoder_from_json(const json& j) {
  SignalEncoder enc;
  enc.point_net = network_from_json(j.at("point_net"));
  enc.trunk = network_from_json(j.at("trunk"));
  enc.k_frames = j.at("k_frames").get<int>();
  enc.d_s = j.at("d_s").get<int>();
  enc.n_classes = j.at("n_classes").get<int>();
  return enc;
}

json basis_to_json(const PoseBasis& basis) {
  json empirical = json::array();
  for (const auto& m : basis.empirical) empirical.push_back(mixture_to_json(m));
  return json{{"basis", matrix_to_json(basis.basis)},
              {"inverse", matrix_to_json(basis.inverse)},
              {"empirical", std::move(empirical)},
              {"cluster_ids", basis.cluster_ids},
              {"d_c", basis.d_c}};
}

PoseBasis basis_from_json(const json& j) {
  PoseBasis basis;
  basis.basis = matrix_from_json(j.at("basis"));
  basis.inverse = matrix_from_json(j.at("inverse"));
  for (const auto& m : j.at("empirical")) basis.empirical.push_back(mixture_from_json(m));
  basis.cluster_ids = j.at("cluster_ids").get<std::vector<int>>();
  basis.d_c = j.at("d_c").get<int>();
  return basis;
}

json generator_to_json(const DistributionGenerator& gen) {
  return json{{"context_net", network_to_json(gen.context_net)},
              {"trunk", network_to_json(gen.trunk)},
              {"d_s", gen.d_s},
              {"g", gen.g}};
}

DistributionGenerator generator_from_json(const json& j) {
  DistributionGenerator gen;
  gen.context_net = network_from_json(j.at("context_net"));
  gen.trunk = network_from_json(j.at("trunk"));
  gen.d_s = j.at("d_s").get<int>();
  gen.g = j.at("g").get<int>();
  return gen;
}

json refiner_to_json(const SurrogateRefiner& refiner) {
  return json{{"divergence_net", network_to_json(refiner.divergence_net)},
              {"stage1", network_to_json(refiner.stage1)},
              {"fusion", network_to_json(refiner.fusion)},
              {"mode", static_cast<int>(refiner.mode)},
              {"divergence_scale", refiner.divergence_scale},
              {"d_p", refiner.d_p},
              {"d_s", refiner.d_s},
              {"g", refiner.g}};
}

SurrogateRefiner refiner_from_json(const json& j) {
  SurrogateRefiner r;
  r.divergence_net = network_from_json(j.at("divergence_net"));
  r.stage1 = network_from_json(j.at("stage1"));
  r.fusion = network_from_json(j.at("fusion"));
  r.mode = static_cast<RefinerMode>(j.at("mode").get<int>());
  r.divergence_scale = j.at("divergence_scale").get<double>();
  r.d_p = j.at("d_p").get<int>();
  r.d_s = j.at("d_s").get<int>();
  r.g = j.at("g").get<int>();
  return r;
}

json descriptor_head_to_json(const DescriptorHead& head) {
  return json{{"trunk", network_to_json(head.trunk)},
              {"xi_branch", network_to_json(head.xi_branch)},
              {"kappa_branch", network_to_json(head.kappa_branch)},
              {"inputs", static_cast<int>(head.inputs)},
              {"d_p", head.d_p},
              {"frame_dim", head.frame_dim}};
}

DescriptorHead descriptor_head_from_json(const json& j) {
  DescriptorHead head;
  head.trunk = network_from_json(j.at("trunk"));
  head.xi_branch = network_from_json(j.at("xi_branch"));
  head.kappa_branch = network_from_json(j.at("kappa_branch"));
  head.inputs = static_cast<DescriptorInputs>(j.at("inputs").get<int>());
  head.d_p = j.at("d_p").get<int>();
  head.frame_dim = j.at("frame_dim").get<int>();
  return head;
}

json estimator_to_json_model(const PoseEstimator& est) {
  return json{{"kind", estimator_kind_name(est.spec.kind)},
              {"window", est.spec.window},
              {"seed", est.spec.seed},
              {"point_net", network_to_json(est.point_net)},
              {"head", network_to_json(est.head)},
              {"mean_pose_flat", vector_to_json(est.mean_pose_flat)},
              {"lower_point_threshold", est.lower_point_threshold}};
}

PoseEstimator estimator_from_json_model(const json& j) {
  PoseEstimator est;
  est.spec.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
  est.spec.window = j.at("window").get<int>();
  est.spec.seed = j.at("seed").get<std::uint64_t>();
  est.point_net = network_from_json(j.at("point_net"));
  est.head = network_from_json(j.at("head"));
  est.mean_pose_flat = vector_from_json(j.at("mean_pose_flat"));
  est.lower_point_threshold = j.at("lower_point_threshold").get<int>();
  return est;
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  const json j{{"kind", c.kind},
               {"stage_hash", c.stage_hash},
               {"seed", c.seed},
               {"payload", c.payload}};
  atomic_write_text(path, j.dump() + "\n");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("checkpoint not found: " + path);
  const json j = json::parse(in);
  Checkpoint c;
  c.kind = j.at("kind").get<std::string>();
  c.stage_hash = j.at("stage_hash").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.payload = j.at("payload");
  return c;
}

Checkpoint require_checkpoint(const std::string& path, const std::string& expected_kind,
                              const std::string& expected_hash) {
  Checkpoint c = read_checkpoint(path);
  if (c.kind != expected_kind) {
    throw DependencyError("checkpoint " + path + " has kind '" + c.kind + "', expected '" +
                          expected_kind + "'");
  }
  if (c.stage_hash != expected_hash) {
    throw DependencyError("checkpoint " + path + " was built from a different configuration (" +
                          c.stage_hash + " != " + expected_hash + "); rerun the stage");
  }
  return c;
}

}  // namespace mmjoints
