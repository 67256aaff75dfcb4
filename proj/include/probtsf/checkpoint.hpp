#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "probtsf/core.hpp"
#include "probtsf/forecast.hpp"
#include "probtsf/training.hpp"

namespace probtsf {

// Checkpoint container (JSON, version 1):
//
//   {
//     "format": "probtsf-checkpoint",
//     "version": 1,
//     "lookback": P, "horizon": T,
//     "train_config": { ...TrainConfig fields... },
//     "metadata": { free-form, e.g. data split },
//     "mean_head":            <ssm head>,
//     "pretrained_mean_head": <ssm head>,
//     "sigma_head": { "arch": "fully_connected" | "ssm_backed",
//                     "normalize": bool,
//                     "layer_dims": [P, H, H, T],          (fully_connected)
//                     "arrays": { "layer0.weight": ..., }, (fully_connected)
//                     "ssm": <ssm head> }                  (ssm_backed)
//   }
//
// <ssm head> = { "lookback", "horizon", "latent_dim", "normalize",
//                "arrays": { "a_raw", "b", "c", "delta_raw", "readout_w", "readout_b" } }
//
// Every array is { "shape": [...], "data": [...] }. Doubles are written in
// shortest round-trip form, so a load reproduces the saved bits.

inline constexpr const char* kCheckpointFormat = "probtsf-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  DualModel model;
  TrainConfig config;
  nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

using nlohmann::json;

inline json array_json(std::span<const double> a, std::vector<std::size_t> shape) {
  return json{{"shape", shape}, {"data", std::vector<double>(a.begin(), a.end())}};
}

inline void read_array(const json& arrays, const std::string& name, std::span<double> dst) {
  if (!arrays.contains(name)) throw CheckpointError("checkpoint: missing array '" + name + "'");
  const json& a = arrays.at(name);
  const auto data = a.at("data").get<std::vector<double>>();
  const auto shape = a.at("shape").get<std::vector<std::size_t>>();
  std::size_t n = 1;
  for (std::size_t s : shape) n *= s;
  if (n != data.size() || data.size() != dst.size()) {
    throw CheckpointError("checkpoint: array '" + name + "' has " + std::to_string(data.size()) +
                          " values, expected " + std::to_string(dst.size()));
  }
  std::copy(data.begin(), data.end(), dst.begin());
}

inline json ssm_json(const SsmParams& p) {
  json arrays = json::object();
  const std::size_t D = p.latent_dim, T = p.horizon;
  arrays["a_raw"] = array_json(p.a_raw, {D});
  arrays["b"] = array_json(p.b, {D});
  arrays["c"] = array_json(p.c, {D});
  arrays["delta_raw"] = array_json(std::span<const double>(&p.delta_raw, 1), {1});
  arrays["readout_w"] = array_json(p.readout_w, {T, D});
  arrays["readout_b"] = array_json(p.readout_b, {T});
  return json{{"lookback", p.lookback},
              {"horizon", p.horizon},
              {"latent_dim", p.latent_dim},
              {"normalize", p.normalize},
              {"arrays", arrays}};
}

inline SsmParams ssm_from_json(const json& j) {
  SsmParams p = SsmParams::zeros(j.at("lookback").get<std::size_t>(), j.at("horizon").get<std::size_t>(),
                                 j.at("latent_dim").get<std::size_t>(), j.at("normalize").get<bool>());
  const json& arrays = j.at("arrays");
  SsmParams::visit(p, [&](const std::string& name, std::span<double> a) { read_array(arrays, name, a); });
  p.validate();
  return p;
}

inline json sigma_json(const MlpParams& p) {
  json j{{"arch", to_string(p.arch)}, {"normalize", p.normalize}};
  if (p.arch == VarianceArch::ssm_backed) {
    j["ssm"] = ssm_json(p.ssm);
    return j;
  }
  j["layer_dims"] = p.layer_dims;
  json arrays = json::object();
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& L = p.layers[l];
    arrays["layer" + std::to_string(l) + ".weight"] = array_json(L.w, {L.out, L.in});
    arrays["layer" + std::to_string(l) + ".bias"] = array_json(L.b, {L.out});
  }
  j["arrays"] = arrays;
  return j;
}

inline MlpParams sigma_from_json(const json& j) {
  MlpParams p;
  p.arch = variance_arch_from_string(j.at("arch").get<std::string>());
  p.normalize = j.at("normalize").get<bool>();
  if (p.arch == VarianceArch::ssm_backed) {
    p.ssm = ssm_from_json(j.at("ssm"));
    return p;
  }
  p.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  if (p.layer_dims.size() < 2) throw CheckpointError("checkpoint: sigma head needs >= 2 layer dims");
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    DenseLayer L;
    L.in = p.layer_dims[l];
    L.out = p.layer_dims[l + 1];
    L.w.resize(L.in * L.out);
    L.b.resize(L.out);
    p.layers.push_back(std::move(L));
  }
  const json& arrays = j.at("arrays");
  MlpParams::visit(p, [&](const std::string& name, std::span<double> a) { read_array(arrays, name, a); });
  p.validate();
  return p;
}

inline json train_config_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"pretrain_epochs", c.pretrain_epochs},
              {"joint_epochs", c.joint_epochs},
              {"seed", c.seed},
              {"learning_rate", c.adam.learning_rate},
              {"beta1", c.adam.beta1},
              {"beta2", c.adam.beta2},
              {"epsilon", c.adam.epsilon},
              {"clip_norm", c.clip_norm},
              {"latent_dim", c.latent_dim},
              {"hidden", c.hidden},
              {"variance_arch", to_string(c.variance_arch)},
              {"sigma_latent_dim", c.sigma_latent_dim},
              {"normalize", c.normalize},
              {"fixed_unit_sigma", c.fixed_unit_sigma}};
}

inline TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
  c.joint_epochs = j.at("joint_epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.variance_arch = variance_arch_from_string(j.at("variance_arch").get<std::string>());
  c.sigma_latent_dim = j.at("sigma_latent_dim").get<std::size_t>();
  c.normalize = j.at("normalize").get<bool>();
  c.fixed_unit_sigma = j.at("fixed_unit_sigma").get<bool>();
  return c;
}

}  // namespace detail

inline std::string checkpoint_to_string(const Checkpoint& ck) {
  ck.model.validate();
  const nlohmann::json j{{"format", kCheckpointFormat},
                         {"version", kCheckpointVersion},
                         {"lookback", ck.model.lookback()},
                         {"horizon", ck.model.horizon()},
                         {"train_config", detail::train_config_json(ck.config)},
                         {"metadata", ck.metadata},
                         {"mean_head", detail::ssm_json(ck.model.mean)},
                         {"pretrained_mean_head", detail::ssm_json(ck.model.pretrained_mean)},
                         {"sigma_head", detail::sigma_json(ck.model.sigma)}};
  return j.dump(1) + "\n";
}

// Parses a complete checkpoint or throws CheckpointError; never returns a
// partially filled model.
inline Checkpoint checkpoint_from_string(const std::string& text, const std::string& source = "<string>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(source + ": not a valid checkpoint (" + e.what() + ")");
  }
  try {
    if (!j.is_object() || j.value("format", "") != kCheckpointFormat) {
      throw CheckpointError(source + ": not a probtsf checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(source + ": unsupported checkpoint version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ck;
    ck.config = detail::train_config_from_json(j.at("train_config"));
    ck.metadata = j.at("metadata");
    ck.model.mean = detail::ssm_from_json(j.at("mean_head"));
    ck.model.pretrained_mean = detail::ssm_from_json(j.at("pretrained_mean_head"));
    ck.model.sigma = detail::sigma_from_json(j.at("sigma_head"));
    ck.model.validate();
    if (ck.model.lookback() != j.at("lookback").get<std::size_t>() ||
        ck.model.horizon() != j.at("horizon").get<std::size_t>()) {
      throw CheckpointError(source + ": header lookback/horizon disagree with the stored heads");
    }
    return ck;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(source + ": malformed checkpoint (" + e.what() + ")");
  }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string text = checkpoint_to_string(ck);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("error while writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str(), path);
}

}  // namespace probtsf
