#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qdra/decoder.hpp"
#include "qdra/errors.hpp"
#include "qdra/params.hpp"

namespace qdra {

inline constexpr const char* kCheckpointFormat = "qdra-ckpt-v1";

namespace detail {

inline nlohmann::json params_to_json(const ParamStore& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : params) {
    j[name] = {{"shape", p.value.shape}, {"values", p.value.values}};
  }
  return j;
}

inline void params_from_json(const nlohmann::json& j, ParamStore& params) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    Tensor t;
    t.shape = it.value().at("shape").get<std::vector<int>>();
    t.values = it.value().at("values").get<std::vector<double>>();
    if (t.numel_from_shape() != t.values.size())
      throw ParseError("checkpoint parameter " + it.key() + " shape/value mismatch");
    if (!t.all_finite()) throw ParseError("checkpoint parameter " + it.key() + " is non-finite");
    params.add(it.key(), std::move(t));
  }
}

inline nlohmann::json load_checkpoint_json(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat)
    throw ParseError("checkpoint " + path + ": unsupported format '" + j.value("format", "") +
                     "', expected " + kCheckpointFormat);
  if (j.value("kind", "") != kind)
    throw ParseError("checkpoint " + path + ": kind '" + j.value("kind", "") + "', expected " +
                     kind);
  return j;
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
  if (!out) throw ParseError("write failure on " + path);
}

}  // namespace detail

inline void save_decoder(const DecoderModel& m, const std::string& path,
                         const nlohmann::json& provenance = nlohmann::json()) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["kind"] = "decoder";
  j["seed"] = m.seed;
  j["config"] = {{"in_dim", m.cfg.in_dim},     {"hidden_dim", m.cfg.hidden_dim},
                 {"heads", m.cfg.heads},       {"mlp_hidden", m.cfg.mlp_hidden},
                 {"lr", m.cfg.lr},             {"epochs", m.cfg.epochs},
                 {"batch", m.cfg.batch}};
  j["params"] = detail::params_to_json(m.params);
  if (!provenance.is_null()) j["provenance"] = provenance;
  detail::write_json_file(j, path);
}

inline DecoderModel load_decoder(const std::string& path) {
  nlohmann::json j = detail::load_checkpoint_json(path, "decoder");
  DecoderModel m;
  const auto& c = j.at("config");
  m.cfg.in_dim = c.at("in_dim");
  m.cfg.hidden_dim = c.at("hidden_dim");
  m.cfg.heads = c.at("heads");
  m.cfg.mlp_hidden = c.at("mlp_hidden");
  m.cfg.lr = c.at("lr");
  m.cfg.epochs = c.at("epochs");
  m.cfg.batch = c.at("batch");
  m.cfg.validate();
  m.seed = j.at("seed");
  detail::params_from_json(j.at("params"), m.params);
  return m;
}

}  // namespace qdra
