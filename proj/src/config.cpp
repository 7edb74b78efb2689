// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hadiff {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

double to_double(const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError("config: bad numeric value '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value '" + v + "'");
  }
}

int to_int(const std::string& v) {
  try {
    std::size_t pos = 0;
    const int i = std::stoi(v, &pos);
    if (pos != v.size()) throw ConfigError("config: bad integer value '" + v + "'");
    return i;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value '" + v + "'");
  }
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean value '" + v + "'");
}

const std::map<std::string, Setter>& registry() {
  static const std::map<std::string, Setter> reg = {
      {"schedule.sigma_tr_min", [](RunConfig& c, const std::string& v) { c.schedule.sigma_tr_min = to_double(v); }},
      {"schedule.sigma_tr_max", [](RunConfig& c, const std::string& v) { c.schedule.sigma_tr_max = to_double(v); }},
      {"schedule.sigma_rot_min", [](RunConfig& c, const std::string& v) { c.schedule.sigma_rot_min = to_double(v); }},
      {"schedule.sigma_rot_max", [](RunConfig& c, const std::string& v) { c.schedule.sigma_rot_max = to_double(v); }},
      {"model.n_scalars", [](RunConfig& c, const std::string& v) { c.model.n_scalars = to_int(v); }},
      {"model.n_vectors", [](RunConfig& c, const std::string& v) { c.model.n_vectors = to_int(v); }},
      {"model.n_layers", [](RunConfig& c, const std::string& v) { c.model.n_layers = to_int(v); }},
      {"model.hidden_dim", [](RunConfig& c, const std::string& v) { c.model.hidden_dim = to_int(v); }},
      {"model.edge_embed_dim", [](RunConfig& c, const std::string& v) { c.model.edge_embed_dim = to_int(v); }},
      {"model.esm_dim", [](RunConfig& c, const std::string& v) { c.model.esm_dim = to_int(v); }},
      {"model.time_dim", [](RunConfig& c, const std::string& v) { c.model.time_dim = to_int(v); }},
      {"model.rbf_count", [](RunConfig& c, const std::string& v) { c.model.rbf_count = to_int(v); }},
      {"model.center_rbf_cutoff", [](RunConfig& c, const std::string& v) { c.model.center_rbf_cutoff = to_double(v); }},
      {"model.clddt_radius", [](RunConfig& c, const std::string& v) { c.model.clddt_radius = to_double(v); }},
      {"model.irmsd_dim", [](RunConfig& c, const std::string& v) { c.model.irmsd_dim = to_int(v); }},
      {"model.irmsd_layers", [](RunConfig& c, const std::string& v) { c.model.irmsd_layers = to_int(v); }},
      {"loss.w_diffusion", [](RunConfig& c, const std::string& v) { c.weights.diffusion = to_double(v); }},
      {"loss.w_ifape", [](RunConfig& c, const std::string& v) { c.weights.ifape = to_double(v); }},
      {"loss.w_lddt", [](RunConfig& c, const std::string& v) { c.weights.lddt = to_double(v); }},
      {"sampler.n_steps", [](RunConfig& c, const std::string& v) { c.sampler_steps = to_int(v); }},
      {"sampler.stochastic", [](RunConfig& c, const std::string& v) { c.sampler_stochastic = to_bool(v); }},
      {"sampler.n_candidates", [](RunConfig& c, const std::string& v) { c.sampler_candidates = to_int(v); }},
      {"nma.cutoff", [](RunConfig& c, const std::string& v) { c.nma_cutoff = to_double(v); }},
      {"nma.modes", [](RunConfig& c, const std::string& v) { c.nma_modes = to_int(v); }},
      {"train.learning_rate", [](RunConfig& c, const std::string& v) { c.learning_rate = to_double(v); }},
      {"train.irmsd_learning_rate", [](RunConfig& c, const std::string& v) { c.irmsd_learning_rate = to_double(v); }},
      {"train.steps", [](RunConfig& c, const std::string& v) { c.train_steps = to_int(v); }},
      {"train.log_every", [](RunConfig& c, const std::string& v) { c.log_every = to_int(v); }},
      {"table.path", [](RunConfig& c, const std::string& v) { c.table_path = v; }},
  };
  return reg;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, fn] : registry()) k.push_back(name);
    return k;
  }();
  return keys;
}

void RunConfig::apply(const std::string& key, const std::string& value) {
  const auto& reg = registry();
  auto it = reg.find(key);
  if (it == reg.end()) {
    std::string msg = "config: unknown key '" + key + "'. Valid keys:";
    for (const auto& k : config_keys()) msg += "\n  " + k;
    throw ConfigError(msg);
  }
  it->second(*this, value);
}

void RunConfig::validate() const {
  schedule.validate();
  weights.validate();
  if (model.n_layers < 1) throw ConfigError("config: model.n_layers must be >= 1");
  if (model.time_dim % 2 != 0) throw ConfigError("config: model.time_dim must be even");
  if (sampler_steps < 2) throw ConfigError("config: sampler.n_steps must be >= 2");
  if (sampler_candidates < 1) throw ConfigError("config: sampler.n_candidates must be >= 1");
  if (learning_rate <= 0.0 || irmsd_learning_rate <= 0.0)
    throw ConfigError("config: learning rates must be positive");
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::string line;
  int line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' at line " + std::to_string(line_number));
    auto trim = [](std::string s) {
      const auto bb = s.find_first_not_of(" \t");
      if (bb == std::string::npos) return std::string();
      const auto ee = s.find_last_not_of(" \t");
      return s.substr(bb, ee - bb + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at line " + std::to_string(line_number));
    base.apply(key, value);
  }
  base.validate();
  return base;
}

}  // namespace hadiff
