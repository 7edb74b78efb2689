// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace hadiff {

namespace {

constexpr char kMagic[8] = {'H', 'D', 'C', 'K', 'P', 'T', '1', '\0'};

void put_i64(std::ofstream& f, std::int64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ofstream& f, double v) { f.write(reinterpret_cast<const char*>(&v), 8); }

std::int64_t get_i64(std::ifstream& f) {
  std::int64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::ifstream& f) {
  double v = 0;
  f.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_config(std::ofstream& f, const ModelConfig& c) {
  put_i64(f, c.n_scalars);
  put_i64(f, c.n_vectors);
  put_i64(f, c.n_layers);
  put_i64(f, c.hidden_dim);
  put_i64(f, c.edge_embed_dim);
  put_i64(f, c.esm_dim);
  put_i64(f, c.time_dim);
  put_i64(f, c.rbf_count);
  put_f64(f, c.center_rbf_cutoff);
  put_f64(f, c.clddt_radius);
  put_i64(f, c.irmsd_dim);
  put_i64(f, c.irmsd_layers);
}

ModelConfig read_config(std::ifstream& f) {
  ModelConfig c;
  c.n_scalars = static_cast<int>(get_i64(f));
  c.n_vectors = static_cast<int>(get_i64(f));
  c.n_layers = static_cast<int>(get_i64(f));
  c.hidden_dim = static_cast<int>(get_i64(f));
  c.edge_embed_dim = static_cast<int>(get_i64(f));
  c.esm_dim = static_cast<int>(get_i64(f));
  c.time_dim = static_cast<int>(get_i64(f));
  c.rbf_count = static_cast<int>(get_i64(f));
  c.center_rbf_cutoff = get_f64(f);
  c.clddt_radius = get_f64(f);
  c.irmsd_dim = static_cast<int>(get_i64(f));
  c.irmsd_layers = static_cast<int>(get_i64(f));
  return c;
}

void write_tensors(std::ofstream& f, const ModelParams& p) {
  put_i64(f, static_cast<std::int64_t>(p.tensors.size()));
  for (const auto& [name, tensor] : p.tensors) {
    put_i64(f, static_cast<std::int64_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_i64(f, tensor.rows());
    put_i64(f, tensor.cols());
    f.write(reinterpret_cast<const char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.size() * 8));
  }
}

void read_tensors(std::ifstream& f, ModelParams& p) {
  const std::int64_t count = get_i64(f);
  if (count < 0 || count > (1 << 20)) throw ParseError("checkpoint: bad tensor count");
  for (std::int64_t k = 0; k < count; ++k) {
    const std::int64_t name_len = get_i64(f);
    if (name_len <= 0 || name_len > 4096) throw ParseError("checkpoint: bad tensor name length");
    std::string name(static_cast<std::size_t>(name_len), '\0');
    f.read(name.data(), name_len);
    const std::int64_t rows = get_i64(f), cols = get_i64(f);
    if (rows <= 0 || cols <= 0 || rows * cols > (1LL << 30))
      throw ParseError("checkpoint: bad tensor shape for " + name);
    MatX m(rows, cols);
    f.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
    if (!f) throw ParseError("checkpoint: truncated tensor data for " + name);
    p.tensors.emplace(std::move(name), std::move(m));
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& score_params,
                     const ModelParams& irmsd_params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("checkpoint: cannot open " + path + " for writing");
  f.write(kMagic, 8);
  write_config(f, score_params.config);
  write_tensors(f, score_params);
  write_tensors(f, irmsd_params);
  if (!f) throw ParseError("checkpoint: write failed for " + path);
}

std::pair<ModelParams, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  ModelParams score, irmsd;
  score.config = read_config(f);
  irmsd.config = score.config;
  read_tensors(f, score);
  read_tensors(f, irmsd);
  if (!f) throw ParseError("checkpoint: truncated file " + path);

  // Shape audit against the configuration's inventory.
  for (const auto& [name, rows, cols] : param_shapes(score.config)) {
    const MatX& m = score.at(name);
    if (m.rows() != rows || m.cols() != cols)
      throw ParseError("checkpoint: shape mismatch for " + name);
  }
  for (const auto& [name, rows, cols] : IrmsdPredictor::param_shapes(irmsd.config)) {
    const MatX& m = irmsd.at(name);
    if (m.rows() != rows || m.cols() != cols)
      throw ParseError("checkpoint: shape mismatch for " + name);
  }
  return {std::move(score), std::move(irmsd)};
}

}  // namespace hadiff
