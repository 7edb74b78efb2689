// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hadiff/checkpoint.hpp"
#include "hadiff/cli.hpp"
#include "hadiff/config.hpp"
#include "hadiff/score_model.hpp"
#include "synthetic.hpp"

using namespace hadiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hadiff_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Tiny-model config file shared by the CLI tests.
std::string write_tiny_config(const TempDir& dir) {
  const std::string path = dir.file("tiny.cfg");
  std::ofstream f(path);
  f << "model.n_scalars = 4\n"
       "model.n_vectors = 2\n"
       "model.n_layers = 1\n"
       "model.hidden_dim = 8\n"
       "model.edge_embed_dim = 6\n"
       "model.esm_dim = 2\n"
       "model.time_dim = 4\n"
       "model.rbf_count = 6\n"
       "model.irmsd_dim = 4\n"
       "model.irmsd_layers = 1\n"
       "sampler.n_steps = 6\n"
       "sampler.n_candidates = 2\n"
       "sampler.stochastic = false\n"
       "nma.modes = 8\n"
       "train.steps = 8\n"
       "train.log_every = 4\n";
  return path;
}

std::string make_manifest(const TempDir& dir, int n_cases, double flex, std::uint64_t seed) {
  std::vector<std::string> lines;
  for (int i = 0; i < n_cases; ++i) {
    auto synth = testsupport::make_case(7, 6, flex, seed + i);
    lines.push_back(
        testsupport::write_case_files(synth, dir.path.string(), "case" + std::to_string(i)));
  }
  return testsupport::write_manifest(lines, dir.path.string());
}

}  // namespace

TEST_CASE("unknown subcommand and bad config exit with code 2") {
  CHECK(run_cli({"frobnicate"}) == 2);
  TempDir dir;
  const std::string bad = dir.file("bad.cfg");
  {
    std::ofstream f(bad);
    f << "not.a.key = 1\n";
  }
  CHECK(run_cli({"--config", bad, "tables", "--out", dir.file("t.bin")}) == 2);
}

TEST_CASE("nma subcommand writes the MSF table and correlation matrix") {
  TempDir dir;
  auto synth = testsupport::make_case(9, 7, 0.2, 11);
  testsupport::write_case_files(synth, dir.path.string(), "c");
  const std::string msf_path = dir.file("msf.txt");
  const std::string corr_path = dir.file("corr.txt");
  CHECK(run_cli({"nma", "--pdb", dir.file("c_ur.pdb"), "--out-msf", msf_path, "--out-corr",
                 corr_path}) == 0);
  const std::string msf_text = read_file(msf_path);
  CHECK(msf_text.find("# residue_index msf") != std::string::npos);
  int lines = 0;
  for (char c : msf_text)
    if (c == '\n') ++lines;
  CHECK(lines == 10);  // header + 9 residues
  CHECK(read_file(corr_path).find("9 x 9") != std::string::npos);
}

TEST_CASE("featurize and noise subcommands produce per-case dumps") {
  TempDir dir;
  const std::string manifest = make_manifest(dir, 1, 0.2, 21);
  const std::string cfg = write_tiny_config(dir);

  CHECK(run_cli({"--config", cfg, "featurize", "--manifest", manifest, "--out-dir",
                 dir.file("feat")}) == 0);
  CHECK(fs::exists(dir.file("feat/case0.nodes.txt")));
  CHECK(read_file(dir.file("feat/case0.graphs.txt")).find("graph rr") != std::string::npos);

  CHECK(run_cli({"--config", cfg, "--seed", "3", "noise", "--manifest", manifest, "--t", "0.5",
                 "--tau", "0.5", "--out-dir", dir.file("noise")}) == 0);
  CHECK(fs::exists(dir.file("noise/case0.noisy.pdb")));
  CHECK(read_file(dir.file("noise/case0.targets.txt")).find("global_tr_score") !=
        std::string::npos);
}

TEST_CASE("train-toy reduces the loss and sample emits ranked candidates") {
  TempDir dir;
  const std::string manifest = make_manifest(dir, 2, 0.18, 31);
  const std::string cfg = write_tiny_config(dir);
  const std::string ckpt = dir.file("model.ckpt");
  const std::string log = dir.file("loss.log");

  CHECK(run_cli({"--config", cfg, "--seed", "5", "train-toy", "--manifest", manifest,
                 "--checkpoint", ckpt, "--log", log, "--steps", "12"}) == 0);
  CHECK(fs::exists(ckpt));
  const std::string log_text = read_file(log);
  CHECK(log_text.find("step 0 ") != std::string::npos);
  CHECK(log_text.find("total") != std::string::npos);

  // checkpoint loads back
  auto [score, irmsd] = load_checkpoint(ckpt);
  CHECK(score.config.n_scalars == 4);

  // sampling twice with the same seed gives byte-identical candidate tables
  CHECK(run_cli({"--config", cfg, "--seed", "7", "--deterministic", "sample", "--manifest",
                 manifest, "--checkpoint", ckpt, "--out-dir", dir.file("s1")}) == 0);
  CHECK(run_cli({"--config", cfg, "--seed", "7", "--deterministic", "sample", "--manifest",
                 manifest, "--checkpoint", ckpt, "--out-dir", dir.file("s2")}) == 0);
  const std::string t1 = read_file(dir.file("s1/case0.candidates.txt"));
  const std::string t2 = read_file(dir.file("s2/case0.candidates.txt"));
  CHECK(t1 == t2);
  CHECK(t1.find("# rank candidate clddt") != std::string::npos);
  CHECK(fs::exists(dir.file("s1/case0.top1.pdb")));
  CHECK(fs::exists(dir.file("s1/case0.top1.trajectory.pdb")));

  // a different seed changes the outcome (stochastic init)
  CHECK(run_cli({"--config", cfg, "--seed", "8", "--deterministic", "sample", "--manifest",
                 manifest, "--checkpoint", ckpt, "--out-dir", dir.file("s3")}) == 0);
  CHECK(read_file(dir.file("s3/case0.candidates.txt")) != t1);
}

TEST_CASE("eval on pred = truth reports zero RMSD and unit clddt") {
  TempDir dir;
  const std::string manifest = make_manifest(dir, 2, 0.15, 41);
  const std::string cfg = write_tiny_config(dir);
  const std::string report = dir.file("report.txt");
  CHECK(run_cli({"--config", cfg, "eval", "--manifest", manifest, "--out", report}) == 0);
  const std::string text = read_file(report);
  CHECK(text.find("case0") != std::string::npos);
  CHECK(text.find("Mean+/-Std") != std::string::npos);
  CHECK(text.find("Median") != std::string::npos);
  CHECK(text.find("%(<10)") != std::string::npos);

  // per-case metric values are 0 0 1 for pred = truth
  std::istringstream iss(text);
  std::string line;
  bool found = false;
  while (std::getline(iss, line)) {
    if (line.rfind("case0 ", 0) == 0) {
      std::istringstream ls(line);
      std::string id, difficulty;
      double c, i, l;
      ls >> id >> difficulty >> c >> i >> l;
      CHECK(c == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(i == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(l == doctest::Approx(1.0).epsilon(1e-9));
      found = true;
    }
  }
  CHECK(found);
}
