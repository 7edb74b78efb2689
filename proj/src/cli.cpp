// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "hadiff/checkpoint.hpp"
#include "hadiff/config.hpp"
#include "hadiff/manifest.hpp"
#include "hadiff/metrics.hpp"
#include "hadiff/pdb_io.hpp"
#include "hadiff/sampler.hpp"
#include "hadiff/train.hpp"

namespace hadiff {

namespace {

namespace fs = std::filesystem;

std::shared_ptr<const IGSO3Table> acquire_table(const RunConfig& config) {
  return std::make_shared<IGSO3Table>(IGSO3Table::build_or_load(config.table_path));
}

void write_loss_line(std::ostream& os, int step, const LossBreakdown& b) {
  os << "step " << step << " l_tr " << b.global_tr << " l_rot " << b.global_rot
     << " l_res_tr_rec " << b.res_tr_receptor << " l_res_rot_rec " << b.res_rot_receptor
     << " l_res_tr_lig " << b.res_tr_ligand << " l_res_rot_lig " << b.res_rot_ligand
     << " l_ifape " << b.ifape << " l_clddt " << b.clddt << " total " << b.total << "\n";
}

int cmd_tables(const RunConfig& config, const std::string& out_path) {
  const std::string path = out_path.empty() ? config.table_path : out_path;
  IGSO3Table table = IGSO3Table::build();
  table.save(path);
  std::cout << "wrote IGSO(3) table (" << table.params().n_eps << " x "
            << table.params().n_omega << ") to " << path << "\n";
  return 0;
}

int cmd_nma(const RunConfig& config, const std::string& pdb_path, const std::string& msf_path,
            const std::string& corr_path) {
  const ChainState chain = load_chain(pdb_path);
  const auto coords = chain.positions();
  const MatX hessian = build_anm_hessian(coords, config.nma_cutoff);
  const NormalModes modes = compute_modes(hessian, config.nma_modes);
  const VecX fluct = msf(modes);
  const MatX corr = cross_correlation(modes);

  std::ostream* out = &std::cout;
  std::ofstream msf_file;
  if (!msf_path.empty()) {
    msf_file.open(msf_path);
    if (!msf_file) throw ParseError("nma: cannot open " + msf_path);
    out = &msf_file;
  }
  *out << "# residue_index msf\n";
  for (std::size_t i = 0; i < chain.size(); ++i)
    *out << chain.residue_ids[i] << " " << fluct(static_cast<Eigen::Index>(i)) << "\n";

  if (!corr_path.empty()) {
    std::ofstream cf(corr_path);
    if (!cf) throw ParseError("nma: cannot open " + corr_path);
    cf << "# cross-correlation matrix " << corr.rows() << " x " << corr.cols() << "\n";
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
      for (Eigen::Index j = 0; j < corr.cols(); ++j)
        cf << corr(i, j) << (j + 1 < corr.cols() ? ' ' : '\n');
    }
  }
  return 0;
}

void dump_graph(std::ostream& os, const char* name, const ResidueGraph& g) {
  os << "graph " << name << " cutoff " << g.cutoff << " nodes " << g.nodes.size() << " edges "
     << g.edge_count() << "\n";
  for (int k = 0; k < g.edge_count(); ++k)
    os << name << " " << g.edges[k].first << " " << g.edges[k].second << " "
       << g.edge_lengths(k) << "\n";
}

int cmd_featurize(const RunConfig& config, const std::string& manifest_path,
                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& entry : load_manifest(manifest_path)) {
    const LoadedCase lc = load_case(entry, config);
    const std::string base = out_dir + "/" + lc.case_id;

    std::ofstream nodes(base + ".nodes.txt");
    nodes << "# chain residue aa msf\n";
    for (std::size_t i = 0; i < lc.unbound.receptor.size(); ++i)
      nodes << "R " << lc.unbound.receptor.residue_ids[i] << " "
            << aa_code_from_type(lc.unbound.receptor.aa_types[i]) << " "
            << lc.features.receptor.msf_normalized(static_cast<Eigen::Index>(i)) << "\n";
    for (std::size_t i = 0; i < lc.unbound.ligand.size(); ++i)
      nodes << "L " << lc.unbound.ligand.residue_ids[i] << " "
            << aa_code_from_type(lc.unbound.ligand.aa_types[i]) << " "
            << lc.features.ligand.msf_normalized(static_cast<Eigen::Index>(i)) << "\n";

    const double sig_tr = config.schedule.sigma_tr_max;
    const GraphSet graphs = build_graphs(lc.unbound_superposed, sig_tr);
    std::ofstream edges(base + ".graphs.txt");
    dump_graph(edges, "rr", graphs.rr);
    dump_graph(edges, "ll", graphs.ll);
    dump_graph(edges, "rl", graphs.rl);
    dump_graph(edges, "lr", graphs.lr);
    std::cout << lc.case_id << ": wrote " << base << ".nodes.txt and .graphs.txt\n";
  }
  return 0;
}

int cmd_noise(const RunConfig& config, const std::string& manifest_path, double t, double tau,
              const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto table = acquire_table(config);
  Rng rng = Rng::seeded(config.seed);
  for (const auto& entry : load_manifest(manifest_path)) {
    const LoadedCase lc = load_case(entry, config);
    const double beta =
        beta_from_irmsd(lc.irmsd_override.value_or(lc.true_irmsd), config.schedule);
    const NoisedSample sample = forward_noise(lc.bound, lc.unbound_superposed, t, tau, beta,
                                              config.schedule, *table, rng);
    const std::string base = out_dir + "/" + lc.case_id;
    write_pdb(base + ".noisy.pdb", sample.noisy_state);
    std::ofstream targets(base + ".targets.txt");
    targets << "t " << t << " tau " << tau << " beta " << beta << "\n";
    targets << "global_tr_score " << sample.targets.global_tr_score.transpose() << "\n";
    targets << "global_rot_score " << sample.targets.global_rot_score.transpose() << "\n";
    targets << "mean_receptor_residual "
            << sample.targets.receptor_tr_residual.rowwise().norm().mean() << "\n";
    targets << "mean_ligand_residual "
            << sample.targets.ligand_tr_residual.rowwise().norm().mean() << "\n";
    std::cout << lc.case_id << ": wrote " << base << ".noisy.pdb\n";
  }
  return 0;
}

int cmd_train_toy(const RunConfig& config, const std::string& manifest_path,
                  const std::string& checkpoint_path, const std::string& log_path) {
  auto table = acquire_table(config);
  std::vector<LoadedCase> cases;
  for (const auto& entry : load_manifest(manifest_path)) cases.push_back(load_case(entry, config));

  Rng init_rng = Rng::seeded(config.seed);
  ScoreModel model(ModelParams::init(config.model, init_rng), table);
  IrmsdPredictor irmsd_model(IrmsdPredictor::init(config.model, init_rng));

  TrainOptions options;
  options.steps = config.train_steps;
  options.learning_rate = config.learning_rate;
  options.irmsd_learning_rate = config.irmsd_learning_rate;
  options.seed = config.seed;
  options.weights = config.weights;
  options.schedule = config.schedule;
  options.log_every = config.log_every;

  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw ParseError("train-toy: cannot open " + log_path);
  }
  const TrainLogger logger = [&](int step, const LossBreakdown& b) {
    write_loss_line(std::cout, step, b);
    if (log_file.is_open()) write_loss_line(log_file, step, b);
  };

  const TrainResult result = train_toy(model, irmsd_model, cases, options, logger);
  std::cout << "initial total " << result.initial_total << " final total " << result.final_total
            << "\n";
  if (!checkpoint_path.empty()) {
    save_checkpoint(checkpoint_path, model.params(), irmsd_model.params());
    std::cout << "wrote checkpoint " << checkpoint_path << "\n";
  }
  return 0;
}

int cmd_sample(const RunConfig& config, const std::string& manifest_path,
               const std::string& checkpoint_path, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto table = acquire_table(config);
  auto [score_params, irmsd_params] = load_checkpoint(checkpoint_path);
  const ScoreModel model(std::move(score_params), table);
  const IrmsdPredictor irmsd_model(std::move(irmsd_params));

  SamplerConfig sampler_config;
  sampler_config.n_steps = config.sampler_steps;
  sampler_config.stochastic = config.sampler_stochastic;
  sampler_config.n_candidates = config.sampler_candidates;
  sampler_config.seed = config.seed;
  sampler_config.schedule = config.schedule;

  for (const auto& entry : load_manifest(manifest_path)) {
    const LoadedCase lc = load_case(entry, config);
    SamplerConfig cfg = sampler_config;
    cfg.irmsd_override = lc.irmsd_override;
    const SamplerOutput out =
        run_sampler(lc.unbound, lc.features, model, &irmsd_model, cfg, config.threads);

    const std::string base = out_dir + "/" + lc.case_id;
    std::ofstream tablef(base + ".candidates.txt");
    tablef << "# rank candidate clddt clddt_valid lig_com_x lig_com_y lig_com_z\n";
    for (std::size_t r = 0; r < out.ranking.size(); ++r) {
      const int i = out.ranking[r];
      const auto& cand = out.candidates[i];
      const Vec3 com = cand.final_state.ligand.centroid();
      tablef << r + 1 << " " << i << " " << cand.clddt << " " << (cand.clddt_valid ? 1 : 0)
             << " " << com.x() << " " << com.y() << " " << com.z() << "\n";
    }
    for (std::size_t i = 0; i < out.candidates.size(); ++i)
      write_pdb(base + ".cand" + std::to_string(i) + ".pdb", out.candidates[i].final_state);
    const int best = out.ranking.front();
    write_pdb(base + ".top1.pdb", out.candidates[best].final_state);
    write_pdb_trajectory(base + ".top1.trajectory.pdb", out.candidates[best].trajectory.states);
    std::cout << lc.case_id << ": beta " << out.beta << " predicted_irmsd "
              << out.predicted_irmsd << " top1 candidate " << best << " clddt "
              << out.candidates[best].clddt << "\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& config, const std::string& manifest_path,
             const std::string& pred_dir, const std::string& out_path) {
  std::vector<CaseMetrics> rows;
  for (const auto& entry : load_manifest(manifest_path)) {
    const LoadedCase lc = load_case(entry, config);
    ComplexState pred = lc.bound;
    if (!pred_dir.empty()) {
      const std::string pred_path = pred_dir + "/" + lc.case_id + ".pdb";
      pred = load_bound_complex(pred_path, lc.bound.receptor.chain_id, lc.bound.ligand.chain_id);
    }
    CaseMetrics m;
    m.case_id = lc.case_id;
    m.crmsd = crmsd(pred, lc.bound);
    m.irmsd = irmsd(pred, lc.bound);
    m.clddt = clddt(pred, lc.bound, &m.clddt_defined);
    m.difficulty = classify_difficulty(lc.unbound, lc.bound);
    rows.push_back(std::move(m));
  }

  std::ostream* os = &std::cout;
  std::ofstream out_file;
  if (!out_path.empty()) {
    out_file.open(out_path);
    if (!out_file) throw ParseError("eval: cannot open " + out_path);
    os = &out_file;
  }
  *os << "# case difficulty crmsd irmsd clddt\n";
  std::vector<double> crmsds, irmsds;
  for (const auto& m : rows) {
    *os << m.case_id << " " << to_string(m.difficulty) << " " << m.crmsd << " " << m.irmsd << " "
        << m.clddt << "\n";
    crmsds.push_back(m.crmsd);
    irmsds.push_back(m.irmsd);
  }
  const SummaryStats cs = summarize(crmsds);
  const SummaryStats is = summarize(irmsds);
  auto print_summary = [&](const char* name, const SummaryStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s  Mean+/-Std %.2f+/-%.2f  Median %.2f  %%(<10) %.0f\n",
                  name, s.mean, s.stddev, s.median, s.fraction_below_10);
    *os << buf;
  };
  print_summary("Complex RMSD (A)  ", cs);
  print_summary("Interface RMSD (A)", is);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"hierarchical adaptive diffusion docking"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  bool deterministic = false;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_flag("--deterministic", deterministic, "single-threaded fixed-order mode");

  // tables
  auto* tables = app.add_subcommand("tables", "precompute the IGSO(3) table");
  std::string tables_out;
  tables->add_option("--out", tables_out, "output file");

  // nma
  auto* nma_cmd = app.add_subcommand("nma", "per-chain normal mode features");
  std::string nma_pdb, nma_msf, nma_corr;
  nma_cmd->add_option("--pdb", nma_pdb, "chain PDB file")->required();
  nma_cmd->add_option("--out-msf", nma_msf, "MSF table output");
  nma_cmd->add_option("--out-corr", nma_corr, "correlation matrix output");

  // featurize
  auto* feat = app.add_subcommand("featurize", "dump graphs and node features");
  std::string feat_manifest, feat_out;
  feat->add_option("--manifest", feat_manifest, "case manifest")->required();
  feat->add_option("--out-dir", feat_out, "output directory")->required();

  // noise
  auto* noise = app.add_subcommand("noise", "forward-diffusion visualization dump");
  std::string noise_manifest, noise_out;
  double noise_t = 0.5, noise_tau = 0.5;
  noise->add_option("--manifest", noise_manifest, "case manifest")->required();
  noise->add_option("--t", noise_t, "global diffusion time");
  noise->add_option("--tau", noise_tau, "local diffusion time");
  noise->add_option("--out-dir", noise_out, "output directory")->required();

  // train-toy
  auto* train = app.add_subcommand("train-toy", "overfit a small manifest");
  std::string train_manifest, train_ckpt, train_log;
  int train_steps_flag = -1;
  train->add_option("--manifest", train_manifest, "case manifest")->required();
  train->add_option("--checkpoint", train_ckpt, "checkpoint output path");
  train->add_option("--log", train_log, "loss log path");
  train->add_option("--steps", train_steps_flag, "training steps (overrides config)");

  // sample
  auto* sample = app.add_subcommand("sample", "reverse-diffusion generation");
  std::string sample_manifest, sample_ckpt, sample_out;
  int sample_candidates_flag = -1;
  sample->add_option("--manifest", sample_manifest, "case manifest")->required();
  sample->add_option("--checkpoint", sample_ckpt, "model checkpoint")->required();
  sample->add_option("--out-dir", sample_out, "output directory")->required();
  sample->add_option("--candidates", sample_candidates_flag, "candidate count (overrides config)");

  // eval
  auto* eval = app.add_subcommand("eval", "metrics tables");
  std::string eval_manifest, eval_pred, eval_out;
  eval->add_option("--manifest", eval_manifest, "case manifest")->required();
  eval->add_option("--pred-dir", eval_pred, "directory of <case_id>.pdb predictions");
  eval->add_option("--out", eval_out, "write the report to a file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = parse_config_file(config_path);
    config.seed = seed;
    config.threads = deterministic ? 1 : threads;
    config.deterministic = deterministic;
    if (train_steps_flag > 0) config.train_steps = train_steps_flag;
    if (sample_candidates_flag > 0) config.sampler_candidates = sample_candidates_flag;
    config.validate();

    if (tables->parsed()) return cmd_tables(config, tables_out);
    if (nma_cmd->parsed()) return cmd_nma(config, nma_pdb, nma_msf, nma_corr);
    if (feat->parsed()) return cmd_featurize(config, feat_manifest, feat_out);
    if (noise->parsed()) return cmd_noise(config, noise_manifest, noise_t, noise_tau, noise_out);
    if (train->parsed()) return cmd_train_toy(config, train_manifest, train_ckpt, train_log);
    if (sample->parsed()) return cmd_sample(config, sample_manifest, sample_ckpt, sample_out);
    if (eval->parsed()) return cmd_eval(config, eval_manifest, eval_pred, eval_out);
    std::cerr << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hadiff
