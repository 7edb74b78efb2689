// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/so3_stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>

namespace hadiff {

namespace {

constexpr double kPi = 3.14159265358979323846;
// The truncated character sum loses the far tail to cancellation below this
// epsilon (and would need more than the term cap for very small epsilon); the
// exact theta dual converges in a handful of images there. Both branches
// agree to ~1e-10 around the crossover.
constexpr double kThetaBranchEps = 1.0;
constexpr int kSeriesCap = 2000;

struct FtildeEval {
  double value = 0.0;       // f_tilde(omega)
  double derivative = 0.0;  // d f_tilde / d omega
};

FtildeEval ftilde_series(double omega, double eps) {
  const double e2 = eps * eps;
  int min_terms = 12;
  if (eps < 0.1) min_terms = std::min(kSeriesCap, static_cast<int>(std::ceil(10.0 / eps)));

  const double s2 = std::sin(0.5 * omega);
  const double c2 = std::cos(0.5 * omega);
  const bool at_origin = std::abs(s2) < 1e-12;

  FtildeEval out;
  int small_streak = 0;
  for (int l = 0; l <= kSeriesCap; ++l) {
    const double coeff = (2.0 * l + 1.0) * std::exp(-l * (l + 1.0) * e2);
    const double lh = l + 0.5;
    double chi, dchi;
    if (at_origin) {
      chi = 2.0 * l + 1.0;  // sin(lh*w)/sin(w/2) -> 2l+1
      dchi = 0.0;           // chi is even in omega
    } else {
      const double sl = std::sin(lh * omega);
      const double cl = std::cos(lh * omega);
      chi = sl / s2;
      dchi = (lh * cl * s2 - 0.5 * c2 * sl) / (s2 * s2);
    }
    out.value += coeff * chi;
    out.derivative += coeff * dchi;

    // Envelope-based stop: |chi_l| <= 2l+1, so coeff*(2l+1) bounds the term.
    if (l >= min_terms) {
      const double envelope = coeff * (2.0 * l + 1.0);
      if (envelope < 1e-8 * std::max(std::abs(out.value), 1e-300)) {
        if (++small_streak >= 3) break;
      } else {
        small_streak = 0;
      }
    }
  }
  return out;
}

FtildeEval ftilde_theta(double omega, double eps) {
  // Exact Poisson-summation dual of the character sum:
  //   f_tilde = sqrt(pi) t^{-3/2} e^{t/4} / (2 sin(w/2))
  //             * sum_k (-1)^k (w + 2 pi k) exp(-(w + 2 pi k)^2 / (4t)),  t = eps^2
  const double t = eps * eps;
  const double w = std::max(omega, 1e-10);
  double s = 0.0, sp = 0.0;
  for (int k = -5; k <= 5; ++k) {
    const double wk = w + 2.0 * kPi * k;
    const double g = std::exp(-wk * wk / (4.0 * t));
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    s += sign * wk * g;
    sp += sign * g * (1.0 - wk * wk / (2.0 * t));
  }
  const double s2 = std::sin(0.5 * w);
  const double c2 = std::cos(0.5 * w);
  const double pref = std::sqrt(kPi) * std::pow(t, -1.5) * std::exp(t / 4.0);

  FtildeEval out;
  if (s <= 0.0) {
    // Far tail underflow: keep the k = 0 asymptote for the log-derivative.
    out.value = 0.0;
    out.derivative = -1.0;  // sign only; callers use value/derivative ratios guarded below
    return out;
  }
  out.value = pref * s / (2.0 * s2);
  out.derivative = out.value * (-0.5 * c2 / s2 + sp / s);
  return out;
}

FtildeEval ftilde(double omega, double eps) {
  return (eps < kThetaBranchEps) ? ftilde_theta(omega, eps) : ftilde_series(omega, eps);
}

void warn_clamped_eps(double eps, double lo, double hi) {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "igso3: epsilon " << eps << " outside table range [" << lo << ", " << hi
              << "]; clamping\n";
  }
}

constexpr char kMagic[8] = {'I', 'G', 'S', 'O', '3', 'v', '1', '\0'};

}  // namespace

double igso3_density(double omega, double eps) {
  if (omega < 0.0 || omega > kPi) throw ConfigError("igso3_density: omega outside [0, pi]");
  if (eps <= 0.0) throw ConfigError("igso3_density: epsilon must be positive");
  const double marginal = (1.0 - std::cos(omega)) / kPi;
  return marginal * ftilde(omega, eps).value;
}

double igso3_log_ftilde_derivative(double omega, double eps) {
  if (eps <= 0.0) throw ConfigError("igso3: epsilon must be positive");
  const FtildeEval f = ftilde(omega, eps);
  if (f.value <= 0.0) {
    // Deep tail: k = 0 Gaussian image dominates.
    const double t = eps * eps;
    const double w = std::max(omega, 1e-10);
    return -0.5 / std::tan(0.5 * w) + 1.0 / w - w / (2.0 * t);
  }
  return f.derivative / f.value;
}

Vec3 igso3_score(const Mat3& r_rel, double eps) {
  const Vec3 v = log_so3(r_rel);
  const double omega = v.norm();
  if (omega < 1e-12) return Vec3::Zero();
  return igso3_log_ftilde_derivative(omega, eps) * (v / omega);
}

Mat3 uniform_so3_sample(Rng& rng) {
  Eigen::Vector4d q;
  double n2 = 0.0;
  do {
    q << rng.normal(), rng.normal(), rng.normal(), rng.normal();
    n2 = q.squaredNorm();
  } while (n2 < 1e-24);
  q /= std::sqrt(n2);
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// ---------------------------------------------------------------------------
// AngleSampler
// ---------------------------------------------------------------------------

AngleSampler::AngleSampler(VecX omega_grid, VecX cdf, VecX score_mag)
    : omega_(std::move(omega_grid)), cdf_(std::move(cdf)), score_mag_(std::move(score_mag)) {}

double AngleSampler::sample(Rng& rng) const {
  const double u = rng.uniform();
  // cdf_ is nondecreasing with cdf_[0] = 0 and cdf_[last] = 1
  const double* begin = cdf_.data();
  const double* end = begin + cdf_.size();
  const double* it = std::lower_bound(begin, end, u);
  Eigen::Index idx = it - begin;
  if (idx <= 0) return omega_(0);
  if (idx >= cdf_.size()) return omega_(cdf_.size() - 1);
  const double c0 = cdf_(idx - 1), c1 = cdf_(idx);
  const double frac = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
  return omega_(idx - 1) + frac * (omega_(idx) - omega_(idx - 1));
}

double AngleSampler::score_magnitude(double omega) const {
  const double h = omega_(1) - omega_(0);
  double x = std::clamp(omega, omega_(0), omega_(omega_.size() - 1));
  Eigen::Index i = std::min<Eigen::Index>(static_cast<Eigen::Index>(x / h), omega_.size() - 2);
  const double frac = (x - omega_(i)) / h;
  return score_mag_(i) * (1.0 - frac) + score_mag_(i + 1) * frac;
}

// ---------------------------------------------------------------------------
// IGSO3Table
// ---------------------------------------------------------------------------

IGSO3Table IGSO3Table::build(const IGSO3Params& params) {
  if (params.n_eps < 2 || params.n_omega < 16 || params.eps_min <= 0.0 ||
      params.eps_max <= params.eps_min)
    throw ConfigError("IGSO3Table: bad grid parameters");

  IGSO3Table t;
  t.params_ = params;
  t.eps_grid_.resize(params.n_eps);
  const double log_lo = std::log(params.eps_min), log_hi = std::log(params.eps_max);
  for (int i = 0; i < params.n_eps; ++i)
    t.eps_grid_(i) = std::exp(log_lo + (log_hi - log_lo) * i / (params.n_eps - 1));

  t.omega_grid_.resize(params.n_omega);
  for (int j = 0; j < params.n_omega; ++j)
    t.omega_grid_(j) = kPi * j / (params.n_omega - 1);

  t.density_.resize(params.n_eps, params.n_omega);
  t.cdf_.resize(params.n_eps, params.n_omega);
  t.score_mag_.resize(params.n_eps, params.n_omega);
  t.expected_norms_.resize(params.n_eps);

  for (int i = 0; i < params.n_eps; ++i) {
    const double eps = t.eps_grid_(i);
    for (int j = 0; j < params.n_omega; ++j) {
      const double w = t.omega_grid_(j);
      const FtildeEval f = ftilde(w, eps);
      const double marginal = (1.0 - std::cos(w)) / kPi;
      t.density_(i, j) = std::max(marginal * f.value, 0.0);
      t.score_mag_(i, j) =
          (f.value > 0.0) ? std::abs(f.derivative / f.value)
                          : std::abs(igso3_log_ftilde_derivative(std::max(w, 1e-6), eps));
    }
    // Trapezoid cumulative, normalized so the row ends exactly at 1.
    double acc = 0.0;
    t.cdf_(i, 0) = 0.0;
    const double h = t.omega_grid_(1) - t.omega_grid_(0);
    for (int j = 1; j < params.n_omega; ++j) {
      acc += 0.5 * h * (t.density_(i, j - 1) + t.density_(i, j));
      t.cdf_(i, j) = acc;
    }
    if (acc > 0.0) t.cdf_.row(i) /= acc;
  }

  // Monte-Carlo expected score magnitude per epsilon row (fixed seed so that
  // table bytes are reproducible).
  constexpr int kMcSamples = 100000;
  for (int i = 0; i < params.n_eps; ++i) {
    AngleSampler row(t.omega_grid_, t.cdf_.row(i), t.score_mag_.row(i));
    Rng rng(0xC0FFEE00ULL + static_cast<std::uint64_t>(i));
    double acc = 0.0;
    for (int k = 0; k < kMcSamples; ++k) acc += row.score_magnitude(row.sample(rng));
    t.expected_norms_(i) = acc / kMcSamples;
  }
  return t;
}

void IGSO3Table::interpolation_weights(double eps, int& lo, int& hi, double& w) const {
  double e = eps;
  if (e < eps_grid_(0) || e > eps_grid_(eps_grid_.size() - 1)) {
    warn_clamped_eps(e, eps_grid_(0), eps_grid_(eps_grid_.size() - 1));
    e = std::clamp(e, eps_grid_(0), eps_grid_(eps_grid_.size() - 1));
  }
  const double log_lo = std::log(params_.eps_min), log_hi = std::log(params_.eps_max);
  const double pos = (std::log(e) - log_lo) / (log_hi - log_lo) * (params_.n_eps - 1);
  lo = std::clamp(static_cast<int>(std::floor(pos)), 0, params_.n_eps - 2);
  hi = lo + 1;
  w = std::clamp(pos - lo, 0.0, 1.0);
}

AngleSampler IGSO3Table::sampler_for(double eps) const {
  int lo, hi;
  double w;
  interpolation_weights(eps, lo, hi, w);
  VecX dens = (1.0 - w) * density_.row(lo).transpose() + w * density_.row(hi).transpose();
  VecX smag = (1.0 - w) * score_mag_.row(lo).transpose() + w * score_mag_.row(hi).transpose();
  VecX cdf(dens.size());
  cdf(0) = 0.0;
  double acc = 0.0;
  const double h = omega_grid_(1) - omega_grid_(0);
  for (Eigen::Index j = 1; j < dens.size(); ++j) {
    acc += 0.5 * h * (dens(j - 1) + dens(j));
    cdf(j) = acc;
  }
  if (acc > 0.0) cdf /= acc;
  return AngleSampler(omega_grid_, std::move(cdf), std::move(smag));
}

Mat3 IGSO3Table::sample(const Mat3& mean, double eps, Rng& rng) const {
  AngleSampler row = sampler_for(eps);
  const double omega = row.sample(rng);
  const Vec3 axis = rng.unit_vector();
  return mean * exp_so3(omega * axis);
}

double IGSO3Table::expected_score_norm(double eps) const {
  int lo, hi;
  double w;
  interpolation_weights(eps, lo, hi, w);
  return (1.0 - w) * expected_norms_(lo) + w * expected_norms_(hi);
}

double IGSO3Table::mc_expected_score_norm(double eps, int n_samples, std::uint64_t seed) const {
  AngleSampler row = sampler_for(eps);
  Rng rng(seed);
  double acc = 0.0;
  for (int k = 0; k < n_samples; ++k) acc += row.score_magnitude(row.sample(rng));
  return acc / n_samples;
}

void IGSO3Table::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw ParseError("IGSO3Table::save: cannot open " + tmp);
    f.write(kMagic, 8);
    auto put_u64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_f64 = [&](double v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    put_u64(params_.n_eps);
    put_u64(params_.n_omega);
    put_f64(params_.eps_min);
    put_f64(params_.eps_max);
    auto put_block = [&](const double* p, std::size_t n) {
      f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
    };
    put_block(eps_grid_.data(), eps_grid_.size());
    put_block(omega_grid_.data(), omega_grid_.size());
    put_block(density_.data(), density_.size());
    put_block(cdf_.data(), cdf_.size());
    put_block(score_mag_.data(), score_mag_.size());
    put_block(expected_norms_.data(), expected_norms_.size());
    if (!f) throw ParseError("IGSO3Table::save: write failed for " + tmp);
  }
  std::rename(tmp.c_str(), path.c_str());
}

std::optional<IGSO3Table> IGSO3Table::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
  std::uint64_t n_eps = 0, n_omega = 0;
  double eps_min = 0, eps_max = 0;
  f.read(reinterpret_cast<char*>(&n_eps), 8);
  f.read(reinterpret_cast<char*>(&n_omega), 8);
  f.read(reinterpret_cast<char*>(&eps_min), 8);
  f.read(reinterpret_cast<char*>(&eps_max), 8);
  if (!f || n_eps < 2 || n_omega < 16 || n_eps > (1u << 20) || n_omega > (1u << 24))
    return std::nullopt;

  IGSO3Table t;
  t.params_ = IGSO3Params{static_cast<int>(n_eps), static_cast<int>(n_omega), eps_min, eps_max};
  auto get_block = [&](double* p, std::size_t n) {
    f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
  };
  t.eps_grid_.resize(n_eps);
  t.omega_grid_.resize(n_omega);
  t.density_.resize(n_eps, n_omega);
  t.cdf_.resize(n_eps, n_omega);
  t.score_mag_.resize(n_eps, n_omega);
  t.expected_norms_.resize(n_eps);
  get_block(t.eps_grid_.data(), t.eps_grid_.size());
  get_block(t.omega_grid_.data(), t.omega_grid_.size());
  get_block(t.density_.data(), t.density_.size());
  get_block(t.cdf_.data(), t.cdf_.size());
  get_block(t.score_mag_.data(), t.score_mag_.size());
  get_block(t.expected_norms_.data(), t.expected_norms_.size());
  if (!f) return std::nullopt;
  return t;
}

IGSO3Table IGSO3Table::build_or_load(const std::string& path, const IGSO3Params& params) {
  if (auto loaded = load(path); loaded && loaded->params_ == params) return std::move(*loaded);
  IGSO3Table t = build(params);
  try {
    t.save(path);
  } catch (const std::exception&) {
    // cache write is best effort
  }
  return t;
}

}  // namespace hadiff
