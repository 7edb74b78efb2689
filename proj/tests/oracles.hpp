// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "hadiff/types.hpp"

// Independent reference implementations used as test oracles. These must not
// call the library paths they check.

namespace hadiff::testoracle {

/// Rotation matrix from a unit quaternion (w, x, y, z).
inline Mat3 quat_to_matrix(const Eigen::Vector4d& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Axis-angle via quaternion extraction (independent of the matrix log).
inline Vec3 log_via_quaternion(const Mat3& r) {
  // Shepperd's method for the quaternion.
  const double t = r.trace();
  Eigen::Vector4d q;
  if (t > 0) {
    double s = std::sqrt(t + 1.0) * 2;
    q << 0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2;
    q << (r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2;
    q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s, (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2;
    q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, 0.25 * s;
  }
  if (q(0) < 0) q = -q;  // principal branch
  const double sin_half = q.tail<3>().norm();
  const double angle = 2.0 * std::atan2(sin_half, q(0));
  if (sin_half < 1e-12) return Vec3::Zero();
  return angle * (q.tail<3>() / sin_half);
}

/// Explicit Wigner rotation of the real spherical-harmonic components used by
/// the library (degree 0, 1, 2 in its normalization conventions).
inline MatX wigner_d(const Mat3& rot, int degree) {
  if (degree == 0) return MatX::Constant(1, 1, 1.0);
  if (degree == 1) return rot;
  if (degree != 2) throw std::invalid_argument("wigner_d: degree must be 0, 1 or 2");
  const double s3 = std::sqrt(3.0);
  auto to_components = [&](const Mat3& m) {
    Eigen::Matrix<double, 5, 1> c;
    c << s3 * m(0, 1), s3 * m(1, 2), 1.5 * m(2, 2), s3 * m(2, 0),
        0.5 * s3 * (m(0, 0) - m(1, 1));
    return c;
  };
  auto from_components = [&](const Eigen::Matrix<double, 5, 1>& c) {
    Mat3 m;
    const double m_xy = c(0) / s3, m_yz = c(1) / s3, m_zz = c(2) * 2.0 / 3.0, m_zx = c(3) / s3;
    const double diff = 2.0 * c(4) / s3;  // m_xx - m_yy
    const double m_xx = 0.5 * (diff - m_zz);
    const double m_yy = 0.5 * (-diff - m_zz);
    m << m_xx, m_xy, m_zx, m_xy, m_yy, m_yz, m_zx, m_yz, m_zz;
    return m;
  };
  MatX d(5, 5);
  for (int k = 0; k < 5; ++k) {
    Eigen::Matrix<double, 5, 1> e = Eigen::Matrix<double, 5, 1>::Zero();
    e(k) = 1.0;
    const Mat3 basis = from_components(e);
    d.col(k) = to_components(rot * basis * rot.transpose());
  }
  return d;
}

/// Kolmogorov-Smirnov statistic of samples against an analytic CDF.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return ks;
}

/// Composite Simpson quadrature on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
  return acc * h / 3.0;
}

/// Independent O(n^2) radius-edge enumeration (strict cutoff, both ways).
inline std::vector<std::pair<int, int>> brute_force_radius_edges(
    const std::vector<Vec3>& points, double cutoff) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < static_cast<int>(points.size()); ++i)
    for (int j = 0; j < static_cast<int>(points.size()); ++j)
      if (i != j && (points[i] - points[j]).norm() < cutoff) edges.emplace_back(i, j);
  return edges;
}

/// Central finite difference of a scalar function.
inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace hadiff::testoracle
