// Independent reference implementations used only by tests. These must stay
// decoupled from the library paths they check: the covariance oracle is a
// plain two-pass loop, the eigendecomposition oracle is a hand-rolled cyclic
// Jacobi (no Eigen solver), and the metric oracles are direct enumerations.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fdd/perf_eval.hpp"
#include "fdd/rng.hpp"

namespace oracle {

/// Two-pass columnwise mean.
inline Eigen::VectorXd mean_bruteforce(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    double sum = 0.0;
    for (Eigen::Index r = 0; r < rows.rows(); ++r) sum += rows(r, c);
    mean[c] = sum / static_cast<double>(rows.rows());
  }
  return mean;
}

/// Unbiased covariance via explicit loops.
inline Eigen::MatrixXd covariance_bruteforce(const Eigen::MatrixXd& rows) {
  const Eigen::VectorXd mean = mean_bruteforce(rows);
  const auto w = rows.rows();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
  for (Eigen::Index a = 0; a < rows.cols(); ++a)
    for (Eigen::Index b = 0; b < rows.cols(); ++b) {
      double sum = 0.0;
      for (Eigen::Index r = 0; r < w; ++r)
        sum += (rows(r, a) - mean[a]) * (rows(r, b) - mean[b]);
      cov(a, b) = sum / static_cast<double>(w - 1);
    }
  return cov;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns true on
/// convergence; eigenvectors are the columns of `vectors`.
inline bool jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values,
                         Eigen::MatrixXd& vectors) {
  const Eigen::Index n = a.rows();
  vectors = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * scale * scale) {
      values = a.diagonal();
      return true;
    }
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double app = a(p, p);
        const double aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = a(p, i) = aip - s * (aiq + tau * aip);
          a(i, q) = a(q, i) = aiq + s * (aip - tau * aiq);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vip = vectors(i, p);
          const double viq = vectors(i, q);
          vectors(i, p) = vip - s * (viq + tau * vip);
          vectors(i, q) = viq + s * (vip - tau * viq);
        }
      }
    }
  }
  values = a.diagonal();
  return false;
}

/// PSD square root through the Jacobi oracle.
inline Eigen::MatrixXd sqrtm_jacobi(const Eigen::MatrixXd& c) {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  jacobi_eigen(c, values, vectors);
  const Eigen::VectorXd roots = values.cwiseMax(0.0).cwiseSqrt();
  return vectors * roots.asDiagonal() * vectors.transpose();
}

/// ROC-AUC by enumerating every (positive, negative) pair.
inline double auc_pairwise(const std::vector<int>& labels,
                           const std::vector<double>& scores) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

inline double mcc_at(const std::vector<int>& labels,
                     const std::vector<double>& scores, double threshold) {
  fdd::ConfusionCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1)
      (predicted ? counts.tp : counts.fn) += 1;
    else
      (predicted ? counts.fp : counts.tn) += 1;
  }
  return fdd::mcc(counts);
}

/// Exhaustive candidate scan: every midpoint plus both sentinels, each MCC
/// recomputed from scratch; smallest threshold among the maximizers.
inline double threshold_exhaustive(const std::vector<int>& labels,
                                   const std::vector<double>& scores) {
  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> candidates;
  candidates.push_back(distinct.front() - 1.0);
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  candidates.push_back(distinct.back() + 1.0);

  double best_threshold = candidates.front();
  double best = mcc_at(labels, scores, best_threshold);
  for (const double t : candidates) {
    const double value = mcc_at(labels, scores, t);
    if (value > best || (value == best && t < best_threshold)) {
      best = value;
      best_threshold = t;
    }
  }
  return best_threshold;
}

inline double pearson_direct(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
  const auto n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// --- random inputs -------------------------------------------------------

inline Eigen::MatrixXd random_matrix(fdd::rng::SplitMix64& gen, Eigen::Index rows,
                                     Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = gen.next_gaussian();
  return m;
}

/// PSD matrix B^T B; rank <= factor_rows.
inline Eigen::MatrixXd random_psd(fdd::rng::SplitMix64& gen, Eigen::Index dim,
                                  Eigen::Index factor_rows) {
  const Eigen::MatrixXd b = random_matrix(gen, factor_rows, dim);
  Eigen::MatrixXd psd = b.transpose() * b;
  return 0.5 * (psd + psd.transpose());
}

/// Random orthogonal matrix from the QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(fdd::rng::SplitMix64& gen, Eigen::Index dim) {
  const Eigen::MatrixXd m = random_matrix(gen, dim, dim);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ();
}

}  // namespace oracle
