#pragma once

#include <filesystem>

#include "fdd/types.hpp"

namespace fdd {

/// Columnwise sample mean plus unbiased (W-1) covariance, symmetrized by
/// averaging with its transpose. Requires at least two rows.
GaussianSummary gaussian_fit(const FeatureMatrix& m);

/// Principal square root of a symmetric PSD matrix via symmetric
/// eigendecomposition, with eigenvalues clamped at zero before the square
/// root. An eigenvalue below -1e-6 * lambda_max signals an invalid
/// covariance (not round-off) and is an error, as is asymmetry beyond
/// tolerance. The result S is symmetric PSD with ||S*S - c||_F <= 1e-8*||c||_F.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& c);

/// Fréchet distance between two Gaussians:
///   ||mu1 - mu2||^2 + Tr(C1) + Tr(C2) - 2*Tr((C2^{1/2} C1 C2^{1/2})^{1/2}).
/// The symmetrized inner form has the same trace as (C1*C2)^{1/2} and far
/// better numerical behavior. Tiny negative results from round-off (within
/// 1e-8*(Tr C1 + Tr C2 + 1)) clamp to zero; anything below that threshold is
/// a numerical failure and throws.
double frechet_distance(const GaussianSummary& g1, const GaussianSummary& g2);

/// The Fréchet Domain Distance: the Fréchet distance between Gaussian
/// summaries of the two datasets' descriptors under `config`. With positive
/// evidence, K and mean aggregation this is FDD_K. `ridge` optionally adds
/// a diagonal regularization term to both covariances (default 0; rank
/// deficiency is legal for the clamped square root, so the default never
/// changes the measure).
double fdd(const Dataset& d1, const Dataset& d2, const FeatureConfig& config,
           double ridge = 0.0);

/// Same distance computed straight from feature matrices. When ridge == 0
/// and J' exceeds both sample counts, the trace term is evaluated through
/// the W x W Gram form instead of the J' x J' covariances; the value is
/// algebraically identical and the J'^3 eigendecomposition is avoided.
double fdd_from_matrices(const FeatureMatrix& a, const FeatureMatrix& b,
                         double ridge = 0.0);

/// Binary sidecar (mean + covariance as little-endian binary64, row-major)
/// plus a JSON manifest carrying dimensions and the configuration. Returns
/// the manifest path; `base` names the sidecar files.
std::filesystem::path write_summary(const GaussianSummary& g,
                                    const std::filesystem::path& dir,
                                    const std::string& base);

GaussianSummary load_summary(const std::filesystem::path& manifest_path);

}  // namespace fdd
