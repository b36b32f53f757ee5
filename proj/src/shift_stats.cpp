#include "fdd/shift_stats.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "fdd/error.hpp"
#include "fdd/evidence.hpp"
#include "fdd/numeric.hpp"

namespace fdd {

namespace {

// Negative fitted values this close to zero (relative to the trace scale)
// are treated as round-off and clamped.
constexpr double kClampRelative = 1e-8;

double clamp_distance(double value, double trace_scale) {
  if (value >= 0.0) return value;
  const double guard = kClampRelative * (trace_scale + 1.0);
  if (value >= -guard) return 0.0;
  throw Error("frechet_distance: numerical failure, value " +
              std::to_string(value) + " below clamp threshold " +
              std::to_string(-guard));
}

Eigen::VectorXd column_means(const Eigen::MatrixXd& rows) {
  const auto w = rows.rows();
  Eigen::VectorXd mean(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const Eigen::VectorXd column = rows.col(c);
    mean[c] = pairwise_sum(std::span<const double>(
                  column.data(), static_cast<std::size_t>(w))) /
              static_cast<double>(w);
  }
  return mean;
}

double frobenius_squared(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  const Eigen::VectorXd sq = flat.array().square();
  return pairwise_sum(std::span<const double>(sq.data(),
                                              static_cast<std::size_t>(sq.size())));
}

/// Rank-deficient route: with Ci = Fi^T Fi the nonzero eigenvalues of C1*C2
/// equal the squared singular values of F2*F1^T, so the cross trace is the
/// nuclear norm of a W2 x W1 matrix. Exact, not an approximation.
double frechet_from_factors(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& f1,
                            const Eigen::VectorXd& mean2, const Eigen::MatrixXd& f2) {
  const double tr1 = frobenius_squared(f1);
  const double tr2 = frobenius_squared(f2);
  const Eigen::MatrixXd cross = f2 * f1.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
  const Eigen::VectorXd sigma = svd.singularValues();
  const double cross_trace = pairwise_sum(std::span<const double>(
      sigma.data(), static_cast<std::size_t>(sigma.size())));
  const double value = squared_distance_pairwise(mean1, mean2) + tr1 + tr2 -
                       2.0 * cross_trace;
  return clamp_distance(value, tr1 + tr2);
}

}  // namespace

GaussianSummary gaussian_fit(const FeatureMatrix& m) {
  const auto w = m.rows.rows();
  if (w < 2)
    throw Error("gaussian_fit: dataset '" + m.dataset_id + "' has " +
                std::to_string(w) + " row(s); need >= 2 slides");
  if (!m.rows.allFinite())
    throw Error("gaussian_fit: non-finite value in feature matrix of dataset '" +
                m.dataset_id + "'");
  GaussianSummary g;
  g.dataset_id = m.dataset_id;
  g.model_id = m.model_id;
  g.config = m.config;
  g.sample_count = w;
  g.mean = column_means(m.rows);
  const Eigen::MatrixXd centered = m.rows.rowwise() - g.mean.transpose();
  Eigen::MatrixXd cov =
      (centered.adjoint() * centered) / static_cast<double>(w - 1);
  g.covariance = 0.5 * (cov + cov.transpose());
  return g;
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& c) {
  if (c.rows() != c.cols())
    throw Error("sqrtm_psd: matrix is not square");
  if (!c.allFinite()) throw Error("sqrtm_psd: non-finite entry");
  const double scale = c.size() > 0 ? c.cwiseAbs().maxCoeff() : 0.0;
  const double asymmetry = (c - c.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > 1e-8 * std::max(1.0, scale))
    throw Error("sqrtm_psd: asymmetry " + std::to_string(asymmetry) +
                " beyond tolerance");
  const Eigen::MatrixXd sym = 0.5 * (c + c.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error("sqrtm_psd: eigendecomposition failed");
  const Eigen::VectorXd& eigenvalues = solver.eigenvalues();
  const double lambda_max = std::max(eigenvalues.maxCoeff(), 0.0);
  const double lambda_min = eigenvalues.minCoeff();
  // The absolute floor keeps near-zero matrices from tripping the relative
  // test on harmless round-off.
  if (lambda_min < -1e-6 * lambda_max &&
      lambda_min < -1e-12 * std::max(1.0, scale))
    throw Error("sqrtm_psd: eigenvalue " + std::to_string(lambda_min) +
                " below -1e-6 * lambda_max; input is not a valid covariance");
  const Eigen::VectorXd roots = eigenvalues.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd s =
      solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

double frechet_distance(const GaussianSummary& g1, const GaussianSummary& g2) {
  if (g1.mean.size() != g2.mean.size())
    throw Error("frechet_distance: dimension mismatch (" +
                std::to_string(g1.mean.size()) + " vs " +
                std::to_string(g2.mean.size()) + ")");
  const Eigen::MatrixXd root2 = sqrtm_psd(g2.covariance);
  Eigen::MatrixXd inner = root2 * g1.covariance * root2;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::MatrixXd cross_root = sqrtm_psd(inner);

  const double tr1 = trace_pairwise(g1.covariance);
  const double tr2 = trace_pairwise(g2.covariance);
  const double value = squared_distance_pairwise(g1.mean, g2.mean) + tr1 + tr2 -
                       2.0 * trace_pairwise(cross_root);
  return clamp_distance(value, tr1 + tr2);
}

double fdd_from_matrices(const FeatureMatrix& a, const FeatureMatrix& b,
                         double ridge) {
  if (a.rows.cols() != b.rows.cols())
    throw Error("fdd: descriptor dimension mismatch (" +
                std::to_string(a.rows.cols()) + " vs " +
                std::to_string(b.rows.cols()) + ")");
  if (ridge < 0.0) throw Error("fdd: ridge must be >= 0");
  const auto jp = a.rows.cols();
  const auto wa = a.rows.rows();
  const auto wb = b.rows.rows();
  if (wa < 2 || wb < 2)
    throw Error("fdd: need >= 2 slides per dataset");

  if (ridge == 0.0 && jp > std::max(wa, wb)) {
    const Eigen::VectorXd mean_a = column_means(a.rows);
    const Eigen::VectorXd mean_b = column_means(b.rows);
    const Eigen::MatrixXd fa = (a.rows.rowwise() - mean_a.transpose()) /
                               std::sqrt(static_cast<double>(wa - 1));
    const Eigen::MatrixXd fb = (b.rows.rowwise() - mean_b.transpose()) /
                               std::sqrt(static_cast<double>(wb - 1));
    return frechet_from_factors(mean_a, fa, mean_b, fb);
  }

  GaussianSummary ga = gaussian_fit(a);
  GaussianSummary gb = gaussian_fit(b);
  if (ridge > 0.0) {
    ga.covariance.diagonal().array() += ridge;
    gb.covariance.diagonal().array() += ridge;
  }
  return frechet_distance(ga, gb);
}

double fdd(const Dataset& d1, const Dataset& d2, const FeatureConfig& config,
           double ridge) {
  return fdd_from_matrices(build_feature_matrix(d1, config),
                           build_feature_matrix(d2, config), ridge);
}

std::filesystem::path write_summary(const GaussianSummary& g,
                                    const std::filesystem::path& dir,
                                    const std::string& base) {
  std::filesystem::create_directories(dir);
  const std::string mean_name = base + ".mean.bin";
  const std::string cov_name = base + ".cov.bin";

  auto write_binary64 = [&](const std::string& name, const double* data,
                            std::size_t n) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(8 * n));
    if (!out) throw Error("short write to '" + path.string() + "'");
  };
  write_binary64(mean_name, g.mean.data(), static_cast<std::size_t>(g.mean.size()));
  // Covariance stored row-major; it is symmetric, so the layout only matters
  // for byte-exact reloads.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      cov_rm = g.covariance;
  write_binary64(cov_name, cov_rm.data(), static_cast<std::size_t>(cov_rm.size()));

  nlohmann::json doc;
  doc["kind"] = "gaussian_summary";
  doc["dataset_id"] = g.dataset_id;
  doc["model_id"] = g.model_id;
  doc["dim"] = static_cast<std::int64_t>(g.mean.size());
  doc["sample_count"] = g.sample_count;
  doc["dtype"] = "float64";
  doc["mean"] = mean_name;
  doc["covariance"] = cov_name;
  doc["config"]["selector"] = to_string(g.config.selector);
  doc["config"]["k"] = g.config.k;
  doc["config"]["aggregation"] = to_string(g.config.aggregation);
  doc["config"]["seed"] = g.config.seed;

  const auto manifest_path = dir / (base + ".json");
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + manifest_path.string() + "'");
  out << doc.dump(2) << '\n';
  return manifest_path;
}

GaussianSummary load_summary(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open summary '" + manifest_path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error("summary '" + manifest_path.string() + "' is not valid JSON: " +
                e.what());
  }
  if (!doc.contains("kind") || doc["kind"] != "gaussian_summary")
    throw Error("'" + manifest_path.string() + "' is not a gaussian_summary manifest");

  GaussianSummary g;
  g.dataset_id = doc.at("dataset_id").get<std::string>();
  g.model_id = doc.at("model_id").get<std::string>();
  g.sample_count = doc.at("sample_count").get<std::int64_t>();
  const auto dim = doc.at("dim").get<Eigen::Index>();
  if (dim < 1) throw Error("summary dim must be >= 1");
  g.config.selector = parse_selector(doc.at("config").at("selector").get<std::string>());
  g.config.k = doc.at("config").at("k").get<int>();
  g.config.aggregation =
      parse_aggregation(doc.at("config").at("aggregation").get<std::string>());
  g.config.seed = doc.at("config").at("seed").get<std::uint64_t>();

  const auto base_dir = manifest_path.parent_path();
  auto read_binary64 = [&](const std::string& name, double* out_data, std::size_t n) {
    const auto path = base_dir / name;
    std::error_code ec;
    const auto actual = std::filesystem::file_size(path, ec);
    if (ec) throw Error("summary: missing file '" + path.string() + "'");
    if (actual != 8ull * n)
      throw Error("summary: byte-count mismatch in '" + path.string() +
                  "': expected " + std::to_string(8ull * n) + " bytes, found " +
                  std::to_string(actual));
    std::ifstream bin(path, std::ios::binary);
    if (!bin.read(reinterpret_cast<char*>(out_data),
                  static_cast<std::streamsize>(8 * n)))
      throw Error("summary: failed to read '" + path.string() + "'");
  };
  g.mean.resize(dim);
  read_binary64(doc.at("mean").get<std::string>(), g.mean.data(),
                static_cast<std::size_t>(dim));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> cov_rm(dim, dim);
  read_binary64(doc.at("covariance").get<std::string>(), cov_rm.data(),
                static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim));
  g.covariance = cov_rm;
  if (!g.mean.allFinite() || !g.covariance.allFinite())
    throw Error("summary '" + manifest_path.string() + "': non-finite value");
  return g;
}

}  // namespace fdd
