#include "mdpt/selection/pca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mdpt::selection {

PcaModel pca_fit(const std::vector<std::vector<double>>& X, size_t d) {
  const size_t n = X.size();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 rows");
  const size_t D = X[0].size();
  if (d < 1 || d > std::min(n, D))
    throw std::invalid_argument("pca_fit: d must satisfy 1 <= d <= min(n, D)");
  for (const auto& row : X)
    if (row.size() != D) throw std::invalid_argument("pca_fit: ragged input matrix");

  Eigen::MatrixXd M(n, D);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < D; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
  Eigen::RowVectorXd mean = M.colwise().mean();
  M.rowwise() -= mean;
  Eigen::MatrixXd cov = (M.transpose() * M) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigensolver failed");
  // Eigen returns eigenvalues in increasing order; take the top d.
  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + D);
  model.zero_variance = evals.cwiseMax(0.0).sum() < 1e-12;
  model.components.resize(d, std::vector<double>(D));
  model.explained_variance.resize(d);
  for (size_t k = 0; k < d; ++k) {
    const auto col = static_cast<Eigen::Index>(D - 1 - k);
    Eigen::VectorXd v = evecs.col(col);
    // Deterministic sign: the largest-magnitude coefficient is positive.
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    for (size_t j = 0; j < D; ++j) model.components[k][j] = v(static_cast<Eigen::Index>(j));
    model.explained_variance[k] = std::max(0.0, evals(col));
  }
  return model;
}

std::vector<std::vector<double>> pca_transform(const PcaModel& model,
                                               const std::vector<std::vector<double>>& X) {
  const size_t D = model.mean.size();
  const size_t d = model.components.size();
  std::vector<std::vector<double>> out(X.size(), std::vector<double>(d, 0.0));
  for (size_t i = 0; i < X.size(); ++i) {
    if (X[i].size() != D) throw std::invalid_argument("pca_transform: row width mismatch");
    for (size_t k = 0; k < d; ++k) {
      double s = 0.0;
      const auto& c = model.components[k];
      for (size_t j = 0; j < D; ++j) s += (X[i][j] - model.mean[j]) * c[j];
      out[i][k] = s;
    }
  }
  return out;
}

}  // namespace mdpt::selection
