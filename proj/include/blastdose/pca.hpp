#pragma once
// Principal component analysis: fit on a training matrix, project new rows.

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace blastdose {

// Fitted projector. components is row-major: component c spans
// [c * dim, (c + 1) * dim).
struct PcaProjector {
  std::size_t dim = 0;
  std::size_t n_components = 0;
  std::vector<double> mean;                         // dim
  std::vector<double> components;                   // n_components x dim
  std::vector<double> eigenvalues;                  // n_components, descending
  std::vector<double> explained_variance_fraction;  // n_components

  std::vector<double> project(const std::vector<double>& row) const {
    if (row.size() != dim) throw std::invalid_argument("pca: bad row length");
    std::vector<double> out(n_components, 0.0);
    for (std::size_t c = 0; c < n_components; ++c) {
      double s = 0.0;
      const double* comp = components.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) s += comp[j] * (row[j] - mean[j]);
      out[c] = s;
    }
    return out;
  }
};

// Fit principal components of `rows` (each of length dim) using the sample
// covariance (n - 1). Components are unit length, ordered by descending
// eigenvalue, and sign-fixed so each component's largest-magnitude element is
// positive. Requires at least two rows.
inline PcaProjector pca_fit(const std::vector<std::vector<double>>& rows,
                            std::size_t n_components) {
  if (rows.size() < n_components + 1)
    throw std::invalid_argument("pca: need more rows than components");
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  if (d == 0) throw std::invalid_argument("pca: zero-dimensional rows");
  if (n_components == 0 || n_components > d)
    throw std::invalid_argument("pca: component count out of range");
  for (const auto& r : rows)
    if (r.size() != d) throw std::invalid_argument("pca: ragged rows");

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(long(i), long(j)) = rows[i][j];
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / double(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw std::runtime_error("pca: eig failed");
  // Eigen returns ascending order; take the top n_components from the back.
  const Eigen::VectorXd evals = es.eigenvalues();
  const Eigen::MatrixXd evecs = es.eigenvectors();
  const double total = std::max(evals.sum(), 0.0);

  PcaProjector out;
  out.dim = d;
  out.n_components = n_components;
  out.mean.assign(mu.data(), mu.data() + d);
  out.components.resize(n_components * d);
  out.eigenvalues.resize(n_components);
  out.explained_variance_fraction.resize(n_components);
  for (std::size_t c = 0; c < n_components; ++c) {
    const long col = long(d - 1 - c);
    Eigen::VectorXd v = evecs.col(col);
    // Deterministic sign: largest-magnitude element positive.
    long arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j) out.components[c * d + j] = v(long(j));
    const double ev = std::max(evals(col), 0.0);
    out.eigenvalues[c] = ev;
    out.explained_variance_fraction[c] = total > 0.0 ? ev / total : 0.0;
  }
  return out;
}

}  // namespace blastdose
