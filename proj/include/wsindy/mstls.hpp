#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsindy {

// Least squares restricted to a column subset (strictly increasing indices);
// entries outside the support are zero.  Solved by SVD with singular values
// below max(rows, cols) * eps * s_max treated as zero, so rank-deficient
// subsets return the minimum-norm solution instead of blowing up.
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                     const std::vector<int>& support) {
  if (G.rows() != b.size()) throw std::invalid_argument("least_squares: shape mismatch");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(G.cols());
  if (support.empty()) return w;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i] < 0 || support[i] >= G.cols()) {
      throw std::invalid_argument("least_squares: support index out of range");
    }
    if (i > 0 && support[i] <= support[i - 1]) {
      throw std::invalid_argument("least_squares: support must be strictly increasing");
    }
  }
  Eigen::MatrixXd Gs(G.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    Gs.col(static_cast<Eigen::Index>(i)) = G.col(support[i]);
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd;
  svd.setThreshold(static_cast<double>(std::max(Gs.rows(), Gs.cols())) *
                   std::numeric_limits<double>::epsilon());
  svd.compute(Gs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd ws = svd.solve(b);
  if (!ws.allFinite()) {
    throw std::runtime_error("least_squares: SVD produced a non-finite solution");
  }
  for (std::size_t i = 0; i < support.size(); ++i) {
    w[support[i]] = ws[static_cast<Eigen::Index>(i)];
  }
  return w;
}

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& G, const Eigen::VectorXd& b) {
  std::vector<int> all(static_cast<std::size_t>(G.cols()));
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
  return least_squares(G, b, all);
}

// Outcome of the thresholded least-squares fixed point at one threshold level.
struct MstlsResult {
  Eigen::VectorXd coeffs;
  std::vector<int> support;
  int iterations = 0;
  bool degenerate = false;  // the threshold emptied the support
  double loss = std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::vector<int> threshold_support(const Eigen::VectorXd& w,
                                          const std::vector<double>& lower,
                                          const std::vector<double>& upper) {
  std::vector<int> s;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    const double a = std::abs(w[j]);
    if (a >= lower[j] && a <= upper[j]) s.push_back(static_cast<int>(j));
  }
  return s;
}

inline MstlsResult mstls_fixpoint(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& w0, double lambda,
                                  const std::vector<double>& lower,
                                  const std::vector<double>& upper, double gw0_norm) {
  const int J = static_cast<int>(G.cols());
  MstlsResult res;
  if (lambda == 0.0) {
    // thresholding inactive: the plain least-squares solution, full support
    res.coeffs = w0;
    for (int j = 0; j < J; ++j) res.support.push_back(j);
    res.loss = 1.0;
    return res;
  }
  Eigen::VectorXd w = w0;
  std::vector<int> support = threshold_support(w, lower, upper);
  // Alternate refit and threshold until the support is a fixed point.  Each
  // pass solves one least-squares problem, so cap the pass count at the
  // column count plus one.
  for (int it = 0; it < J + 1; ++it) {
    res.iterations = it + 1;
    if (support.empty()) break;
    w = least_squares(G, b, support);
    std::vector<int> next = threshold_support(w, lower, upper);
    // thresholding is only ever applied inside the current support
    std::vector<int> kept;
    for (int j : next) {
      if (std::binary_search(support.begin(), support.end(), j)) kept.push_back(j);
    }
    if (kept == support) break;
    support = std::move(kept);
  }
  if (support.empty()) {
    res.coeffs = Eigen::VectorXd::Zero(J);
    res.degenerate = true;
    res.loss = 1.0;  // ||G(0 - w0)|| / ||G w0|| + 0
    return res;
  }
  res.coeffs = least_squares(G, b, support);
  res.support = support;
  res.loss = (G * (res.coeffs - w0)).norm() / gw0_norm +
             static_cast<double>(support.size()) / static_cast<double>(J);
  return res;
}

}  // namespace detail

// Runs the thresholded fixed point at a single threshold level lambda, with
// column-adaptive bounds
//   keep j  iff  lambda max(1, ||b||/||G_j||) <= |w_j| <= (1/lambda) min(1, ||b||/||G_j||).
inline MstlsResult mstls_at(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                            double lambda) {
  if (G.rows() != b.size()) throw std::invalid_argument("mstls_at: shape mismatch");
  if (lambda < 0.0) throw std::invalid_argument("mstls_at: lambda must be nonnegative");
  if (!G.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("mstls_at: regression system contains non-finite entries");
  }
  const int J = static_cast<int>(G.cols());
  const double bnorm = b.norm();
  if (bnorm == 0.0) throw std::invalid_argument("mstls_at: right-hand side is zero");
  const Eigen::VectorXd w0 = least_squares(G, b);
  const double gw0 = (G * w0).norm();
  if (gw0 == 0.0) {
    throw std::runtime_error("mstls_at: the library cannot represent the data");
  }
  std::vector<double> lower(J), upper(J);
  for (int j = 0; j < J; ++j) {
    const double gj = G.col(j).norm();
    const double ratio = gj > 0.0 ? bnorm / gj : std::numeric_limits<double>::infinity();
    lower[j] = lambda * std::max(1.0, ratio);
    upper[j] = lambda > 0.0 ? std::min(1.0, ratio) / lambda
                            : std::numeric_limits<double>::infinity();
  }
  return detail::mstls_fixpoint(G, b, w0, lambda, lower, upper, gw0);
}

// log-uniform threshold grid 10^-4 .. 10^0 (100 points)
inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid(100);
  for (int i = 0; i < 100; ++i) {
    grid[i] = std::pow(10.0, -4.0 + 4.0 * i / 99.0);
  }
  return grid;
}

// Sparse solution selected over a threshold grid by the combined loss
//   L(lambda) = ||G (w_lambda - w0)|| / ||G w0|| + ||w_lambda||_0 / J,
// taking the smallest lambda attaining the minimum.
struct SparseSolution {
  Eigen::VectorXd coeffs;
  double lambda_hat = 0.0;
  std::vector<double> lambda_grid;
  std::vector<double> loss_curve;  // infinity marks degenerate levels
  std::vector<int> support;
  int iterations = 0;
  double rel_residual = 0.0;  // ||G w - b|| / ||b||
};

inline SparseSolution mstls(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                            const std::vector<double>& lambdas = default_lambda_grid()) {
  if (G.rows() != b.size()) throw std::invalid_argument("mstls: shape mismatch");
  if (lambdas.empty()) throw std::invalid_argument("mstls: empty lambda grid");
  // SVD misbehaves badly on non-finite input, so fail loudly instead.
  if (!G.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("mstls: regression system contains non-finite entries");
  }
  const int J = static_cast<int>(G.cols());
  const double bnorm = b.norm();
  if (bnorm == 0.0) throw std::invalid_argument("mstls: right-hand side is zero");
  const Eigen::VectorXd w0 = least_squares(G, b);
  const double gw0 = (G * w0).norm();
  if (gw0 == 0.0) throw std::runtime_error("mstls: the library cannot represent the data");
  std::vector<double> lower(J), upper(J);

  SparseSolution sol;
  sol.lambda_grid = lambdas;
  sol.loss_curve.assign(lambdas.size(), std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lambda = lambdas[i];
    if (lambda < 0.0) throw std::invalid_argument("mstls: lambda must be nonnegative");
    for (int j = 0; j < J; ++j) {
      const double gj = G.col(j).norm();
      const double ratio = gj > 0.0 ? bnorm / gj : std::numeric_limits<double>::infinity();
      lower[j] = lambda * std::max(1.0, ratio);
      upper[j] = lambda > 0.0 ? std::min(1.0, ratio) / lambda
                              : std::numeric_limits<double>::infinity();
    }
    const MstlsResult res = detail::mstls_fixpoint(G, b, w0, lambda, lower, upper, gw0);
    if (res.degenerate) continue;  // loss_curve keeps infinity there
    sol.loss_curve[i] = res.loss;
    if (res.loss < best) {
      best = res.loss;
      found = true;
      sol.coeffs = res.coeffs;
      sol.lambda_hat = lambda;
      sol.support = res.support;
      sol.iterations = res.iterations;
    }
  }
  if (!found) {
    throw std::runtime_error(
        "mstls: every threshold level emptied the support; review library scaling");
  }
  sol.rel_residual = (G * sol.coeffs - b).norm() / bnorm;
  return sol;
}

}  // namespace wsindy
