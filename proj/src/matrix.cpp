#include "csls/matrix.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <stdexcept>

namespace csls {

void require_shape(const MatrixXd& M, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what) {
  if (M.rows() != rows || M.cols() != cols) {
    throw std::invalid_argument(what + ": expected " + std::to_string(rows) +
                                "x" + std::to_string(cols) + ", got " +
                                std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()));
  }
}

double asymmetry(const MatrixXd& M) {
  if (M.rows() != M.cols()) return 1.0;
  if (M.size() == 0) return 0.0;
  return (M - M.transpose()).cwiseAbs().maxCoeff() /
         (1.0 + M.cwiseAbs().maxCoeff());
}

MatrixXd symmetrize_checked(const MatrixXd& M, const std::string& what,
                            double tol) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument(what + ": not square (" +
                                std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()) + ")");
  }
  if (asymmetry(M) > tol) {
    throw std::invalid_argument(what + ": asymmetric beyond tolerance");
  }
  return 0.5 * (M + M.transpose());
}

EigBounds eig_bounds(const MatrixXd& symmetric) {
  if (symmetric.size() == 0) return {0.0, 0.0};
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric,
                                             Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

double max_abs(const MatrixXd& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

double operator_norm(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

}  // namespace csls
