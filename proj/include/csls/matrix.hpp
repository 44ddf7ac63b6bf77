#pragma once

#include <Eigen/Dense>
#include <string>

namespace csls {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Throws std::invalid_argument when M is not rows x cols.
void require_shape(const MatrixXd& M, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what);

// Relative asymmetry ||M - M^T|| / (1 + ||M||), max-abs norms.
double asymmetry(const MatrixXd& M);

// Averages M with its transpose; throws when the relative asymmetry
// exceeds tol (used on ingest so downstream code can assume exact symmetry).
MatrixXd symmetrize_checked(const MatrixXd& M, const std::string& what,
                            double tol = 1e-10);

// Eigenvalue range of a symmetric matrix. Empty matrices yield {0, 0}.
struct EigBounds {
  double min = 0.0;
  double max = 0.0;
};
EigBounds eig_bounds(const MatrixXd& symmetric);

double max_abs(const MatrixXd& M);

// Largest singular value; 0 for empty matrices.
double operator_norm(const MatrixXd& M);

}  // namespace csls
