#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "csls/matrix.hpp"

namespace csls {

enum class VarKind { symmetric, full, scalar };

// Matrix decision variable flattened into scalar ids [offset, offset+count).
// Symmetric variables are packed lower-triangular, column-major, so entry
// (r, c) and (c, r) share one id.
struct MatrixVariable {
  std::string name;
  int rows = 0;
  int cols = 0;
  VarKind kind = VarKind::full;
  int offset = 0;

  int count() const;
  int entry_id(int r, int c) const;
  bool off_diagonal(int scalar_id) const;  // symmetric packed off-diagonal
};

class VariableSpace {
 public:
  // Returned references stay valid for the life of the space.
  const MatrixVariable& add_symmetric(const std::string& name, int n);
  const MatrixVariable& add_full(const std::string& name, int r, int c);
  const MatrixVariable& add_scalar(const std::string& name);

  int size() const { return total_; }
  const std::deque<MatrixVariable>& variables() const { return vars_; }
  const MatrixVariable& at(const std::string& name) const;
  const MatrixVariable* find(const std::string& name) const;

  // Read/write a variable's matrix value inside a packed scalar vector.
  MatrixXd value(const VectorXd& x, const MatrixVariable& v) const;
  void assign(VectorXd& x, const MatrixVariable& v, const MatrixXd& m) const;

 private:
  const MatrixVariable& add(MatrixVariable v);
  std::deque<MatrixVariable> vars_;
  int total_ = 0;
};

// Symmetric-matrix-valued affine map of the packed scalar vector:
// F(x) = constant + sum_i x_i * coefficient_i. Products of two non-constant
// expressions throw, which pins affinity at construction time.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  static AffineMatrix zero(Eigen::Index r, Eigen::Index c);
  static AffineMatrix fixed(MatrixXd constant);
  static AffineMatrix variable(const MatrixVariable& v);
  // The single term x_id * coeff.
  static AffineMatrix term(int id, MatrixXd coeff);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  bool is_constant() const { return coeff_.empty(); }
  const MatrixXd& constant_part() const { return constant_; }
  const std::map<int, MatrixXd>& coefficients() const { return coeff_; }

  MatrixXd eval(const VectorXd& x) const;
  AffineMatrix transpose() const;
  // Adds `sub` into the region with top-left corner (r0, c0).
  void add_block(Eigen::Index r0, Eigen::Index c0, const AffineMatrix& sub);

  AffineMatrix& operator+=(const AffineMatrix& rhs);
  AffineMatrix& operator-=(const AffineMatrix& rhs);
  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
  friend AffineMatrix operator-(const AffineMatrix& a);
  friend AffineMatrix operator*(double s, AffineMatrix a);
  friend AffineMatrix operator*(const AffineMatrix& a, const AffineMatrix& b);

  // Largest absolute entry over constant and coefficient matrices.
  double data_norm() const;

 private:
  MatrixXd constant_ = MatrixXd::Zero(0, 0);
  std::map<int, MatrixXd> coeff_;
};

inline AffineMatrix fixed(MatrixXd m) { return AffineMatrix::fixed(std::move(m)); }
inline AffineMatrix var(const MatrixVariable& v) {
  return AffineMatrix::variable(v);
}

// N^T P N with constant N; stays affine for affine P.
AffineMatrix congruence(const MatrixXd& N, const AffineMatrix& P);

enum class Sense { pos_def, neg_def, pos_semi, neg_semi };

// One constraint F(x) in the cone given by `sense`. Strict senses are
// realized with margin eps = 1e-7 * (1 + data norm) when lowered.
struct LmiBlock {
  AffineMatrix expr;
  Sense sense = Sense::pos_def;
  std::string tag;

  Eigen::Index dim() const { return expr.rows(); }
};

// Validates that the map is symmetric-valued (then symmetrizes exactly).
// Throws std::logic_error on asymmetric assembly.
LmiBlock make_block(AffineMatrix expr, Sense sense, std::string tag);

double strictness_epsilon(const LmiBlock& b);

// Signed slack into the required cone at x, net of the strictness margin
// for strict senses: pos_def gives lambda_min(F(x)) - eps, neg_def gives
// -lambda_max(F(x)) - eps, semidefinite senses omit eps.
double block_margin(const LmiBlock& b, const VectorXd& x);

// Self-contained problem: variables, cone blocks, optional scalar objective
// (id of the variable to minimize; -1 for pure feasibility).
struct LmiProblem {
  VariableSpace vars;
  std::vector<LmiBlock> blocks;
  int objective_id = -1;
};

}  // namespace csls
