#include "csls/affine.hpp"

#include <stdexcept>

namespace csls {

int MatrixVariable::count() const {
  switch (kind) {
    case VarKind::symmetric:
      return rows * (rows + 1) / 2;
    case VarKind::full:
      return rows * cols;
    case VarKind::scalar:
      return 1;
  }
  return 0;
}

int MatrixVariable::entry_id(int r, int c) const {
  if (r < 0 || r >= rows || c < 0 || c >= cols)
    throw std::out_of_range("variable entry out of range");
  if (kind == VarKind::scalar) return offset;
  if (kind == VarKind::full) return offset + c * rows + r;
  // Lower triangle, column-major: column c holds rows c..n-1.
  if (r < c) std::swap(r, c);
  int before = c * rows - c * (c - 1) / 2;
  return offset + before + (r - c);
}

bool MatrixVariable::off_diagonal(int scalar_id) const {
  if (kind != VarKind::symmetric) return false;
  int k = scalar_id - offset;
  for (int c = 0; c < rows; ++c) {
    int len = rows - c;
    if (k < len) return k != 0;
    k -= len;
  }
  throw std::out_of_range("scalar id not in variable");
}

const MatrixVariable& VariableSpace::add(MatrixVariable v) {
  if (find(v.name) != nullptr)
    throw std::logic_error("duplicate variable name: " + v.name);
  v.offset = total_;
  total_ += v.count();
  vars_.push_back(std::move(v));
  return vars_.back();
}

const MatrixVariable& VariableSpace::add_symmetric(const std::string& name,
                                                   int n) {
  if (n <= 0) throw std::invalid_argument("symmetric variable needs n >= 1");
  return add({name, n, n, VarKind::symmetric, 0});
}

const MatrixVariable& VariableSpace::add_full(const std::string& name, int r,
                                              int c) {
  if (r <= 0 || c <= 0) throw std::invalid_argument("full variable needs positive dims");
  return add({name, r, c, VarKind::full, 0});
}

const MatrixVariable& VariableSpace::add_scalar(const std::string& name) {
  return add({name, 1, 1, VarKind::scalar, 0});
}

const MatrixVariable* VariableSpace::find(const std::string& name) const {
  for (const auto& v : vars_)
    if (v.name == name) return &v;
  return nullptr;
}

const MatrixVariable& VariableSpace::at(const std::string& name) const {
  const MatrixVariable* v = find(name);
  if (v == nullptr) throw std::out_of_range("no variable named " + name);
  return *v;
}

MatrixXd VariableSpace::value(const VectorXd& x, const MatrixVariable& v) const {
  if (x.size() != total_) throw std::invalid_argument("packed vector size mismatch");
  MatrixXd m(v.rows, v.cols);
  for (int c = 0; c < v.cols; ++c)
    for (int r = 0; r < v.rows; ++r) m(r, c) = x[v.entry_id(r, c)];
  return m;
}

void VariableSpace::assign(VectorXd& x, const MatrixVariable& v,
                           const MatrixXd& m) const {
  if (x.size() != total_) throw std::invalid_argument("packed vector size mismatch");
  require_shape(m, v.rows, v.cols, "assigned value for " + v.name);
  if (v.kind == VarKind::symmetric)
    symmetrize_checked(m, "assigned value for " + v.name);
  for (int c = 0; c < v.cols; ++c)
    for (int r = 0; r < v.rows; ++r) x[v.entry_id(r, c)] = m(r, c);
}

AffineMatrix AffineMatrix::zero(Eigen::Index r, Eigen::Index c) {
  AffineMatrix m;
  m.constant_ = MatrixXd::Zero(r, c);
  return m;
}

AffineMatrix AffineMatrix::fixed(MatrixXd constant) {
  AffineMatrix m;
  m.constant_ = std::move(constant);
  return m;
}

AffineMatrix AffineMatrix::term(int id, MatrixXd coeff) {
  if (id < 0) throw std::invalid_argument("negative variable id");
  AffineMatrix m = zero(coeff.rows(), coeff.cols());
  if (max_abs(coeff) > 0) m.coeff_[id] = std::move(coeff);
  return m;
}

AffineMatrix AffineMatrix::variable(const MatrixVariable& v) {
  AffineMatrix m = zero(v.rows, v.cols);
  for (int c = 0; c < v.cols; ++c) {
    for (int r = 0; r < v.rows; ++r) {
      if (v.kind == VarKind::symmetric && r < c) continue;  // mirrored below
      MatrixXd& coeff =
          m.coeff_.try_emplace(v.entry_id(r, c), MatrixXd::Zero(v.rows, v.cols))
              .first->second;
      coeff(r, c) = 1.0;
      if (v.kind == VarKind::symmetric && r != c) coeff(c, r) = 1.0;
    }
  }
  return m;
}

MatrixXd AffineMatrix::eval(const VectorXd& x) const {
  MatrixXd out = constant_;
  for (const auto& [id, coeff] : coeff_) {
    if (id < 0 || id >= x.size())
      throw std::invalid_argument("eval vector does not cover variable ids");
    out.noalias() += x[id] * coeff;
  }
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix out;
  out.constant_ = constant_.transpose();
  for (const auto& [id, coeff] : coeff_) out.coeff_[id] = coeff.transpose();
  return out;
}

void AffineMatrix::add_block(Eigen::Index r0, Eigen::Index c0,
                             const AffineMatrix& sub) {
  if (r0 < 0 || c0 < 0 || r0 + sub.rows() > rows() || c0 + sub.cols() > cols())
    throw std::out_of_range("block placement outside matrix");
  constant_.block(r0, c0, sub.rows(), sub.cols()) += sub.constant_;
  for (const auto& [id, coeff] : sub.coeff_) {
    MatrixXd& dst =
        coeff_.try_emplace(id, MatrixXd::Zero(rows(), cols())).first->second;
    dst.block(r0, c0, sub.rows(), sub.cols()) += coeff;
  }
}

static void require_same_shape(const AffineMatrix& a, const AffineMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("affine matrix shape mismatch");
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& rhs) {
  require_same_shape(*this, rhs);
  constant_ += rhs.constant_;
  for (const auto& [id, coeff] : rhs.coeff_) {
    auto [it, fresh] = coeff_.try_emplace(id, coeff);
    if (!fresh) it->second += coeff;
  }
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& rhs) {
  return *this += -rhs;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }

AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }

AffineMatrix operator-(const AffineMatrix& a) { return -1.0 * a; }

AffineMatrix operator*(double s, AffineMatrix a) {
  a.constant_ *= s;
  for (auto& [id, coeff] : a.coeff_) coeff *= s;
  return a;
}

AffineMatrix operator*(const AffineMatrix& a, const AffineMatrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("affine matrix product shape mismatch");
  if (!a.is_constant() && !b.is_constant())
    throw std::logic_error("product of two variable expressions is not affine");
  AffineMatrix out = AffineMatrix::zero(a.rows(), b.cols());
  out.constant_ = a.constant_ * b.constant_;
  if (a.is_constant()) {
    for (const auto& [id, coeff] : b.coeff_) out.coeff_[id] = a.constant_ * coeff;
  } else {
    for (const auto& [id, coeff] : a.coeff_) out.coeff_[id] = coeff * b.constant_;
  }
  return out;
}

double AffineMatrix::data_norm() const {
  double m = max_abs(constant_);
  for (const auto& [id, coeff] : coeff_) m = std::max(m, max_abs(coeff));
  return m;
}

AffineMatrix congruence(const MatrixXd& N, const AffineMatrix& P) {
  if (P.rows() != P.cols() || N.rows() != P.rows())
    throw std::invalid_argument("congruence shape mismatch");
  return AffineMatrix::fixed(N.transpose()) * P * AffineMatrix::fixed(N);
}

LmiBlock make_block(AffineMatrix expr, Sense sense, std::string tag) {
  if (expr.rows() != expr.cols())
    throw std::logic_error("LMI block must be square: " + tag);
  const double scale = 1.0 + expr.data_norm();
  // Rebuild with exactly symmetric pieces; reject real asymmetry upfront.
  AffineMatrix sym = AffineMatrix::zero(expr.rows(), expr.cols());
  MatrixXd c = expr.constant_part();
  if (asymmetry(c) > 1e-9 * scale)
    throw std::logic_error("asymmetric constant part in LMI block: " + tag);
  sym += AffineMatrix::fixed(((c + c.transpose()) / 2).eval());
  for (const auto& [id, coeff] : expr.coefficients()) {
    if (asymmetry(coeff) > 1e-9 * scale)
      throw std::logic_error("asymmetric coefficient in LMI block: " + tag);
    sym += AffineMatrix::term(id, ((coeff + coeff.transpose()) / 2).eval());
  }
  return LmiBlock{std::move(sym), sense, std::move(tag)};
}

double strictness_epsilon(const LmiBlock& b) {
  return 1e-7 * (1.0 + b.expr.data_norm());
}

double block_margin(const LmiBlock& b, const VectorXd& x) {
  MatrixXd f = b.expr.eval(x);
  EigBounds eb = eig_bounds(symmetrize_checked(f, "block " + b.tag, 1e-8));
  switch (b.sense) {
    case Sense::pos_def:
      return eb.min - strictness_epsilon(b);
    case Sense::neg_def:
      return -eb.max - strictness_epsilon(b);
    case Sense::pos_semi:
      return eb.min;
    case Sense::neg_semi:
      return -eb.max;
  }
  return 0.0;
}

}  // namespace csls
