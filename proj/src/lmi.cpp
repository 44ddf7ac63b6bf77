#include "csls/lmi.hpp"

#include <Eigen/Eigenvalues>
#include <set>
#include <stdexcept>

#include "csls/graph.hpp"

namespace csls {

namespace {

std::string edge_tag(const std::string& base, const Edge& e) {
  return base + ":edge(" + std::to_string(e.tail) + "," +
         std::to_string(e.head) + "," + std::to_string(e.label) + ")";
}

std::string node_tag(const std::string& base, int node) {
  return base + ":node(" + std::to_string(node) + ")";
}

std::string out_tag(const std::string& base, int node, int label) {
  return base + ":out(" + std::to_string(node) + "," + std::to_string(label) +
         ")";
}

std::string mult_tag(int label) {
  return "multiplier:label(" + std::to_string(label) + ")";
}

// top^T Q top + top^T S bot + bot^T S^T top + bot^T R bot.
AffineMatrix quad_form(const AffineMatrix& Q, const AffineMatrix& S,
                       const AffineMatrix& R, const MatrixXd& top,
                       const MatrixXd& bot) {
  AffineMatrix t = congruence(top, Q) + congruence(bot, R);
  AffineMatrix cross =
      AffineMatrix::fixed(top.transpose()) * S * AffineMatrix::fixed(bot);
  t += cross;
  t += cross.transpose();
  return t;
}

// Symmetric matrix from upper-triangle entries keyed by (row, col) slot.
class SymBuilder {
 public:
  explicit SymBuilder(std::vector<Eigen::Index> dims) : dims_(std::move(dims)) {
    offs_.resize(dims_.size() + 1, 0);
    for (size_t i = 0; i < dims_.size(); ++i) offs_[i + 1] = offs_[i] + dims_[i];
    m_ = AffineMatrix::zero(offs_.back(), offs_.back());
  }

  void set(int r, int c, const AffineMatrix& e) {
    if (e.rows() != dims_[r] || e.cols() != dims_[c])
      throw std::logic_error("symmetric builder slot shape mismatch");
    m_.add_block(offs_[r], offs_[c], e);
    if (r != c) m_.add_block(offs_[c], offs_[r], e.transpose());
  }

  AffineMatrix take() { return std::move(m_); }

 private:
  std::vector<Eigen::Index> dims_;
  std::vector<Eigen::Index> offs_;
  AffineMatrix m_;
};

// Per-node storage map; shares one variable across nodes when tied.
std::map<int, const MatrixVariable*> node_storage(VariableSpace& vs,
                                                  const ConstrainingGraph& g,
                                                  const std::string& base,
                                                  int dim, bool shared,
                                                  bool symmetric) {
  std::map<int, const MatrixVariable*> out;
  if (shared) {
    const MatrixVariable& v = symmetric ? vs.add_symmetric(base, dim)
                                        : vs.add_full(base, dim, dim);
    for (int i : g.nodes) out[i] = &v;
  } else {
    for (int i : g.nodes) {
      const MatrixVariable& v = symmetric
                                    ? vs.add_symmetric(node_var(base, i), dim)
                                    : vs.add_full(node_var(base, i), dim, dim);
      out[i] = &v;
    }
  }
  return out;
}

std::map<int, const MatrixVariable*> gain_storage(VariableSpace& vs,
                                                  const ConstrainingGraph& g,
                                                  int rows, int cols,
                                                  bool shared) {
  std::map<int, const MatrixVariable*> out;
  if (shared) {
    const MatrixVariable& v = vs.add_full("Z", rows, cols);
    for (int i : g.nodes) out[i] = &v;
  } else {
    for (int i : g.nodes) out[i] = &vs.add_full(node_var("Z", i), rows, cols);
  }
  return out;
}

struct MultiplierBlocks {
  AffineMatrix Q, S, R;  // partitioned (w_u, z_u)
  int var_id = -1;       // scalar parameter id, -1 when fixed numeric
};

void require_mult_dims(const MultiplierClass& mc, int dwu, int dzu) {
  if (mc.kind == MultiplierClass::Kind::repeated_scalar && dwu != dzu)
    throw std::invalid_argument(
        "repeated-scalar multiplier needs matching channel widths");
  if (mc.kind == MultiplierClass::Kind::full_block) {
    if (mc.fixed_P.Q.rows() != dwu || mc.fixed_P.R.rows() != dzu ||
        mc.fixed_P.S.rows() != dwu || mc.fixed_P.S.cols() != dzu)
      throw std::invalid_argument("full-block multiplier dims do not match channel");
  }
  if (mc.kind != MultiplierClass::Kind::full_block && !(mc.bound > 0))
    throw std::invalid_argument("multiplier bound must be positive");
}

// P_delta(a) = [[-a I, 0],[0, a bound^2 I]], variable a >= 0 per label.
MultiplierBlocks direct_multiplier(const MultiplierClass& mc, VariableSpace& vs,
                                   int label, int dwu, int dzu) {
  require_mult_dims(mc, dwu, dzu);
  MultiplierBlocks b;
  if (mc.kind == MultiplierClass::Kind::full_block) {
    b.Q = AffineMatrix::fixed(mc.fixed_P.Q);
    b.S = AffineMatrix::fixed(mc.fixed_P.S);
    b.R = AffineMatrix::fixed(mc.fixed_P.R);
    return b;
  }
  const MatrixVariable* a = vs.find(label_var("mult", label));
  if (a == nullptr) a = &vs.add_scalar(label_var("mult", label));
  b.var_id = a->offset;
  b.Q = AffineMatrix::term(a->offset, -MatrixXd::Identity(dwu, dwu));
  b.S = AffineMatrix::zero(dwu, dzu);
  b.R = AffineMatrix::term(a->offset,
                           mc.bound * mc.bound * MatrixXd::Identity(dzu, dzu));
  return b;
}

// P_delta(b)^{-1} = [[-b I, 0],[0, (b/bound^2) I]], variable b >= 0.
MultiplierBlocks inverse_multiplier(const MultiplierClass& mc,
                                    VariableSpace& vs, int label, int dwu,
                                    int dzu) {
  require_mult_dims(mc, dwu, dzu);
  MultiplierBlocks b;
  if (mc.kind == MultiplierClass::Kind::full_block) {
    InverseIndex inv = invert_index(mc.fixed_P);
    if (eig_bounds(inv.blocks.Q).max > 1e-9 * (1 + max_abs(inv.blocks.Q)))
      throw std::invalid_argument(
          "full-block multiplier inverse has Q-block not <= 0");
    b.Q = AffineMatrix::fixed(inv.blocks.Q);
    b.S = AffineMatrix::fixed(inv.blocks.S);
    b.R = AffineMatrix::fixed(inv.blocks.R);
    return b;
  }
  const MatrixVariable* v = vs.find(label_var("mult", label));
  if (v == nullptr) v = &vs.add_scalar(label_var("mult", label));
  b.var_id = v->offset;
  b.Q = AffineMatrix::term(v->offset, -MatrixXd::Identity(dwu, dwu));
  b.S = AffineMatrix::zero(dwu, dzu);
  b.R = AffineMatrix::term(
      v->offset, MatrixXd::Identity(dzu, dzu) / (mc.bound * mc.bound));
  return b;
}

// Dissipation block in factored (schur/slack) form, rows (x_j, mid, w, aux):
// [[Xt_j, Acpl, B, 0], [., slot, -Ccpl^T S^T, Ccpl^T U^T],
//  [., ., -Q - SD - (SD)^T, D^T U^T], [., ., ., I_r]]
// with Acpl = A*mid, Ccpl = C*mid for mid = Xt_i (schur) or G_i (slack),
// slot = Xt_i or G_i + G_i^T - Xt_i, and R = U^T U.
AffineMatrix factored_block(const AffineMatrix& Xt_j, const AffineMatrix& slot,
                            const AffineMatrix& Acpl, const AffineMatrix& Ccpl,
                            const MatrixXd& B, const MatrixXd& D,
                            const AffineMatrix& Q, const MatrixXd& S,
                            const MatrixXd& U) {
  const Eigen::Index n = Xt_j.rows(), di = B.cols(), r = U.rows();
  SymBuilder sb({n, n, di, r});
  sb.set(0, 0, Xt_j);
  sb.set(0, 1, Acpl);
  sb.set(0, 2, AffineMatrix::fixed(B));
  sb.set(1, 1, slot);
  sb.set(1, 2, -(Ccpl.transpose() * AffineMatrix::fixed(S.transpose())));
  sb.set(1, 3, Ccpl.transpose() * AffineMatrix::fixed(U.transpose()));
  MatrixXd SD = S * D;
  sb.set(2, 2, -Q - AffineMatrix::fixed((SD + SD.transpose()).eval()));
  sb.set(2, 3, AffineMatrix::fixed((D.transpose() * U.transpose()).eval()));
  sb.set(3, 3, AffineMatrix::fixed(MatrixXd::Identity(r, r)));
  return sb.take();
}

// Dual dissipation block, rows (mid-slot, x_j, z):
// [[slot, AcplT, CcplT], [., Xt_j + B Qt B^T, -B St + B Qt D^T],
//  [., ., Rt - D St - (D St)^T + D Qt D^T]]
// with AcplT = (A*mid)^T, CcplT = (C*mid)^T for mid = Xt_i or G_i^T.
AffineMatrix dual_block(const AffineMatrix& slot, const AffineMatrix& AcplT,
                        const AffineMatrix& CcplT, const AffineMatrix& Xt_j,
                        const MatrixXd& B, const MatrixXd& D,
                        const AffineMatrix& Qt, const MatrixXd& St,
                        const AffineMatrix& Rt) {
  const Eigen::Index n = slot.rows(), dz = D.rows();
  SymBuilder sb({n, n, dz});
  sb.set(0, 0, slot);
  sb.set(0, 1, AcplT);
  sb.set(0, 2, CcplT);
  AffineMatrix fB = AffineMatrix::fixed(B);
  AffineMatrix fD = AffineMatrix::fixed(D);
  sb.set(1, 1, Xt_j + fB * Qt * fB.transpose());
  sb.set(1, 2, fB * Qt * fD.transpose() - AffineMatrix::fixed((B * St).eval()));
  MatrixXd DSt = D * St;
  sb.set(2, 2, Rt + fD * Qt * fD.transpose() -
                   AffineMatrix::fixed((DSt + DSt.transpose()).eval()));
  return sb.take();
}

void require_index_dims(const QuadraticIndex& q, Eigen::Index di,
                        Eigen::Index dz, const std::string& what) {
  if (q.Q.rows() != di || q.R.rows() != dz || q.S.rows() != di ||
      q.S.cols() != dz)
    throw std::invalid_argument(what + ": index partition does not match channel");
}

void check_state_dim(const StateSpace& s, int n, const Edge& e) {
  if (s.A.rows() != n)
    throw std::invalid_argument("state dimension mismatch at edge label " +
                                std::to_string(e.label));
}

// Inverse index with the dual-form sign condition on the Q block.
QuadraticIndex dual_inverse(const QuadraticIndex& q, const std::string& what) {
  InverseIndex inv = invert_index(q);
  if (eig_bounds(inv.blocks.Q).max > 1e-9 * (1 + max_abs(inv.blocks.Q)))
    throw std::invalid_argument(what + ": dual form needs inverse Q-block <= 0");
  return inv.blocks;
}

}  // namespace

std::string node_var(const std::string& base, int node) {
  return base + ":" + std::to_string(node);
}

std::string label_var(const std::string& base, int label) {
  return base + ":" + std::to_string(label);
}

SystemAt by_label(const SystemFamily& f) {
  return [f](int, int label) { return f.at(label); };
}

IndexDecomposition decompose_R(const MatrixXd& R, double rank_tol) {
  MatrixXd Rs = symmetrize_checked(R, "index R block");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Rs);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition of index R block failed");
  const VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -rank_tol * scale)
      throw std::invalid_argument("index R block has a negative eigenvalue");
    if (ev[i] > rank_tol * scale) keep.push_back(i);
  }
  IndexDecomposition d;
  d.U.resize(static_cast<Eigen::Index>(keep.size()), Rs.rows());
  for (size_t r = 0; r < keep.size(); ++r)
    d.U.row(static_cast<Eigen::Index>(r)) =
        std::sqrt(ev[keep[r]]) * es.eigenvectors().col(keep[r]).transpose();
  d.Rt = MatrixXd::Identity(d.U.rows(), d.U.rows());
  return d;
}

InverseIndex invert_index(const QuadraticIndex& p) {
  const Eigen::Index di = p.Q.rows(), dz = p.R.rows();
  if (p.S.rows() != di || p.S.cols() != dz)
    throw std::invalid_argument("index S block shape mismatch");
  MatrixXd P(di + dz, di + dz);
  P << symmetrize_checked(p.Q, "index Q block"), p.S, p.S.transpose(),
      symmetrize_checked(p.R, "index R block");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(P);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition of quadratic index failed");
  const VectorXd& ev = es.eigenvalues();
  const double big = ev.cwiseAbs().maxCoeff();
  const double small = ev.cwiseAbs().minCoeff();
  // 1e-14 sits just above the eigensolver noise floor; anything larger is
  // ill-conditioned but invertible (the l2 index at level 1e6 has a spread
  // of 1e12 and inverts exactly).
  if (small <= 1e-14 * std::max(1.0, big))
    throw std::runtime_error("quadratic index is numerically singular");
  MatrixXd inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
  InverseIndex out;
  out.blocks.Q = inv.topLeftCorner(di, di);
  out.blocks.S = inv.topRightCorner(di, dz);
  out.blocks.R = inv.bottomRightCorner(dz, dz);
  out.condition = big / small;
  return out;
}

QuadraticIndex l2_squared_index(double gain_squared, int d_in, int d_out) {
  if (!(gain_squared > 0))
    throw std::invalid_argument("squared gain level must be positive");
  QuadraticIndex q;
  q.Q = -gain_squared * MatrixXd::Identity(d_in, d_in);
  q.S = MatrixXd::Zero(d_in, d_out);
  q.R = MatrixXd::Identity(d_out, d_out);
  return q;
}

std::string to_string(Form f) {
  switch (f) {
    case Form::primal: return "primal";
    case Form::schur: return "schur";
    case Form::slack: return "slack";
    case Form::dual: return "dual";
    case Form::dual_schur: return "dual-schur";
    case Form::dual_slack: return "dual-slack";
  }
  return "?";
}

Form form_from_string(const std::string& s) {
  for (Form f : {Form::primal, Form::schur, Form::slack, Form::dual,
                 Form::dual_schur, Form::dual_slack})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown form: " + s);
}

std::string to_string(MultiplierClass::Kind k) {
  switch (k) {
    case MultiplierClass::Kind::scalar_norm_bounded: return "scalar";
    case MultiplierClass::Kind::repeated_scalar: return "repeated";
    case MultiplierClass::Kind::full_block: return "full-block";
  }
  return "?";
}

MultiplierClass::Kind multiplier_kind_from_string(const std::string& s) {
  for (auto k : {MultiplierClass::Kind::scalar_norm_bounded,
                 MultiplierClass::Kind::repeated_scalar,
                 MultiplierClass::Kind::full_block})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown multiplier kind: " + s);
}

bool inverse_storage(Form f) { return f != Form::primal; }

bool is_slack(Form f) { return f == Form::slack || f == Form::dual_slack; }

void require_consistent(const LfrMode& m) {
  const Eigen::Index n = m.A.rows(), dwu = m.B_wu.cols(), dwp = m.B_wp.cols(),
                     dzu = m.C_zu.rows(), dzp = m.C_zp.rows();
  if (m.A.cols() != n || m.B_wu.rows() != n || m.B_wp.rows() != n ||
      m.C_zu.cols() != n || m.C_zp.cols() != n)
    throw std::invalid_argument("extended mode state dimension mismatch");
  auto want = [](const MatrixXd& M, Eigen::Index r, Eigen::Index c) {
    return M.rows() == r && M.cols() == c;
  };
  if (!want(m.D_zuwu, dzu, dwu) || !want(m.D_zuwp, dzu, dwp) ||
      !want(m.D_zpwu, dzp, dwu) || !want(m.D_zpwp, dzp, dwp))
    throw std::invalid_argument("extended mode feedthrough shape mismatch");
}

LfrMode lfr_mode(const CslsModel& m, int label) {
  const StateSpace& s = m.systems.at(label);
  LfrMode out;
  out.A = s.A;
  out.B_wp = s.B;
  out.C_zp = s.C;
  out.D_zpwp = s.D;
  auto it = m.uncertainty.find(label);
  if (it == m.uncertainty.end()) {
    const Eigen::Index n = s.state_dim(), dz = s.output_dim();
    out.B_wu = MatrixXd::Zero(n, 0);
    out.C_zu = MatrixXd::Zero(0, n);
    out.D_zuwu = MatrixXd::Zero(0, 0);
    out.D_zuwp = MatrixXd::Zero(0, s.input_dim());
    out.D_zpwu = MatrixXd::Zero(dz, 0);
  } else {
    const UncertaintyChannel& u = it->second;
    out.B_wu = u.B_wu;
    out.C_zu = u.C_zu;
    out.D_zuwu = u.D_zuwu;
    out.D_zuwp = u.D_zuwp;
    out.D_zpwu = u.D_zpwu;
  }
  require_consistent(out);
  return out;
}

LfrAt by_label_lfr(const CslsModel& m) {
  return [m](int, int label) { return lfr_mode(m, label); };
}

StateSpace stack_channels(const LfrMode& m) {
  require_consistent(m);
  StateSpace s;
  s.A = m.A;
  s.B.resize(m.state_dim(), m.unc_in() + m.perf_in());
  s.B << m.B_wu, m.B_wp;
  s.C.resize(m.unc_out() + m.perf_out(), m.state_dim());
  s.C << m.C_zu, m.C_zp;
  s.D.resize(m.unc_out() + m.perf_out(), m.unc_in() + m.perf_in());
  s.D << m.D_zuwu, m.D_zuwp, m.D_zpwu, m.D_zpwp;
  return s;
}

OpenLoopAt open_loop(const CslsModel& m) {
  if (!m.has_control())
    throw std::invalid_argument("model has no control channel");
  return [m](int label) {
    return OpenLoopMode{m.systems.at(label), m.control.at(label)};
  };
}

OpenLoopLfrAt open_loop_lfr(const CslsModel& m) {
  if (!m.has_control())
    throw std::invalid_argument("model has no control channel");
  return [m](int label) {
    OpenLoopLfrMode out;
    out.lfr = lfr_mode(m, label);
    const ControlChannel& c = m.control.at(label);
    out.B_u = c.B_u;
    out.D_zp_u = c.D_u;
    auto it = m.uncertainty.find(label);
    out.D_zu_u = it != m.uncertainty.end()
                     ? it->second.D_zu_u
                     : MatrixXd::Zero(0, c.B_u.cols());
    return out;
  };
}

LmiProblem assemble_stability(const ConstrainingGraph& g, const SystemAt& sys,
                              int state_dim) {
  require_valid(g);
  LmiProblem pb;
  auto X = node_storage(pb.vars, g, "X", state_dim, false, true);
  for (const Edge& e : g.edges) {
    StateSpace s = sys(e.tail, e.label);
    check_state_dim(s, state_dim, e);
    AffineMatrix Xj = var(*X.at(e.head));
    SymBuilder sb({state_dim, state_dim});
    sb.set(0, 0, var(*X.at(e.tail)));
    sb.set(0, 1, AffineMatrix::fixed(s.A.transpose()) * Xj);
    sb.set(1, 1, Xj);
    pb.blocks.push_back(
        make_block(sb.take(), Sense::pos_def, edge_tag("stability", e)));
  }
  return pb;
}

LmiProblem assemble_dissipativity(const ConstrainingGraph& g,
                                  const SystemAt& sys, int state_dim,
                                  const PerformanceIndex& p, Form form,
                                  bool shared_slack) {
  require_valid(g);
  if (shared_slack && !is_slack(form))
    throw std::invalid_argument("shared slack needs a slack form");
  const int n = state_dim;
  LmiProblem pb;
  const bool inv_store = inverse_storage(form);
  auto X = node_storage(pb.vars, g, inv_store ? "Xt" : "X", n, false, true);
  std::map<int, const MatrixVariable*> G;
  if (is_slack(form)) G = node_storage(pb.vars, g, "G", n, shared_slack, false);

  for (const Edge& e : g.edges) {
    StateSpace s = sys(e.tail, e.label);
    check_state_dim(s, n, e);
    const Eigen::Index di = s.input_dim(), dz = s.output_dim();
    const QuadraticIndex& q = p.at(e.label);
    require_index_dims(q, di, dz, "dissipativity");
    AffineMatrix Xi = var(*X.at(e.tail));
    AffineMatrix Xj = var(*X.at(e.head));
    const std::string tag = edge_tag("dissipativity[" + to_string(form) + "]", e);

    switch (form) {
      case Form::primal: {
        MatrixXd AB(n, n + di);
        AB << s.A, s.B;
        MatrixXd top = MatrixXd::Zero(di, n + di);
        top.rightCols(di).setIdentity();
        MatrixXd bot(dz, n + di);
        bot << s.C, s.D;
        AffineMatrix M = AffineMatrix::fixed(AB.transpose()) * Xj *
                         AffineMatrix::fixed(AB);
        M.add_block(0, 0, -Xi);
        M += quad_form(AffineMatrix::fixed(q.Q), AffineMatrix::fixed(q.S),
                       AffineMatrix::fixed(q.R), top, bot);
        pb.blocks.push_back(make_block(std::move(M), Sense::neg_def, tag));
        break;
      }
      case Form::schur:
      case Form::slack: {
        IndexDecomposition dec = decompose_R(q.R);
        AffineMatrix mid = form == Form::schur ? Xi : var(*G.at(e.tail));
        AffineMatrix slot =
            form == Form::schur ? Xi : mid + mid.transpose() - Xi;
        AffineMatrix Acpl = AffineMatrix::fixed(s.A) * mid;
        AffineMatrix Ccpl = AffineMatrix::fixed(s.C) * mid;
        pb.blocks.push_back(make_block(
            factored_block(Xj, slot, Acpl, Ccpl, s.B, s.D,
                           AffineMatrix::fixed(q.Q), q.S, dec.U),
            Sense::pos_def, tag));
        break;
      }
      case Form::dual: {
        QuadraticIndex inv = dual_inverse(q, "dissipativity");
        AffineMatrix fA = AffineMatrix::fixed(s.A);
        AffineMatrix fB = AffineMatrix::fixed(s.B);
        AffineMatrix fC = AffineMatrix::fixed(s.C);
        AffineMatrix fD = AffineMatrix::fixed(s.D);
        AffineMatrix fQt = AffineMatrix::fixed(inv.Q);
        SymBuilder sb({n, dz});
        sb.set(0, 0, Xj - fA * Xi * fA.transpose() +
                         fB * fQt * fB.transpose());
        sb.set(0, 1, -(fA * Xi * fC.transpose()) -
                         AffineMatrix::fixed((s.B * inv.S).eval()) +
                         fB * fQt * fD.transpose());
        MatrixXd DSt = s.D * inv.S;
        sb.set(1, 1, AffineMatrix::fixed(
                         (inv.R - DSt - DSt.transpose()).eval()) -
                         fC * Xi * fC.transpose() +
                         fD * fQt * fD.transpose());
        pb.blocks.push_back(make_block(sb.take(), Sense::pos_def, tag));
        break;
      }
      case Form::dual_schur:
      case Form::dual_slack: {
        QuadraticIndex inv = dual_inverse(q, "dissipativity");
        // Slack couples through G^T so the gain substitution Z = K G is
        // uniform across the slack forms.
        AffineMatrix mid =
            form == Form::dual_schur ? Xi : var(*G.at(e.tail));
        AffineMatrix slot = form == Form::dual_schur
                                ? Xi
                                : mid + mid.transpose() - Xi;
        AffineMatrix AcplT = (AffineMatrix::fixed(s.A) * mid).transpose();
        AffineMatrix CcplT = (AffineMatrix::fixed(s.C) * mid).transpose();
        pb.blocks.push_back(make_block(
            dual_block(slot, AcplT, CcplT, Xj, s.B, s.D,
                       AffineMatrix::fixed(inv.Q), inv.S,
                       AffineMatrix::fixed(inv.R)),
            Sense::pos_def, tag));
        break;
      }
    }
  }

  if (form == Form::primal || form == Form::dual) {
    const std::string base =
        form == Form::primal ? "storage" : "inverse-storage";
    for (int i : g.nodes)
      pb.blocks.push_back(
          make_block(var(*X.at(i)), Sense::pos_def, node_tag(base, i)));
  }
  return pb;
}

LmiProblem assemble_l2_min(const ConstrainingGraph& g, const SystemAt& sys,
                           int state_dim, Form form, bool shared_slack) {
  require_valid(g);
  if (form != Form::primal && form != Form::schur && form != Form::slack)
    throw std::invalid_argument(
        "direct gain minimization needs a non-dual form; bisect dual forms");
  if (shared_slack && !is_slack(form))
    throw std::invalid_argument("shared slack needs a slack form");
  const int n = state_dim;
  LmiProblem pb;
  auto X = node_storage(pb.vars, g, inverse_storage(form) ? "Xt" : "X", n,
                        false, true);
  std::map<int, const MatrixVariable*> G;
  if (is_slack(form)) G = node_storage(pb.vars, g, "G", n, shared_slack, false);
  const MatrixVariable& t = pb.vars.add_scalar("t");
  pb.objective_id = t.offset;

  for (const Edge& e : g.edges) {
    StateSpace s = sys(e.tail, e.label);
    check_state_dim(s, n, e);
    const Eigen::Index di = s.input_dim(), dz = s.output_dim();
    // Index Q = -t I, S = 0, R = I.
    AffineMatrix Qaff =
        AffineMatrix::term(t.offset, -MatrixXd::Identity(di, di));
    MatrixXd S0 = MatrixXd::Zero(di, dz);
    AffineMatrix Xi = var(*X.at(e.tail));
    AffineMatrix Xj = var(*X.at(e.head));
    const std::string tag = edge_tag("l2[" + to_string(form) + "]", e);
    if (form == Form::primal) {
      MatrixXd AB(n, n + di);
      AB << s.A, s.B;
      MatrixXd top = MatrixXd::Zero(di, n + di);
      top.rightCols(di).setIdentity();
      MatrixXd bot(dz, n + di);
      bot << s.C, s.D;
      AffineMatrix M =
          AffineMatrix::fixed(AB.transpose()) * Xj * AffineMatrix::fixed(AB);
      M.add_block(0, 0, -Xi);
      M += quad_form(Qaff, AffineMatrix::fixed(S0),
                     AffineMatrix::fixed(MatrixXd::Identity(dz, dz)), top, bot);
      pb.blocks.push_back(make_block(std::move(M), Sense::neg_def, tag));
    } else {
      AffineMatrix mid = form == Form::schur ? Xi : var(*G.at(e.tail));
      AffineMatrix slot = form == Form::schur ? Xi : mid + mid.transpose() - Xi;
      pb.blocks.push_back(make_block(
          factored_block(Xj, slot, AffineMatrix::fixed(s.A) * mid,
                         AffineMatrix::fixed(s.C) * mid, s.B, s.D, Qaff, S0,
                         MatrixXd::Identity(dz, dz)),
          Sense::pos_def, tag));
    }
  }
  if (form == Form::primal)
    for (int i : g.nodes)
      pb.blocks.push_back(
          make_block(var(*X.at(i)), Sense::pos_def, node_tag("storage", i)));
  return pb;
}

LmiProblem assemble_energy_to_peak(const ConstrainingGraph& g,
                                   const SystemAt& sys, int state_dim,
                                   Form form, bool shared_slack,
                                   std::optional<double> gamma) {
  require_valid(g);
  if (form != Form::schur && form != Form::slack)
    throw std::invalid_argument("energy-to-peak supports schur and slack forms");
  if (shared_slack && form != Form::slack)
    throw std::invalid_argument("shared slack needs a slack form");
  if (gamma && !(*gamma > 0))
    throw std::invalid_argument("energy-to-peak level must be positive");
  const int n = state_dim;
  LmiProblem pb;
  auto X = node_storage(pb.vars, g, "Xt", n, false, true);
  std::map<int, const MatrixVariable*> G;
  if (form == Form::slack)
    G = node_storage(pb.vars, g, "G", n, shared_slack, false);
  int gamma_id = -1;
  if (!gamma) {
    const MatrixVariable& gv = pb.vars.add_scalar("gamma");
    gamma_id = gv.offset;
    pb.objective_id = gamma_id;
  }
  auto gI = [&](Eigen::Index d) {
    return gamma ? AffineMatrix::fixed(
                       (*gamma * MatrixXd::Identity(d, d)).eval())
                 : AffineMatrix::term(gamma_id, MatrixXd::Identity(d, d));
  };

  std::set<std::pair<int, int>> seen_out;
  for (const Edge& e : g.edges) {
    StateSpace s = sys(e.tail, e.label);
    check_state_dim(s, n, e);
    if (max_abs(s.D) > 0)
      throw std::invalid_argument(
          "energy-to-peak needs zero feedthrough in every mode");
    const Eigen::Index di = s.input_dim(), dz = s.output_dim();
    AffineMatrix Xi = var(*X.at(e.tail));
    AffineMatrix Xj = var(*X.at(e.head));
    AffineMatrix mid = form == Form::schur ? Xi : var(*G.at(e.tail));
    AffineMatrix slot = form == Form::schur ? Xi : mid + mid.transpose() - Xi;
    {
      SymBuilder sb({n, n, di});
      sb.set(0, 0, Xj);
      sb.set(0, 1, AffineMatrix::fixed(s.A) * mid);
      sb.set(0, 2, AffineMatrix::fixed(s.B));
      sb.set(1, 1, slot);
      sb.set(2, 2, gI(di));
      pb.blocks.push_back(make_block(
          sb.take(), Sense::pos_def,
          edge_tag("energy-to-peak[" + to_string(form) + "]", e)));
    }
    if (seen_out.insert({e.tail, e.label}).second) {
      SymBuilder sb({n, dz});
      sb.set(0, 0, slot);
      sb.set(0, 1, (AffineMatrix::fixed(s.C) * mid).transpose());
      sb.set(1, 1, gI(dz));
      pb.blocks.push_back(make_block(
          sb.take(), Sense::pos_def,
          out_tag("energy-to-peak[" + to_string(form) + "]", e.tail, e.label)));
    }
  }
  return pb;
}

LmiProblem assemble_robust_stability(const ConstrainingGraph& g,
                                     const LfrAt& lfr, int state_dim,
                                     const MultiplierClass& mult) {
  require_valid(g);
  const int n = state_dim;
  LmiProblem pb;
  auto X = node_storage(pb.vars, g, "X", n, false, true);
  std::vector<LmiBlock> mult_blocks;
  std::set<int> mult_done;
  for (const Edge& e : g.edges) {
    LfrMode L = lfr(e.tail, e.label);
    if (L.state_dim() != n)
      throw std::invalid_argument("state dimension mismatch at edge label " +
                                  std::to_string(e.label));
    const Eigen::Index dwu = L.unc_in(), dzu = L.unc_out();
    MatrixXd AB(n, n + dwu);
    AB << L.A, L.B_wu;
    AffineMatrix M = AffineMatrix::fixed(AB.transpose()) * var(*X.at(e.head)) *
                     AffineMatrix::fixed(AB);
    M.add_block(0, 0, -var(*X.at(e.tail)));
    if (dwu > 0 || dzu > 0) {
      MultiplierBlocks mb = direct_multiplier(
          mult, pb.vars, e.label, static_cast<int>(dwu), static_cast<int>(dzu));
      MatrixXd top = MatrixXd::Zero(dwu, n + dwu);
      top.rightCols(dwu).setIdentity();
      MatrixXd bot(dzu, n + dwu);
      bot << L.C_zu, L.D_zuwu;
      M += quad_form(mb.Q, mb.S, mb.R, top, bot);
      if (mb.var_id >= 0 && mult_done.insert(e.label).second)
        mult_blocks.push_back(
            make_block(AffineMatrix::term(mb.var_id, MatrixXd::Ones(1, 1)),
                       Sense::pos_semi, mult_tag(e.label)));
    }
    pb.blocks.push_back(make_block(
        std::move(M), Sense::neg_def, edge_tag("robust-stability", e)));
  }
  for (int i : g.nodes)
    pb.blocks.push_back(
        make_block(var(*X.at(i)), Sense::pos_def, node_tag("storage", i)));
  for (auto& b : mult_blocks) pb.blocks.push_back(std::move(b));
  return pb;
}

LmiProblem assemble_robust_performance(const ConstrainingGraph& g,
                                       const LfrAt& lfr, int state_dim,
                                       const PerformanceIndex& p, Form form,
                                       const MultiplierClass& mult,
                                       bool shared_slack) {
  require_valid(g);
  if (form != Form::primal && form != Form::dual_slack)
    throw std::invalid_argument(
        "robust performance supports primal and dual-slack forms");
  if (shared_slack && form != Form::dual_slack)
    throw std::invalid_argument("shared slack needs a slack form");
  const int n = state_dim;
  LmiProblem pb;
  auto X = node_storage(pb.vars, g, form == Form::primal ? "X" : "Xt", n,
                        false, true);
  std::map<int, const MatrixVariable*> G;
  if (form == Form::dual_slack)
    G = node_storage(pb.vars, g, "G", n, shared_slack, false);

  std::vector<LmiBlock> mult_blocks;
  std::set<int> mult_done;
  auto sign_block = [&](const MultiplierBlocks& mb, int label) {
    if (mb.var_id >= 0 && mult_done.insert(label).second)
      mult_blocks.push_back(
          make_block(AffineMatrix::term(mb.var_id, MatrixXd::Ones(1, 1)),
                     Sense::pos_semi, mult_tag(label)));
  };

  for (const Edge& e : g.edges) {
    LfrMode L = lfr(e.tail, e.label);
    if (L.state_dim() != n)
      throw std::invalid_argument("state dimension mismatch at edge label " +
                                  std::to_string(e.label));
    const Eigen::Index dwu = L.unc_in(), dwp = L.perf_in(), dzu = L.unc_out(),
                       dzp = L.perf_out();
    const QuadraticIndex& q = p.at(e.label);
    require_index_dims(q, dwp, dzp, "robust performance");
    const std::string tag =
        edge_tag("robust-performance[" + to_string(form) + "]", e);

    if (form == Form::primal) {
      MatrixXd ABB(n, n + dwu + dwp);
      ABB << L.A, L.B_wu, L.B_wp;
      AffineMatrix M = AffineMatrix::fixed(ABB.transpose()) *
                       var(*X.at(e.head)) * AffineMatrix::fixed(ABB);
      M.add_block(0, 0, -var(*X.at(e.tail)));
      if (dwu > 0 || dzu > 0) {
        MultiplierBlocks mb =
            direct_multiplier(mult, pb.vars, e.label, static_cast<int>(dwu),
                              static_cast<int>(dzu));
        MatrixXd top = MatrixXd::Zero(dwu, n + dwu + dwp);
        top.middleCols(n, dwu).setIdentity();
        MatrixXd bot(dzu, n + dwu + dwp);
        bot << L.C_zu, L.D_zuwu, L.D_zuwp;
        M += quad_form(mb.Q, mb.S, mb.R, top, bot);
        sign_block(mb, e.label);
      }
      {
        MatrixXd top = MatrixXd::Zero(dwp, n + dwu + dwp);
        top.rightCols(dwp).setIdentity();
        MatrixXd bot(dzp, n + dwu + dwp);
        bot << L.C_zp, L.D_zpwu, L.D_zpwp;
        M += quad_form(AffineMatrix::fixed(q.Q), AffineMatrix::fixed(q.S),
                       AffineMatrix::fixed(q.R), top, bot);
      }
      pb.blocks.push_back(make_block(std::move(M), Sense::neg_def, tag));
    } else {
      QuadraticIndex inv = dual_inverse(q, "robust performance");
      StateSpace st = stack_channels(L);
      // Augmented inverse index: diag of inverse multiplier and inverse
      // performance blocks over stacked (w_u, w_p) x (z_u, z_p).
      AffineMatrix Qt = AffineMatrix::zero(dwu + dwp, dwu + dwp);
      AffineMatrix Rt = AffineMatrix::zero(dzu + dzp, dzu + dzp);
      MatrixXd St = MatrixXd::Zero(dwu + dwp, dzu + dzp);
      Qt.add_block(dwu, dwu, AffineMatrix::fixed(inv.Q));
      Rt.add_block(dzu, dzu, AffineMatrix::fixed(inv.R));
      St.bottomRightCorner(dwp, dzp) = inv.S;
      if (dwu > 0 || dzu > 0) {
        MultiplierBlocks mb =
            inverse_multiplier(mult, pb.vars, e.label, static_cast<int>(dwu),
                               static_cast<int>(dzu));
        Qt.add_block(0, 0, mb.Q);
        Rt.add_block(0, 0, mb.R);
        if (mb.var_id < 0) St.topLeftCorner(dwu, dzu) = mb.S.constant_part();
        sign_block(mb, e.label);
      }
      AffineMatrix Xi = var(*X.at(e.tail));
      AffineMatrix mid = var(*G.at(e.tail));
      AffineMatrix slot = mid + mid.transpose() - Xi;
      pb.blocks.push_back(make_block(
          dual_block(slot, (AffineMatrix::fixed(st.A) * mid).transpose(),
                     (AffineMatrix::fixed(st.C) * mid).transpose(),
                     var(*X.at(e.head)), st.B, st.D, Qt, St, Rt),
          Sense::pos_def, tag));
    }
  }
  if (form == Form::primal)
    for (int i : g.nodes)
      pb.blocks.push_back(
          make_block(var(*X.at(i)), Sense::pos_def, node_tag("storage", i)));
  for (auto& b : mult_blocks) pb.blocks.push_back(std::move(b));
  return pb;
}

namespace {

struct GainVars {
  std::map<int, const MatrixVariable*> X;  // inverse storage, per node
  std::map<int, const MatrixVariable*> mid;  // Xt or G, honoring sharing
  std::map<int, const MatrixVariable*> Z;
};

// Synthesis storage: schur forms tie Xt (and Z) when the gain is shared;
// slack forms keep Xt per node and tie G and Z.
GainVars synthesis_storage(VariableSpace& vs, const ConstrainingGraph& g,
                           int n, int m_u, Form form, bool shared_gain) {
  GainVars gv;
  const bool slack = is_slack(form);
  if (!slack) {
    gv.X = node_storage(vs, g, "Xt", n, shared_gain, true);
    gv.mid = gv.X;
  } else {
    gv.X = node_storage(vs, g, "Xt", n, false, true);
    gv.mid = node_storage(vs, g, "G", n, shared_gain, false);
  }
  gv.Z = gain_storage(vs, g, m_u, n, shared_gain);
  return gv;
}

}  // namespace

LmiProblem assemble_synthesis(const ConstrainingGraph& g, const OpenLoopAt& ol,
                              int state_dim, const PerformanceIndex& p,
                              Form form, bool shared_gain) {
  require_valid(g);
  if (form == Form::primal || form == Form::dual)
    throw std::invalid_argument(
        "synthesis needs a factored form (schur, slack, or their duals)");
  const int n = state_dim;
  const int m_u = static_cast<int>(ol(g.edges.front().label).ctrl.B_u.cols());
  LmiProblem pb;
  GainVars gv = synthesis_storage(pb.vars, g, n, m_u, form, shared_gain);

  for (const Edge& e : g.edges) {
    OpenLoopMode m = ol(e.label);
    require_consistent(m.sys, "synthesis mode");
    check_state_dim(m.sys, n, e);
    if (m.ctrl.B_u.rows() != n || m.ctrl.B_u.cols() != m_u ||
        m.ctrl.D_u.rows() != m.sys.output_dim() || m.ctrl.D_u.cols() != m_u)
      throw std::invalid_argument("control channel shape mismatch");
    const Eigen::Index di = m.sys.input_dim(), dz = m.sys.output_dim();
    const QuadraticIndex& q = p.at(e.label);
    require_index_dims(q, di, dz, "synthesis");
    AffineMatrix Xi = var(*gv.X.at(e.tail));
    AffineMatrix Xj = var(*gv.X.at(e.head));
    AffineMatrix Z = var(*gv.Z.at(e.tail));
    AffineMatrix mid = var(*gv.mid.at(e.tail));
    AffineMatrix slot =
        is_slack(form) ? mid + mid.transpose() - Xi : Xi;
    AffineMatrix Acpl =
        AffineMatrix::fixed(m.sys.A) * mid + AffineMatrix::fixed(m.ctrl.B_u) * Z;
    AffineMatrix Ccpl =
        AffineMatrix::fixed(m.sys.C) * mid + AffineMatrix::fixed(m.ctrl.D_u) * Z;
    const std::string tag = edge_tag("synthesis[" + to_string(form) + "]", e);
    if (form == Form::schur || form == Form::slack) {
      IndexDecomposition dec = decompose_R(q.R);
      pb.blocks.push_back(
          make_block(factored_block(Xj, slot, Acpl, Ccpl, m.sys.B, m.sys.D,
                                    AffineMatrix::fixed(q.Q), q.S, dec.U),
                     Sense::pos_def, tag));
    } else {
      QuadraticIndex inv = dual_inverse(q, "synthesis");
      pb.blocks.push_back(make_block(
          dual_block(slot, Acpl.transpose(), Ccpl.transpose(), Xj, m.sys.B,
                     m.sys.D, AffineMatrix::fixed(inv.Q), inv.S,
                     AffineMatrix::fixed(inv.R)),
          Sense::pos_def, tag));
    }
  }
  return pb;
}

LmiProblem assemble_l2_min_synthesis(const ConstrainingGraph& g,
                                     const OpenLoopAt& ol, int state_dim,
                                     Form form, bool shared_gain) {
  require_valid(g);
  if (form != Form::schur && form != Form::slack)
    throw std::invalid_argument(
        "direct gain minimization needs the schur or slack synthesis form");
  const int n = state_dim;
  const int m_u = static_cast<int>(ol(g.edges.front().label).ctrl.B_u.cols());
  LmiProblem pb;
  GainVars gv = synthesis_storage(pb.vars, g, n, m_u, form, shared_gain);
  const MatrixVariable& t = pb.vars.add_scalar("t");
  pb.objective_id = t.offset;

  for (const Edge& e : g.edges) {
    OpenLoopMode m = ol(e.label);
    require_consistent(m.sys, "synthesis mode");
    check_state_dim(m.sys, n, e);
    const Eigen::Index di = m.sys.input_dim(), dz = m.sys.output_dim();
    AffineMatrix Xi = var(*gv.X.at(e.tail));
    AffineMatrix Xj = var(*gv.X.at(e.head));
    AffineMatrix Z = var(*gv.Z.at(e.tail));
    AffineMatrix mid = var(*gv.mid.at(e.tail));
    AffineMatrix slot = is_slack(form) ? mid + mid.transpose() - Xi : Xi;
    AffineMatrix Acpl =
        AffineMatrix::fixed(m.sys.A) * mid + AffineMatrix::fixed(m.ctrl.B_u) * Z;
    AffineMatrix Ccpl =
        AffineMatrix::fixed(m.sys.C) * mid + AffineMatrix::fixed(m.ctrl.D_u) * Z;
    pb.blocks.push_back(make_block(
        factored_block(Xj, slot, Acpl, Ccpl, m.sys.B, m.sys.D,
                       AffineMatrix::term(t.offset,
                                          -MatrixXd::Identity(di, di)),
                       MatrixXd::Zero(di, dz), MatrixXd::Identity(dz, dz)),
        Sense::pos_def, edge_tag("l2-synthesis[" + to_string(form) + "]", e)));
  }
  return pb;
}

LmiProblem assemble_robust_synthesis(const ConstrainingGraph& g,
                                     const OpenLoopLfrAt& ol, int state_dim,
                                     const PerformanceIndex& p,
                                     const MultiplierClass& mult,
                                     bool shared_gain) {
  require_valid(g);
  const int n = state_dim;
  const int m_u = static_cast<int>(ol(g.edges.front().label).B_u.cols());
  LmiProblem pb;
  GainVars gv =
      synthesis_storage(pb.vars, g, n, m_u, Form::dual_slack, shared_gain);

  std::vector<LmiBlock> mult_blocks;
  std::set<int> mult_done;
  for (const Edge& e : g.edges) {
    OpenLoopLfrMode m = ol(e.label);
    require_consistent(m.lfr);
    if (m.lfr.state_dim() != n)
      throw std::invalid_argument("state dimension mismatch at edge label " +
                                  std::to_string(e.label));
    const Eigen::Index dwu = m.lfr.unc_in(), dwp = m.lfr.perf_in(),
                       dzu = m.lfr.unc_out(), dzp = m.lfr.perf_out();
    if (m.B_u.rows() != n || m.B_u.cols() != m_u ||
        m.D_zu_u.rows() != dzu || m.D_zu_u.cols() != m_u ||
        m.D_zp_u.rows() != dzp || m.D_zp_u.cols() != m_u)
      throw std::invalid_argument("control channel shape mismatch");
    const QuadraticIndex& q = p.at(e.label);
    require_index_dims(q, dwp, dzp, "robust synthesis");
    QuadraticIndex inv = dual_inverse(q, "robust synthesis");

    StateSpace st = stack_channels(m.lfr);
    MatrixXd Du(dzu + dzp, m_u);
    Du << m.D_zu_u, m.D_zp_u;
    AffineMatrix Qt = AffineMatrix::zero(dwu + dwp, dwu + dwp);
    AffineMatrix Rt = AffineMatrix::zero(dzu + dzp, dzu + dzp);
    MatrixXd St = MatrixXd::Zero(dwu + dwp, dzu + dzp);
    Qt.add_block(dwu, dwu, AffineMatrix::fixed(inv.Q));
    Rt.add_block(dzu, dzu, AffineMatrix::fixed(inv.R));
    St.bottomRightCorner(dwp, dzp) = inv.S;
    if (dwu > 0 || dzu > 0) {
      MultiplierBlocks mb = inverse_multiplier(
          mult, pb.vars, e.label, static_cast<int>(dwu), static_cast<int>(dzu));
      Qt.add_block(0, 0, mb.Q);
      Rt.add_block(0, 0, mb.R);
      if (mb.var_id < 0) St.topLeftCorner(dwu, dzu) = mb.S.constant_part();
      if (mb.var_id >= 0 && mult_done.insert(e.label).second)
        mult_blocks.push_back(
            make_block(AffineMatrix::term(mb.var_id, MatrixXd::Ones(1, 1)),
                       Sense::pos_semi, mult_tag(e.label)));
    }
    AffineMatrix Xi = var(*gv.X.at(e.tail));
    AffineMatrix mid = var(*gv.mid.at(e.tail));
    AffineMatrix Z = var(*gv.Z.at(e.tail));
    AffineMatrix slot = mid + mid.transpose() - Xi;
    AffineMatrix Acpl =
        AffineMatrix::fixed(st.A) * mid + AffineMatrix::fixed(m.B_u) * Z;
    AffineMatrix Ccpl =
        AffineMatrix::fixed(st.C) * mid + AffineMatrix::fixed(Du) * Z;
    pb.blocks.push_back(make_block(
        dual_block(slot, Acpl.transpose(), Ccpl.transpose(),
                   var(*gv.X.at(e.head)), st.B, st.D, Qt, St, Rt),
        Sense::pos_def, edge_tag("robust-synthesis", e)));
  }
  for (auto& b : mult_blocks) pb.blocks.push_back(std::move(b));
  return pb;
}

}  // namespace csls
