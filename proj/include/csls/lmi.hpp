#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "csls/affine.hpp"
#include "csls/model.hpp"

namespace csls {

// Realization lookup keyed by (node, label). Open-loop families ignore the
// node; closed loops resolve per node.
using SystemAt = std::function<StateSpace(int node, int label)>;
SystemAt by_label(const SystemFamily& f);

// Factorization R = U^T Rt^{-1} U with Rt = I_rank. Drops eigenvalues below
// rank_tol * max(1, lambda_max); negative eigenvalues beyond the same
// tolerance are rejected.
struct IndexDecomposition {
  MatrixXd U;
  MatrixXd Rt;
};
IndexDecomposition decompose_R(const MatrixXd& R, double rank_tol = 1e-9);

// Blocks of [[Q,S],[S^T,R]]^{-1} with the same partition sizes.
struct InverseIndex {
  QuadraticIndex blocks;
  double condition = 0.0;
};
InverseIndex invert_index(const QuadraticIndex& p);

// Quadratic index of the squared l2 gain: Q = -g2*I, S = 0, R = I.
QuadraticIndex l2_squared_index(double gain_squared, int d_in, int d_out);

enum class Form { primal, schur, slack, dual, dual_schur, dual_slack };
std::string to_string(Form f);
Form form_from_string(const std::string& s);
// True when node storage is X-inverse (all forms except primal ones).
bool inverse_storage(Form f);
bool is_slack(Form f);

// Uncertainty multiplier class for robust conditions. The scalar kinds
// certify |delta| <= bound; full_block takes a user-supplied numeric
// multiplier valid for the user's uncertainty set.
struct MultiplierClass {
  enum class Kind { scalar_norm_bounded, repeated_scalar, full_block };
  Kind kind = Kind::scalar_norm_bounded;
  double bound = 1.0;
  QuadraticIndex fixed_P;  // full_block only, partitioned (w_u, z_u)
};

std::string to_string(MultiplierClass::Kind k);
MultiplierClass::Kind multiplier_kind_from_string(const std::string& s);

// One mode of the channel-extended realization:
//   x+ = A x + B_wu w_u + B_wp w_p
//   z_u = C_zu x + D_zuwu w_u + D_zuwp w_p
//   z_p = C_zp x + D_zpwu w_u + D_zpwp w_p
struct LfrMode {
  MatrixXd A, B_wu, B_wp, C_zu, C_zp, D_zuwu, D_zuwp, D_zpwu, D_zpwp;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index unc_in() const { return B_wu.cols(); }
  Eigen::Index perf_in() const { return B_wp.cols(); }
  Eigen::Index unc_out() const { return C_zu.rows(); }
  Eigen::Index perf_out() const { return C_zp.rows(); }
};
void require_consistent(const LfrMode& m);
using LfrAt = std::function<LfrMode(int node, int label)>;

// Builds the extended mode for one label of a model with an uncertainty
// channel (control channel untouched; see open_loop_lfr for synthesis).
LfrMode lfr_mode(const CslsModel& m, int label);
LfrAt by_label_lfr(const CslsModel& m);

// Merges the uncertainty and performance channels of an extended mode into
// one nominal-shaped realization over stacked inputs (w_u, w_p) and outputs
// (z_u, z_p).
StateSpace stack_channels(const LfrMode& m);

// Open-loop data for synthesis, per label.
struct OpenLoopMode {
  StateSpace sys;       // A, B (perf in), C (perf out), D
  ControlChannel ctrl;  // B_u, D_u into the performance output
};
using OpenLoopAt = std::function<OpenLoopMode(int label)>;
OpenLoopAt open_loop(const CslsModel& m);

struct OpenLoopLfrMode {
  LfrMode lfr;
  MatrixXd B_u;     // state injection
  MatrixXd D_zu_u;  // control feedthrough into z_u
  MatrixXd D_zp_u;  // control feedthrough into z_p
};
using OpenLoopLfrAt = std::function<OpenLoopLfrMode(int label)>;
OpenLoopLfrAt open_loop_lfr(const CslsModel& m);

// ---- Analysis assemblies ----------------------------------------------

// Uniform exponential stability: per edge (i,j,l) one cone
// [[X_i, A^T X_j],[X_j A, X_j]] > 0.
LmiProblem assemble_stability(const ConstrainingGraph& g, const SystemAt& sys,
                              int state_dim);

// Dissipativity with respect to a fixed quadratic index, in any of the six
// equivalent forms. shared_slack ties the slack variable across nodes in the
// slack forms.
LmiProblem assemble_dissipativity(const ConstrainingGraph& g,
                                  const SystemAt& sys, int state_dim,
                                  const PerformanceIndex& p, Form form,
                                  bool shared_slack = false);

// Minimizes t = gamma^2 for the l2 index (affine in t); forms primal, schur,
// slack. The objective variable is named "t".
LmiProblem assemble_l2_min(const ConstrainingGraph& g, const SystemAt& sys,
                           int state_dim, Form form, bool shared_slack = false);

// Energy-to-peak level gamma (requires D = 0 in every mode): per edge
// [[Xt_j, A Xt_i, B],[., Xt_i, 0],[., ., g I]] > 0 and per (tail, label)
// [[Xt_i, Xt_i C^T],[C Xt_i, g I]] > 0; affine in gamma, so gamma is
// minimized directly when no level is given. Forms schur and slack.
LmiProblem assemble_energy_to_peak(const ConstrainingGraph& g,
                                   const SystemAt& sys, int state_dim,
                                   Form form, bool shared_slack = false,
                                   std::optional<double> gamma = std::nullopt);

// ---- Robust analysis assemblies ----------------------------------------

// Robust stability against the multiplier's uncertainty set (primal form).
LmiProblem assemble_robust_stability(const ConstrainingGraph& g,
                                     const LfrAt& lfr, int state_dim,
                                     const MultiplierClass& mult);

// Robust dissipativity in the performance channel. Forms: primal (direct
// storage, multiplier parameters a_l) or dual_slack (inverse storage,
// inverse multiplier parameters b_l, slack G per node or shared).
LmiProblem assemble_robust_performance(const ConstrainingGraph& g,
                                       const LfrAt& lfr, int state_dim,
                                       const PerformanceIndex& p, Form form,
                                       const MultiplierClass& mult,
                                       bool shared_slack = false);

// ---- Synthesis assemblies -----------------------------------------------

// Node-indexed static gains via the substitution Z = K * (Xt or G).
// Forms schur (shares Xt when shared_gain) and slack (shares G and Z,
// keeping Xt per node). Fixed quadratic index.
LmiProblem assemble_synthesis(const ConstrainingGraph& g, const OpenLoopAt& ol,
                              int state_dim, const PerformanceIndex& p,
                              Form form, bool shared_gain);

// Same with the l2 index and t = gamma^2 minimized (variable "t").
LmiProblem assemble_l2_min_synthesis(const ConstrainingGraph& g,
                                     const OpenLoopAt& ol, int state_dim,
                                     Form form, bool shared_gain);

// Robust synthesis: dual_slack robust performance on the augmented channel
// with the gain substitution. Shared gain requires the shared slack.
LmiProblem assemble_robust_synthesis(const ConstrainingGraph& g,
                                     const OpenLoopLfrAt& ol, int state_dim,
                                     const PerformanceIndex& p,
                                     const MultiplierClass& mult,
                                     bool shared_gain);

// Variable naming used by all assemblies (node/label suffixes appended
// after a colon, e.g. "X:2", "G" when shared, "mult:1"):
//   X    direct node storage      Xt   inverse node storage
//   G    slack                    Z    gain substitution
//   mult multiplier parameter     t    scalar objective
std::string node_var(const std::string& base, int node);
std::string label_var(const std::string& base, int label);

}  // namespace csls
