#pragma once

#include <functional>
#include <iosfwd>
#include <limits>

#include "csls/affine.hpp"

namespace csls {

// One lowered cone F0 + sum_i y_i F_i >= 0. Strict senses arrive here with
// their strictness margin already subtracted from F0 (recorded in `shift`);
// negative senses arrive sign-flipped.
struct ConeBlock {
  MatrixXd F0;
  std::map<int, MatrixXd> F;
  std::string tag;
  double shift = 0.0;

  Eigen::Index dim() const { return F0.rows(); }
  MatrixXd eval(const VectorXd& y) const;
};

struct ConicProgram {
  int num_vars = 0;
  VectorXd c;  // minimize c^T y; zero for feasibility
  std::vector<ConeBlock> blocks;
};

// Lowers blocks in order, dropping structurally zero coefficients. Throws
// std::logic_error if a declared variable never appears (singular programs
// indicate assembly bugs upstream).
ConicProgram lower(const LmiProblem& p);

enum class SolveStatus { optimal, inaccurate, infeasible, unbounded, failed };
std::string to_string(SolveStatus s);

struct SolveOptions {
  double tol = 1e-8;         // target relative residuals and gap
  double accept_tol = 1e-6;  // downgrade to `inaccurate` above tol
  // Acceptance is asymmetric: y's cone feasibility and the gap are the
  // certified quantities (and are re-validated downstream), while the
  // multiplier stationarity only perturbs the objective estimate by
  // O(dres * |y|), so a looser floor is tolerated before giving up.
  double accept_dual_tol = 5e-4;
  int max_iters = 500;
  double tau = 0.98;  // fraction-to-boundary
  int verbosity = 0;  // >= 2 traces iterations on stderr
};

struct SolveResult {
  SolveStatus status = SolveStatus::failed;
  VectorXd y;
  double objective = 0.0;
  int iterations = 0;
  double mu = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  std::string message;

  bool usable() const {
    return status == SolveStatus::optimal || status == SolveStatus::inaccurate;
  }
};

// Primal-dual path-following solver (HKM scaling, Mehrotra
// predictor-corrector) on the block-diagonal cone.
SolveResult solve(const ConicProgram& p, const SolveOptions& opt = {});

// Phase-I oracle: maximizes theta with every block shifted by -theta*I
// (theta capped above), so it is always strictly feasible and bounded. The
// lowered blocks already carry strictness shifts, hence feasibility of the
// original strict system is exactly margin >= 0.
struct MarginResult {
  double margin = -std::numeric_limits<double>::infinity();
  VectorXd y;  // maximizing point of the original variables
  SolveResult raw;

  bool feasible() const { return margin >= 0.0; }
};
MarginResult feasibility_margin(const LmiProblem& p,
                                const SolveOptions& opt = {});
MarginResult feasibility_margin(const ConicProgram& p,
                                const SolveOptions& opt = {});

struct BisectionPoint {
  double gamma = 0.0;
  double margin = 0.0;
  bool feasible = false;
};

struct BisectionTrace {
  std::vector<BisectionPoint> points;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  MarginResult best;  // probe result at the certified level
};

// Geometric bisection for the smallest certified-feasible level. Throws when
// the upper bracket probes infeasible or the probe verdicts are not monotone.
BisectionTrace bisect_gamma(const std::function<MarginResult(double)>& probe,
                            double lo = 1e-3, double hi = 1e6,
                            double rel_tol = 1e-4);

// SDPA sparse interchange (".dat-s"): min c^T x s.t. sum_k x_k F_k - F0 >= 0,
// written from our F0 + sum y_i F_i >= 0 with F0^file = -F0.
void write_sdpa(std::ostream& os, const ConicProgram& p);

struct SdpaSolution {
  SolveStatus status = SolveStatus::failed;
  VectorXd y;
  double obj_primal = 0.0;
  double obj_dual = 0.0;
  int iterations = 0;
};
SdpaSolution read_sdpa_solution(std::istream& is, int num_vars);

enum class SolverBackend { embedded, sdpa };
// CSLS_SDP_SOLVER: unset/"embedded" or "sdpa" (external binary on PATH).
SolverBackend selected_backend();
SolveResult solve_auto(const ConicProgram& p, const SolveOptions& opt = {});

}  // namespace csls
