#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csls/certify.hpp"
#include "csls/lmi.hpp"
#include "csls/model.hpp"
#include "csls/sdp.hpp"

namespace csls {

// What is certified: induced l2 gain (level minimized), dissipativity with
// respect to the model's stored index (feasibility only), or the
// energy-to-peak level (minimized; requires D = 0).
enum class Criterion { l2, quadratic, energy_to_peak };
std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& s);

// Against what: the model as given, its whole uncertainty set, or the single
// plant at w_u = delta * z_u.
enum class Mode { nominal, robust, fixed_delta };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct AnalyzeConfig {
  Criterion criterion = Criterion::l2;
  Mode mode = Mode::nominal;
  double delta = 0.0;      // fixed_delta only
  Form form = Form::slack;
  bool shared_slack = false;
  MultiplierClass mult;    // robust only
  double bisect_lo = 1e-3;
  double bisect_hi = 1e6;
  double rel_tol = 1e-4;
  SolveOptions solver;
};

struct AnalysisReport {
  bool feasible = false;
  // Certified level for l2 / energy_to_peak; NaN for quadratic.
  double gamma = std::numeric_limits<double>::quiet_NaN();
  // Feasibility margin of the defining probe (bisected and quadratic runs).
  double margin = std::numeric_limits<double>::quiet_NaN();
  Certificate certificate;
  ResidualReport residuals;
  BisectionTrace trace;  // nonempty iff the level was bisected
  SolveResult solve;     // defining solve
};

// Certifies the model's performance channel as given; the controller
// overload closes the loop first (nominal and fixed_delta via the closed
// performance channel, robust via the closed uncertain family).
AnalysisReport analyze(const CslsModel& model, const AnalyzeConfig& cfg);
AnalysisReport analyze(const CslsModel& model, const Controller& ctrl,
                       const AnalyzeConfig& cfg);

// Reassembles the exact program a certificate was extracted from, using its
// metadata alone, so the stored values can be re-checked independently of
// the run that produced them. Analysis certificates of a closed loop need
// the controller that closed it; synthesis certificates embed the gain and
// are rebuilt from the open-loop model.
LmiProblem rebuild_problem(const CslsModel& model, const Certificate& cert);
LmiProblem rebuild_problem(const CslsModel& model, const Controller& ctrl,
                           const Certificate& cert);

struct SynthesizeConfig {
  Criterion criterion = Criterion::l2;  // l2 or quadratic
  Mode mode = Mode::nominal;            // nominal or robust
  Form form = Form::slack;              // schur or slack; robust is
                                        // dual_slack regardless
  bool shared_gain = true;
  MultiplierClass mult;  // robust only
  double bisect_lo = 1e-3;
  double bisect_hi = 1e6;
  double rel_tol = 1e-4;
  SolveOptions solver;
  bool reanalyze = true;  // closed-loop re-analysis summary
};

struct SynthesisReport {
  bool feasible = false;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  Certificate certificate;
  Controller controller;
  ResidualReport residuals;
  BisectionTrace trace;
  SolveResult solve;
  // Independent re-analysis of the closed loop under the same criterion and
  // mode (absent when synthesis failed or reanalyze was off).
  std::optional<AnalysisReport> closed_loop;
};

SynthesisReport synthesize(const CslsModel& model,
                           const SynthesizeConfig& cfg);

struct SweepRow {
  double delta = 0.0;
  AnalysisReport report;
};

// Fixed-delta analyses across levels, at most `jobs` rows in flight; the
// result order follows `deltas` regardless of scheduling. The controller
// overload analyzes the closed loop at each delta.
std::vector<SweepRow> sweep_delta(const CslsModel& model, AnalyzeConfig cfg,
                                  const std::vector<double>& deltas,
                                  int jobs = 1);
std::vector<SweepRow> sweep_delta(const CslsModel& model,
                                  const Controller& ctrl, AnalyzeConfig cfg,
                                  const std::vector<double>& deltas,
                                  int jobs = 1);

}  // namespace csls
