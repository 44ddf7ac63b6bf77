#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csls/lmi.hpp"

namespace csls {

// A solved problem frozen into named variable values plus the metadata needed
// to rebuild the same program and re-check it independently of the solver.
struct Certificate {
  std::string criterion;  // l2 | quadratic | energy-to-peak
  std::string mode = "nominal";  // nominal | robust | fixed-delta
  std::string form;       // empty when the criterion has a single shape
  bool synthesis = false;
  bool shared = false;  // shared slack/gain across nodes
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  std::optional<MultiplierClass> multiplier;  // robust mode only
  std::map<std::string, MatrixXd> values;

  bool has(const std::string& name) const;
  const MatrixXd& at(const std::string& name) const;
};

// Snapshots every variable of a solved problem by name.
Certificate extract_certificate(const LmiProblem& pb, const VectorXd& y);

std::string certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const std::string& text);
void write_certificate(const Certificate& c, const std::string& path);
Certificate read_certificate(const std::string& path);

// Residual re-check: every block is re-evaluated at the certificate point.
// Strict blocks pass while they retain half their strictness shift; soft
// blocks tolerate rounding at the data scale.
struct ResidualEntry {
  std::string tag;
  Sense sense = Sense::pos_def;
  double margin = 0.0;     // shifted margin, negative means violated
  double tolerance = 0.0;  // pass iff margin >= -tolerance
  bool pass = false;
};
struct ResidualReport {
  std::vector<ResidualEntry> entries;
  bool pass = true;
  double worst = std::numeric_limits<double>::infinity();
};
ResidualReport check_residuals(const LmiProblem& pb, const Certificate& cert);

// State-feedback gains recovered from a synthesis certificate.
struct Controller {
  bool shared = false;
  std::map<int, MatrixXd> K;  // node -> (m_u x n)

  const MatrixXd& at(int node) const;
};

// K_i = Z_i * mid_i^{-1} where mid is the slack G (slack forms) or the
// inverse storage (factored forms). Refuses mids with condition above 1e12.
Controller recover_controller(const Certificate& cert,
                              const ConstrainingGraph& g);

std::string controller_to_json(const Controller& c);
Controller controller_from_json(const std::string& text);
void write_controller(const Controller& c, const std::string& path);
Controller read_controller(const std::string& path);

// Closed performance channel: A + B_u K_i, C + D_u K_i.
SystemAt close_loop(const CslsModel& model, const Controller& ctrl);

// Closed uncertain family: the gain also enters the uncertainty output.
LfrAt close_lfr_family(const CslsModel& model, const Controller& ctrl);

// Fixed-uncertainty closure w_u = Delta z_u; throws when I - D_zuwu * Delta
// is singular (ill-posed interconnection).
StateSpace close_lfr(const LfrMode& m, const MatrixXd& Delta);
MatrixXd scaled_identity_delta(const LfrMode& m, double delta);

// Performance channel of the uncertain model at w_u = delta * z_u, without
// and with a controller in the loop.
SystemAt fixed_delta(const CslsModel& model, double delta);
SystemAt close_uncertain(const CslsModel& model, const Controller& ctrl,
                         double delta);

}  // namespace csls
