#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csls/model.hpp"

namespace csls {

// Weakly-hard window constraint: at least `min_hits` successful control
// attempts in every window of `window` consecutive attempts.
struct WhrtConstraint {
  int window = 1;    // n
  int min_hits = 1;  // k, rejected when < 1 (runs would be unbounded)
};

// What the actuator applies while attempts are lost.
enum class Strategy { zero, hold };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

// Outcome word, '1' = successful attempt, '0' = lost attempt.
using LossWord = std::string;

// Every complete window of length n contains >= k successes (vacuous for
// words shorter than n).
bool satisfies_window_rule(const LossWord& w, int n, int k);

// Exact membership in the factor language of bi-infinite admissible words:
// every window of length j <= min(|w|, n) contains >= k - (n - j)
// successes. Padding with successes shows sufficiency.
bool factor_admissible(const LossWord& w, int n, int k);

// Label l expands to a success followed by l-1 losses.
LossWord expand_labels(const std::vector<int>& labels);

// Splits a word starting with a success into block labels; throws on words
// that start with a loss.
std::vector<int> block_labels(const LossWord& w);

// Base plant under lifting:
//   x+ = A x + B_w w + B_u u,  z = C x + D_w w + D_u u,
// with optional actuator uncertainty B_u(delta) = B_u + delta*B_u_delta,
// D_u(delta) = D_u + delta*D_u_delta, |delta| <= 1 (empty matrices when
// certain), and an optional per-step supply rate.
struct BasePlant {
  MatrixXd A, B_w, B_u, C, D_w, D_u;
  MatrixXd B_u_delta, D_u_delta;
  std::optional<QuadraticIndex> index;

  bool has_uncertainty() const {
    return B_u_delta.size() > 0 || D_u_delta.size() > 0;
  }
};

void require_consistent(const BasePlant& p, const std::string& what);

// One lifted mode: performance channel plus the block's control column and
// (for uncertain plants) the uncertainty channel.
struct LiftedMode {
  StateSpace sys;
  ControlChannel ctrl;
  std::optional<UncertaintyChannel> unc;
};

// Lifts `l` base steps into one block step. The control input is applied at
// the first sub-step and zeroed (lift_zero) or held (lift_hold) afterwards.
LiftedMode lift_zero(const BasePlant& p, int l);
LiftedMode lift_hold(const BasePlant& p, int l);
LiftedMode lift_mode(const BasePlant& p, int l, Strategy s);

// Minimal constraining graph of the constraint: deterministic automaton
// over recent outcomes, loss runs contracted into labeled edges
// (label = run length + 1), then bisimulation-quotiented. Nodes are
// numbered from the all-success class in traversal order.
ConstrainingGraph compile_graph(int n, int k);

// Kronecker-blocked supply rate: label l gets (I_l (x) Q, I_l (x) S,
// I_l (x) R) matching the blocked signal layout.
PerformanceIndex lift_index(const QuadraticIndex& base,
                            const ConstrainingGraph& g);

// Full compilation: graph, lifted family per label, control and (when the
// plant is uncertain) uncertainty channels, lifted index when present.
CslsModel compile_whrt(const BasePlant& p, const WhrtConstraint& c,
                       Strategy s);

// Blocked-signal packing along a label walk; d is the per-sample dimension.
// pack consumes sum(labels) samples; unpack inverts it. Both preserve the
// summed squared norm.
std::vector<VectorXd> pack_signal(const std::vector<VectorXd>& base,
                                  const std::vector<int>& labels, int d);
std::vector<VectorXd> unpack_signal(const std::vector<VectorXd>& blocked,
                                    const std::vector<int>& labels, int d);

}  // namespace csls
