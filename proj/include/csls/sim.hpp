#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>

#include "csls/certify.hpp"

namespace csls {

// One rollout along an admissible walk. Signals are blocked per label:
// w(t) and z(t) carry the input/output dimension of the step's label.
struct Trajectory {
  EdgeWalk walk;            // indices into graph.edges
  std::vector<int> nodes;   // visited nodes, length T+1
  std::vector<int> labels;  // per step, length T
  std::vector<VectorXd> x;  // length T+1
  std::vector<VectorXd> w;  // length T
  std::vector<VectorXd> z;  // length T
};

// Exact recursion x(t+1) = A x(t) + B w(t), z(t) = C x(t) + D w(t) with the
// step's (node, label) selecting the realization.
Trajectory simulate(const ConstrainingGraph& g, const SystemAt& f,
                    const EdgeWalk& walk, const VectorXd& x0,
                    const std::vector<VectorXd>& inputs);
Trajectory simulate(const ConstrainingGraph& g, const SystemFamily& f,
                    const EdgeWalk& walk, const VectorXd& x0,
                    const std::vector<VectorXd>& inputs);

// CSV dump: t, node, label, x..., w..., z... (one row per step).
void write_trajectory_csv(std::ostream& os, const Trajectory& t);

struct GainEstimate {
  double bound = 0.0;
  EdgeWalk walk;
  std::vector<VectorXd> input;  // achieving input for the walk
};

// Lower bound on the l2 gain: walks are sampled uniformly over outgoing
// edges (plus one greedy growth-chasing walk per start node), inputs are
// refined by power iteration on the walk's finite-horizon input-output
// operator. Deterministic for a given seed; trials own their generators and
// merge by max.
GainEstimate empirical_l2_lb(const ConstrainingGraph& g, const SystemAt& f,
                             int horizon, int trials, std::uint64_t seed,
                             int power_iters = 20);
GainEstimate empirical_l2_lb(const ConstrainingGraph& g,
                             const SystemFamily& f, int horizon, int trials,
                             std::uint64_t seed, int power_iters = 20);

// Lower bound on the energy-to-peak gain: per sampled walk and peak time the
// worst input is closed-form (the matched filter), so the per-walk bound is
// exact. Requires zero feedthrough.
GainEstimate empirical_peak_lb(const ConstrainingGraph& g, const SystemAt& f,
                               int horizon, int trials, std::uint64_t seed);
GainEstimate empirical_peak_lb(const ConstrainingGraph& g,
                               const SystemFamily& f, int horizon, int trials,
                               std::uint64_t seed);

// Node storages in direct form: reads X:i, or inverts Xt:i / shared Xt.
std::map<int, MatrixXd> storage_from_certificate(const Certificate& cert,
                                                 const std::vector<int>& nodes);

// Per-step dissipation slack V(x_t) - V(x_{t+1}) - s(w_t, z_t) with
// s = [w;z]' P_l [w;z]; nonnegative slacks certify the trajectory, and the
// telescoped sum bounds the accumulated supply.
struct DissipationAudit {
  std::vector<double> slacks;
  double telescoped = 0.0;
  double min_slack = 0.0;
};
DissipationAudit check_dissipation(const Trajectory& traj,
                                   const std::map<int, MatrixXd>& storage,
                                   const PerformanceIndex& p);

// Normalized norm of admissible products: by_length[k-1] is the max of
// ||A_{l_k} ... A_{l_1}||^{1/k} over admissible words of length exactly k,
// in spectral norm, exhaustive up to the extension budget. growth is the
// deepest-length value, the sharpest Gelfand-style estimate the audit
// produced: >= 1 flags instability risk (necessary, not sufficient), and on
// a truncated search it is only a lower bound on the true level maximum.
struct SpectralAudit {
  double growth = 0.0;
  std::vector<double> by_length;
  int depth = 0;         // deepest length reached (capped at 20)
  bool complete = true;  // false when the budget truncated the search
};
SpectralAudit spectral_audit(const ConstrainingGraph& g, const SystemAt& f,
                             int depth, std::uint64_t budget = 1000000);
SpectralAudit spectral_audit(const ConstrainingGraph& g,
                             const SystemFamily& f, int depth,
                             std::uint64_t budget = 1000000);

}  // namespace csls
