#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "csls/graph.hpp"
#include "csls/matrix.hpp"

namespace csls {

// One mode: x+ = A x + B w, z = C x + D w.
struct StateSpace {
  MatrixXd A, B, C, D;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }
  Eigen::Index output_dim() const { return C.rows(); }
};

// Throws std::invalid_argument on inconsistent block shapes.
void require_consistent(const StateSpace& s, const std::string& what);

// Label-keyed mode family sharing one state dimension; input/output
// dimensions may vary per label.
struct SystemFamily {
  std::map<int, StateSpace> systems;

  const StateSpace& at(int label) const;
  Eigen::Index state_dim() const;
};

// Supply-rate blocks for [w; z]^T [[Q, S], [S^T, R]] [w; z], per label.
// Q is d_i x d_i symmetric, S is d_i x d_o, R is d_o x d_o symmetric.
struct QuadraticIndex {
  MatrixXd Q, S, R;
};

struct PerformanceIndex {
  std::map<int, QuadraticIndex> entries;

  const QuadraticIndex& at(int label) const;
};

// Checks that every edge label has a system, state dimensions agree, and
// (when given) index blocks match the per-label signal dimensions and are
// symmetric. Returns human-readable violations; empty means valid.
std::vector<std::string> validate_pairing(const ConstrainingGraph& g,
                                          const SystemFamily& f,
                                          const PerformanceIndex* p = nullptr);

void require_valid_pairing(const ConstrainingGraph& g, const SystemFamily& f,
                           const PerformanceIndex* p = nullptr);

// Induced-gain supply rate: Q = -gamma^2 I, S = 0, R = I per label, sized
// from the family or from per-label (input, output) dimensions. Requires
// gamma > 0.
using ChannelDims = std::map<int, std::pair<Eigen::Index, Eigen::Index>>;
PerformanceIndex l2_index(double gamma, const SystemFamily& f);
PerformanceIndex l2_index(double gamma, const ChannelDims& dims);

}  // namespace csls
