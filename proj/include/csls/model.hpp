#pragma once

#include <map>
#include <optional>

#include "csls/graph.hpp"
#include "csls/system.hpp"

namespace csls {

// Control channel per label: x+ gains B_u u, z gains D_u u.
struct ControlChannel {
  MatrixXd B_u, D_u;
};

// Scalar-structured uncertainty channel per label, w_u = delta * z_u with
// |delta| <= 1 (matrix blocks allowed; dimensions set the channel size):
//   x+  = A x + B_wu w_u + B w        + B_u u
//   z_u = C_zu x + D_zuwu w_u + D_zuwp w + D_zu_u u
//   z   = C x + D_zpwu w_u + D w      + D_u u
struct UncertaintyChannel {
  MatrixXd B_wu, C_zu, D_zuwu, D_zuwp, D_zpwu, D_zu_u;
};

// A constrained switching model: constraining graph, per-label performance
// channel (A, B, C, D), optional control and uncertainty channels, optional
// stored supply-rate index.
struct CslsModel {
  ConstrainingGraph graph;
  SystemFamily systems;
  std::map<int, ControlChannel> control;
  std::map<int, UncertaintyChannel> uncertainty;
  std::optional<PerformanceIndex> index;

  bool has_control() const { return !control.empty(); }
  bool has_uncertainty() const { return !uncertainty.empty(); }
};

// Structural validation across all present sections (graph, systems, index
// via validate_pairing; channel shapes against per-label dimensions).
std::vector<std::string> validate_model(const CslsModel& m);
void require_valid_model(const CslsModel& m);

}  // namespace csls
