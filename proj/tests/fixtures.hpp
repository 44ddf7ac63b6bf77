#pragma once

#include <random>

#include "csls/whrt.hpp"

namespace fx {

// Double-integrator-flavored demo plant with unit actuator-gain
// uncertainty; open loop is unstable.
inline csls::BasePlant demo_plant(bool uncertain = true) {
  csls::BasePlant p;
  p.A = Eigen::MatrixXd{{0, 1}, {1, 1}};
  p.B_w = Eigen::MatrixXd{{1}, {1}};
  p.B_u = Eigen::MatrixXd{{0}, {1}};
  p.C = Eigen::MatrixXd{{1, 1}};
  p.D_w = Eigen::MatrixXd{{1}};
  p.D_u = Eigen::MatrixXd{{1}};
  if (uncertain) {
    p.B_u_delta = Eigen::MatrixXd{{0}, {1}};
    p.D_u_delta = Eigen::MatrixXd{{1}};
  }
  return p;
}

// Two-of-three window constraint compiled by hand.
inline csls::ConstrainingGraph two_of_three_graph() {
  csls::ConstrainingGraph g;
  g.nodes = {1, 2};
  g.edges = {{1, 1, 1}, {1, 2, 2}, {2, 1, 1}};
  g.num_labels = 2;
  return g;
}

inline csls::CslsModel demo_model(csls::Strategy s = csls::Strategy::zero,
                                  bool uncertain = true) {
  return csls::compile_whrt(demo_plant(uncertain), {3, 2}, s);
}

// Demo variant whose actuator uncertainty reaches only the performance
// output.  The full-channel plant above is not robustly certifiable over the
// whole unit disc: at delta = -1 the actuator gain (1+delta) vanishes and the
// admissible all-success walk runs the unstable open loop, so no controller
// can satisfy the robust LMIs.  Keeping the state equation certain preserves
// feasibility and is what the reference bounds for this example correspond to.
inline csls::BasePlant demo_plant_output_uncertain() {
  csls::BasePlant p = demo_plant(false);
  p.B_u_delta = Eigen::MatrixXd::Zero(2, 1);
  p.D_u_delta = Eigen::MatrixXd{{1}};
  return p;
}

inline csls::CslsModel demo_model_robust(
    csls::Strategy s = csls::Strategy::zero) {
  return csls::compile_whrt(demo_plant_output_uncertain(), {3, 2}, s);
}

// Single-label self-loop model around one mode.
inline csls::CslsModel single_mode_model(const csls::StateSpace& s) {
  csls::CslsModel m;
  m.graph.nodes = {1};
  m.graph.edges = {{1, 1, 1}};
  m.graph.num_labels = 1;
  m.systems.systems.emplace(1, s);
  return m;
}

inline csls::CslsModel scalar_model(double a = 0.5, double b = 1.0,
                                    double c = 1.0, double d = 0.0) {
  csls::StateSpace s;
  s.A = Eigen::MatrixXd{{a}};
  s.B = Eigen::MatrixXd{{b}};
  s.C = Eigen::MatrixXd{{c}};
  s.D = Eigen::MatrixXd{{d}};
  return single_mode_model(s);
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd M(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) M(i, j) = d(rng);
  }
  return M;
}

// Random plant with spectral radius scaled into (0, rho_max).
inline csls::BasePlant random_plant(std::mt19937_64& rng, int n, int dw,
                                    int du, int dz, bool uncertain,
                                    double rho_max = 1.5) {
  csls::BasePlant p;
  p.A = random_matrix(rng, n, n);
  const double rho = p.A.eigenvalues().cwiseAbs().maxCoeff();
  std::uniform_real_distribution<double> u(0.1, rho_max);
  if (rho > 1e-9) p.A *= u(rng) / rho;
  p.B_w = random_matrix(rng, n, dw);
  p.B_u = random_matrix(rng, n, du);
  p.C = random_matrix(rng, dz, n);
  p.D_w = random_matrix(rng, dz, dw);
  p.D_u = random_matrix(rng, dz, du);
  if (uncertain) {
    p.B_u_delta = random_matrix(rng, n, du);
    p.D_u_delta = random_matrix(rng, dz, du);
  }
  return p;
}

}  // namespace fx
