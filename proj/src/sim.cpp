#include "csls/sim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace csls {

namespace {

std::vector<int> walk_nodes(const ConstrainingGraph& g, const EdgeWalk& walk) {
  std::vector<int> nodes;
  nodes.reserve(walk.size() + 1);
  nodes.push_back(g.edges[walk.front()].tail);
  for (int e : walk) nodes.push_back(g.edges[e].head);
  return nodes;
}

std::vector<std::vector<int>> out_edges_by_node(const ConstrainingGraph& g) {
  std::vector<std::vector<int>> out(g.nodes.size());
  for (size_t e = 0; e < g.edges.size(); ++e)
    out[node_position(g, g.edges[e].tail)].push_back(static_cast<int>(e));
  return out;
}

// Uniform random walk over outgoing edges.
EdgeWalk random_walk(const ConstrainingGraph& g,
                     const std::vector<std::vector<int>>& out, int start_pos,
                     int length, std::mt19937_64& rng) {
  EdgeWalk walk;
  int pos = start_pos;
  for (int t = 0; t < length; ++t) {
    const auto& choices = out[pos];
    const int e = choices[std::uniform_int_distribution<size_t>(
        0, choices.size() - 1)(rng)];
    walk.push_back(e);
    pos = node_position(g, g.edges[e].head);
  }
  return walk;
}

// Greedy walk chasing the largest product norm (adversarial switching).
EdgeWalk greedy_walk(const ConstrainingGraph& g,
                     const std::vector<std::vector<int>>& out,
                     const SystemAt& f, int start_pos, int length) {
  EdgeWalk walk;
  int pos = start_pos;
  MatrixXd prod;
  for (int t = 0; t < length; ++t) {
    const auto& choices = out[pos];
    int best = choices.front();
    double best_norm = -1.0;
    for (int e : choices) {
      const Edge& edge = g.edges[e];
      const MatrixXd A = f(edge.tail, edge.label).A;
      const MatrixXd cand = prod.size() == 0 ? A : MatrixXd(A * prod);
      const double nrm = cand.norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = e;
      }
    }
    const Edge& chosen = g.edges[best];
    const MatrixXd A = f(chosen.tail, chosen.label).A;
    prod = prod.size() == 0 ? A : MatrixXd(A * prod);
    walk.push_back(best);
    pos = node_position(g, chosen.head);
  }
  return walk;
}

// Dense finite-horizon operator from stacked inputs to stacked outputs.
struct WalkOperator {
  MatrixXd T;
  std::vector<Eigen::Index> in_dim, out_dim;  // per step
  std::vector<Eigen::Index> in_off, out_off;
};

WalkOperator build_operator(const ConstrainingGraph& g, const SystemAt& f,
                            const EdgeWalk& walk, bool with_feedthrough) {
  WalkOperator op;
  std::vector<StateSpace> steps;
  Eigen::Index rows = 0, cols = 0;
  for (int e : walk) {
    const Edge& edge = g.edges[e];
    StateSpace s = f(edge.tail, edge.label);
    op.in_off.push_back(cols);
    op.out_off.push_back(rows);
    op.in_dim.push_back(s.input_dim());
    op.out_dim.push_back(s.output_dim());
    cols += s.input_dim();
    rows += s.output_dim();
    steps.push_back(std::move(s));
  }
  op.T = MatrixXd::Zero(rows, cols);

  // Propagate impulse responses: P[k] maps w_k to x_t.
  std::vector<MatrixXd> P;
  for (size_t t = 0; t < steps.size(); ++t) {
    const StateSpace& s = steps[t];
    for (size_t k = 0; k < t; ++k)
      op.T.block(op.out_off[t], op.in_off[k], op.out_dim[t], op.in_dim[k]) =
          s.C * P[k];
    if (with_feedthrough)
      op.T.block(op.out_off[t], op.in_off[t], op.out_dim[t], op.in_dim[t]) =
          s.D;
    for (auto& Pk : P) Pk = s.A * Pk;
    P.push_back(s.B);
  }
  return op;
}

std::vector<VectorXd> split_input(const WalkOperator& op, const VectorXd& v) {
  std::vector<VectorXd> out;
  for (size_t t = 0; t < op.in_dim.size(); ++t)
    out.push_back(v.segment(op.in_off[t], op.in_dim[t]));
  return out;
}

double quad(const MatrixXd& M, const VectorXd& a, const VectorXd& b) {
  return (a.transpose() * M * b).value();
}

}  // namespace

Trajectory simulate(const ConstrainingGraph& g, const SystemAt& f,
                    const EdgeWalk& walk, const VectorXd& x0,
                    const std::vector<VectorXd>& inputs) {
  if (walk.empty() || !is_walk(g, walk))
    throw std::invalid_argument("not an admissible walk of the graph");
  if (inputs.size() != walk.size())
    throw std::invalid_argument("one input per step required");

  Trajectory traj;
  traj.walk = walk;
  traj.nodes = walk_nodes(g, walk);
  traj.x.push_back(x0);
  for (size_t t = 0; t < walk.size(); ++t) {
    const Edge& e = g.edges[walk[t]];
    const StateSpace s = f(e.tail, e.label);
    const VectorXd& xt = traj.x.back();
    const VectorXd& wt = inputs[t];
    if (xt.size() != s.state_dim())
      throw std::invalid_argument("state dimension mismatch at step " +
                                  std::to_string(t));
    if (wt.size() != s.input_dim())
      throw std::invalid_argument("input dimension mismatch at step " +
                                  std::to_string(t));
    traj.labels.push_back(e.label);
    traj.w.push_back(wt);
    traj.z.push_back(s.C * xt + s.D * wt);
    traj.x.push_back(s.A * xt + s.B * wt);
  }
  return traj;
}

Trajectory simulate(const ConstrainingGraph& g, const SystemFamily& f,
                    const EdgeWalk& walk, const VectorXd& x0,
                    const std::vector<VectorXd>& inputs) {
  return simulate(g, by_label(f), walk, x0, inputs);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "t,node,label,x,w,z\n";
  for (size_t k = 0; k < t.labels.size(); ++k) {
    os << k << "," << t.nodes[k] << "," << t.labels[k] << ",";
    auto emit = [&os](const VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i)
        os << v(i) << (i + 1 < v.size() ? ";" : "");
    };
    emit(t.x[k]);
    os << ",";
    emit(t.w[k]);
    os << ",";
    emit(t.z[k]);
    os << "\n";
  }
}

GainEstimate empirical_l2_lb(const ConstrainingGraph& g, const SystemAt& f,
                             int horizon, int trials, std::uint64_t seed,
                             int power_iters) {
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  require_valid(g);
  const auto out = out_edges_by_node(g);

  GainEstimate best;
  auto consider = [&](const EdgeWalk& walk, std::mt19937_64& rng) {
    const WalkOperator op = build_operator(g, f, walk, true);
    if (op.T.cols() == 0 || op.T.rows() == 0) return;
    // Power iteration on T'T from two starts: the ones vector (broadband,
    // converges fast when the top singular vector has a DC component) and a
    // random vector (covers the sign-alternating case). Any iterate yields a
    // sound lower bound ||Tv|| / ||v||.
    auto refine = [&](VectorXd v) {
      v.normalize();
      for (int it = 0; it < power_iters; ++it) {
        VectorXd u = op.T * v;
        v = op.T.transpose() * u;
        const double n = v.norm();
        if (n == 0.0) return;  // zero operator
        v /= n;
      }
      const double bound = (op.T * v).norm();
      if (bound > best.bound) {
        best.bound = bound;
        best.walk = walk;
        best.input = split_input(op, v);
      }
    };
    refine(VectorXd::Ones(op.T.cols()));
    std::normal_distribution<double> gauss;
    VectorXd v(op.T.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
    refine(v);
  };

  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (trial + 1));
    const int start = std::uniform_int_distribution<size_t>(
        0, g.nodes.size() - 1)(rng);
    consider(random_walk(g, out, start, horizon, rng), rng);
  }
  for (size_t start = 0; start < g.nodes.size(); ++start) {
    std::mt19937_64 rng(seed ^ (0xc2b2ae3d27d4eb4fULL * (start + 1)));
    consider(greedy_walk(g, out, f, static_cast<int>(start), horizon), rng);
  }
  return best;
}

GainEstimate empirical_l2_lb(const ConstrainingGraph& g,
                             const SystemFamily& f, int horizon, int trials,
                             std::uint64_t seed, int power_iters) {
  return empirical_l2_lb(g, by_label(f), horizon, trials, seed, power_iters);
}

GainEstimate empirical_peak_lb(const ConstrainingGraph& g, const SystemAt& f,
                               int horizon, int trials, std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  require_valid(g);
  const auto out = out_edges_by_node(g);
  for (const Edge& e : g.edges) {
    if (f(e.tail, e.label).D.cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument(
          "energy-to-peak needs zero feedthrough on every mode");
  }

  GainEstimate best;
  auto consider = [&](const EdgeWalk& walk) {
    const WalkOperator op = build_operator(g, f, walk, false);
    for (size_t t = 0; t < walk.size(); ++t) {
      if (op.in_off[t] == 0) continue;  // z_t independent of w before t=0
      const MatrixXd row =
          op.T.block(op.out_off[t], 0, op.out_dim[t], op.in_off[t]);
      Eigen::JacobiSVD<MatrixXd> svd(row, Eigen::ComputeThinU |
                                              Eigen::ComputeThinV);
      const double peak = svd.singularValues().size()
                              ? svd.singularValues()(0)
                              : 0.0;
      if (peak > best.bound) {
        best.bound = peak;
        best.walk = walk;
        VectorXd w = VectorXd::Zero(op.T.cols());
        w.head(op.in_off[t]) = svd.matrixV().col(0);
        best.input = split_input(op, w);
      }
    }
  };

  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (trial + 1));
    const int start = std::uniform_int_distribution<size_t>(
        0, g.nodes.size() - 1)(rng);
    consider(random_walk(g, out, start, horizon, rng));
  }
  for (size_t start = 0; start < g.nodes.size(); ++start)
    consider(greedy_walk(g, out, f, static_cast<int>(start), horizon));
  return best;
}

GainEstimate empirical_peak_lb(const ConstrainingGraph& g,
                               const SystemFamily& f, int horizon, int trials,
                               std::uint64_t seed) {
  return empirical_peak_lb(g, by_label(f), horizon, trials, seed);
}

std::map<int, MatrixXd> storage_from_certificate(
    const Certificate& cert, const std::vector<int>& nodes) {
  std::map<int, MatrixXd> storage;
  for (int i : nodes) {
    MatrixXd X;
    if (cert.has(node_var("X", i))) {
      X = cert.at(node_var("X", i));
    } else {
      const std::string inv_name =
          cert.has(node_var("Xt", i)) ? node_var("Xt", i) : "Xt";
      const MatrixXd& Xt = cert.at(inv_name);
      Eigen::LLT<MatrixXd> llt(Xt);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("inverse storage is not positive definite");
      X = llt.solve(MatrixXd::Identity(Xt.rows(), Xt.cols()));
      X = ((X + X.transpose()) / 2).eval();
    }
    storage[i] = std::move(X);
  }
  return storage;
}

DissipationAudit check_dissipation(const Trajectory& traj,
                                   const std::map<int, MatrixXd>& storage,
                                   const PerformanceIndex& p) {
  DissipationAudit audit;
  audit.min_slack = std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < traj.labels.size(); ++t) {
    const MatrixXd& Xi = storage.at(traj.nodes[t]);
    const MatrixXd& Xj = storage.at(traj.nodes[t + 1]);
    const QuadraticIndex& q = p.at(traj.labels[t]);
    const VectorXd& w = traj.w[t];
    const VectorXd& z = traj.z[t];
    const double supply =
        quad(q.Q, w, w) + 2 * quad(q.S, w, z) + quad(q.R, z, z);
    const double slack = quad(Xi, traj.x[t], traj.x[t]) -
                         quad(Xj, traj.x[t + 1], traj.x[t + 1]) - supply;
    audit.slacks.push_back(slack);
    audit.telescoped += slack;
    audit.min_slack = std::min(audit.min_slack, slack);
  }
  if (audit.slacks.empty()) audit.min_slack = 0.0;
  return audit;
}

SpectralAudit spectral_audit(const ConstrainingGraph& g, const SystemAt& f,
                             int depth, std::uint64_t budget) {
  if (depth < 1 || depth > 20)
    throw std::invalid_argument("audit depth must lie in 1..20");
  require_valid(g);
  const auto out = out_edges_by_node(g);

  SpectralAudit audit;
  audit.by_length.assign(depth, 0.0);
  std::uint64_t used = 0;

  // Depth-first over walks, extending the running product.
  struct Frame {
    int pos;
    int len;
    MatrixXd prod;
  };
  std::vector<Frame> stack;
  for (size_t start = 0; start < g.nodes.size(); ++start)
    stack.push_back({static_cast<int>(start), 0, MatrixXd()});

  while (!stack.empty() && audit.complete) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    if (fr.len == depth) continue;
    for (int e : out[fr.pos]) {
      if (used >= budget) {
        audit.complete = false;
        break;
      }
      ++used;
      const Edge& edge = g.edges[e];
      const MatrixXd A = f(edge.tail, edge.label).A;
      MatrixXd prod = fr.prod.size() == 0 ? A : MatrixXd(A * fr.prod);
      Eigen::JacobiSVD<MatrixXd> svd(prod);
      const double nrm = svd.singularValues()(0);
      const int len = fr.len + 1;
      audit.by_length[len - 1] =
          std::max(audit.by_length[len - 1], std::pow(nrm, 1.0 / len));
      audit.depth = std::max(audit.depth, len);
      stack.push_back({node_position(g, edge.head), len, std::move(prod)});
    }
  }
  audit.by_length.resize(std::max(audit.depth, 0));
  audit.growth = audit.depth > 0 ? audit.by_length[audit.depth - 1] : 0.0;
  return audit;
}

SpectralAudit spectral_audit(const ConstrainingGraph& g,
                             const SystemFamily& f, int depth,
                             std::uint64_t budget) {
  return spectral_audit(g, by_label(f), depth, budget);
}

}  // namespace csls
