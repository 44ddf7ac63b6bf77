#include "csls/system.hpp"

#include <stdexcept>

namespace csls {

void require_consistent(const StateSpace& s, const std::string& what) {
  const auto n = s.A.rows();
  if (s.A.cols() != n) {
    throw std::invalid_argument(what + ": A must be square");
  }
  require_shape(s.B, n, s.B.cols(), what + ".B");
  require_shape(s.C, s.C.rows(), n, what + ".C");
  require_shape(s.D, s.C.rows(), s.B.cols(), what + ".D");
}

const StateSpace& SystemFamily::at(int label) const {
  auto it = systems.find(label);
  if (it == systems.end()) {
    throw std::invalid_argument("no system for label " +
                                std::to_string(label));
  }
  return it->second;
}

Eigen::Index SystemFamily::state_dim() const {
  if (systems.empty()) {
    throw std::invalid_argument("empty system family");
  }
  return systems.begin()->second.state_dim();
}

const QuadraticIndex& PerformanceIndex::at(int label) const {
  auto it = entries.find(label);
  if (it == entries.end()) {
    throw std::invalid_argument("no index entry for label " +
                                std::to_string(label));
  }
  return it->second;
}

std::vector<std::string> validate_pairing(const ConstrainingGraph& g,
                                          const SystemFamily& f,
                                          const PerformanceIndex* p) {
  std::vector<std::string> out = validate_graph(g);
  Eigen::Index n = -1;
  for (const auto& [label, s] : f.systems) {
    const std::string what = "system " + std::to_string(label);
    try {
      require_consistent(s, what);
    } catch (const std::invalid_argument& e) {
      out.push_back(e.what());
      continue;
    }
    if (n < 0) n = s.state_dim();
    if (s.state_dim() != n) {
      out.push_back(what + ": state dimension " +
                    std::to_string(s.state_dim()) + " differs from " +
                    std::to_string(n));
    }
  }
  for (int l = 1; l <= g.num_labels; ++l) {
    if (!f.systems.count(l)) {
      out.push_back("no system for label " + std::to_string(l));
    }
  }
  if (p) {
    for (int l = 1; l <= g.num_labels; ++l) {
      auto it = p->entries.find(l);
      if (it == p->entries.end()) {
        out.push_back("no index entry for label " + std::to_string(l));
        continue;
      }
      auto sit = f.systems.find(l);
      if (sit == f.systems.end()) continue;
      const auto di = sit->second.input_dim();
      const auto dz = sit->second.output_dim();
      const auto& q = it->second;
      const std::string what = "index entry " + std::to_string(l);
      if (q.Q.rows() != di || q.Q.cols() != di) {
        out.push_back(what + ": Q must be " + std::to_string(di) + "x" +
                      std::to_string(di));
      } else if (asymmetry(q.Q) > 1e-10) {
        out.push_back(what + ": Q asymmetric");
      }
      if (q.S.rows() != di || q.S.cols() != dz) {
        out.push_back(what + ": S must be " + std::to_string(di) + "x" +
                      std::to_string(dz));
      }
      if (q.R.rows() != dz || q.R.cols() != dz) {
        out.push_back(what + ": R must be " + std::to_string(dz) + "x" +
                      std::to_string(dz));
      } else if (asymmetry(q.R) > 1e-10) {
        out.push_back(what + ": R asymmetric");
      }
    }
  }
  return out;
}

void require_valid_pairing(const ConstrainingGraph& g, const SystemFamily& f,
                           const PerformanceIndex* p) {
  auto v = validate_pairing(g, f, p);
  if (v.empty()) return;
  std::string msg = "invalid system pairing:";
  for (const auto& s : v) msg += "\n  " + s;
  throw std::invalid_argument(msg);
}

PerformanceIndex l2_index(double gamma, const ChannelDims& dims) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("l2_index requires gamma > 0");
  }
  PerformanceIndex p;
  for (const auto& [label, d] : dims) {
    QuadraticIndex q;
    q.Q = -gamma * gamma * MatrixXd::Identity(d.first, d.first);
    q.S = MatrixXd::Zero(d.first, d.second);
    q.R = MatrixXd::Identity(d.second, d.second);
    p.entries.emplace(label, std::move(q));
  }
  return p;
}

PerformanceIndex l2_index(double gamma, const SystemFamily& f) {
  ChannelDims dims;
  for (const auto& [label, s] : f.systems)
    dims.emplace(label, std::make_pair(s.input_dim(), s.output_dim()));
  return l2_index(gamma, dims);
}

}  // namespace csls
