#include "csls/model.hpp"

#include <stdexcept>

namespace csls {

std::vector<std::string> validate_model(const CslsModel& m) {
  std::vector<std::string> out = validate_pairing(
      m.graph, m.systems, m.index ? &*m.index : nullptr);
  auto check = [&](const MatrixXd& M, Eigen::Index r, Eigen::Index c,
                   const std::string& what) {
    if (M.rows() != r || M.cols() != c) {
      out.push_back(what + ": expected " + std::to_string(r) + "x" +
                    std::to_string(c) + ", got " + std::to_string(M.rows()) +
                    "x" + std::to_string(M.cols()));
    }
  };
  for (const auto& [l, ch] : m.control) {
    auto it = m.systems.systems.find(l);
    if (it == m.systems.systems.end()) {
      out.push_back("control channel for unknown label " + std::to_string(l));
      continue;
    }
    const auto& s = it->second;
    const std::string what = "control " + std::to_string(l);
    check(ch.B_u, s.state_dim(), ch.B_u.cols(), what + ".B_u");
    check(ch.D_u, s.output_dim(), ch.B_u.cols(), what + ".D_u");
  }
  if (!m.control.empty()) {
    for (int l = 1; l <= m.graph.num_labels; ++l) {
      if (!m.control.count(l)) {
        out.push_back("no control channel for label " + std::to_string(l));
      }
    }
    Eigen::Index du = -1;
    for (const auto& [l, ch] : m.control) {
      if (du < 0) du = ch.B_u.cols();
      if (ch.B_u.cols() != du) {
        out.push_back("control channel " + std::to_string(l) +
                      ": input dimension differs across labels");
      }
    }
  }
  for (const auto& [l, ch] : m.uncertainty) {
    auto it = m.systems.systems.find(l);
    if (it == m.systems.systems.end()) {
      out.push_back("uncertainty channel for unknown label " +
                    std::to_string(l));
      continue;
    }
    const auto& s = it->second;
    const std::string what = "uncertainty " + std::to_string(l);
    const auto n = s.state_dim();
    const auto dw = s.input_dim();
    const auto dz = s.output_dim();
    const auto du_w = ch.B_wu.cols();  // w_u dimension
    const auto du_z = ch.C_zu.rows();  // z_u dimension
    check(ch.B_wu, n, du_w, what + ".B_wu");
    check(ch.C_zu, du_z, n, what + ".C_zu");
    check(ch.D_zuwu, du_z, du_w, what + ".D_zuwu");
    check(ch.D_zuwp, du_z, dw, what + ".D_zuwp");
    check(ch.D_zpwu, dz, du_w, what + ".D_zpwu");
    if (m.control.count(l)) {
      check(ch.D_zu_u, du_z, m.control.at(l).B_u.cols(), what + ".D_zu_u");
    }
  }
  if (!m.uncertainty.empty()) {
    for (int l = 1; l <= m.graph.num_labels; ++l) {
      if (!m.uncertainty.count(l)) {
        out.push_back("no uncertainty channel for label " + std::to_string(l));
      }
    }
  }
  return out;
}

void require_valid_model(const CslsModel& m) {
  auto v = validate_model(m);
  if (v.empty()) return;
  std::string msg = "invalid model:";
  for (const auto& s : v) msg += "\n  " + s;
  throw std::invalid_argument(msg);
}

}  // namespace csls
