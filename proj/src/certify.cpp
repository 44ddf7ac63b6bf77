#include "csls/certify.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

#include "csls/io.hpp"

namespace csls {

using nlohmann::json;

bool Certificate::has(const std::string& name) const {
  return values.count(name) > 0;
}

const MatrixXd& Certificate::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end())
    throw std::runtime_error("certificate lacks variable " + name);
  return it->second;
}

Certificate extract_certificate(const LmiProblem& pb, const VectorXd& y) {
  if (y.size() != static_cast<Eigen::Index>(pb.vars.size()))
    throw std::invalid_argument("solution length does not match the problem");
  Certificate c;
  for (const auto& v : pb.vars.variables()) c.values[v.name] = pb.vars.value(y, v);
  return c;
}

namespace {

json certificate_json(const Certificate& c) {
  json j;
  j["criterion"] = c.criterion;
  j["mode"] = c.mode;
  if (!c.form.empty()) j["form"] = c.form;
  j["synthesis"] = c.synthesis;
  j["shared"] = c.shared;
  if (std::isfinite(c.gamma)) j["gamma"] = c.gamma;
  if (std::isfinite(c.delta)) j["delta"] = c.delta;
  if (c.multiplier) {
    json m;
    m["kind"] = to_string(c.multiplier->kind);
    m["bound"] = c.multiplier->bound;
    if (c.multiplier->kind == MultiplierClass::Kind::full_block) {
      m["P"] = {{"Q", matrix_to_json(c.multiplier->fixed_P.Q)},
                {"S", matrix_to_json(c.multiplier->fixed_P.S)},
                {"R", matrix_to_json(c.multiplier->fixed_P.R)}};
    }
    j["multiplier"] = std::move(m);
  }
  json vals;
  for (const auto& [name, value] : c.values) vals[name] = matrix_to_json(value);
  j["values"] = std::move(vals);
  return j;
}

Certificate certificate_from(const json& j) {
  Certificate c;
  c.criterion = j.value("criterion", std::string());
  c.mode = j.value("mode", std::string("nominal"));
  c.form = j.value("form", std::string());
  c.synthesis = j.value("synthesis", false);
  c.shared = j.value("shared", false);
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("delta")) c.delta = j.at("delta").get<double>();
  if (j.contains("multiplier")) {
    const json& m = j.at("multiplier");
    MultiplierClass mult;
    mult.kind = multiplier_kind_from_string(m.at("kind").get<std::string>());
    mult.bound = m.at("bound").get<double>();
    if (m.contains("P")) {
      mult.fixed_P.Q = matrix_from_json(m.at("P").at("Q"), "multiplier.P.Q");
      mult.fixed_P.S = matrix_from_json(m.at("P").at("S"), "multiplier.P.S");
      mult.fixed_P.R = matrix_from_json(m.at("P").at("R"), "multiplier.P.R");
    }
    c.multiplier = std::move(mult);
  }
  if (!j.contains("values") || !j.at("values").is_object())
    throw std::runtime_error("certificate lacks a values object");
  for (const auto& [name, value] : j.at("values").items())
    c.values[name] = matrix_from_json(value, "values." + name);
  return c;
}

}  // namespace

std::string certificate_to_json(const Certificate& c) {
  return certificate_json(c).dump(2);
}

Certificate certificate_from_json(const std::string& text) {
  try {
    return certificate_from(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("certificate: ") + e.what());
  }
}

void write_certificate(const Certificate& c, const std::string& path) {
  dump_json(certificate_json(c), path);
}

Certificate read_certificate(const std::string& path) {
  return certificate_from(load_json(path));
}

ResidualReport check_residuals(const LmiProblem& pb, const Certificate& cert) {
  VectorXd y = VectorXd::Zero(pb.vars.size());
  for (const auto& v : pb.vars.variables())
    pb.vars.assign(y, v, cert.at(v.name));

  ResidualReport report;
  for (const auto& block : pb.blocks) {
    ResidualEntry e;
    e.tag = block.tag;
    e.sense = block.sense;
    e.margin = block_margin(block, y);
    const bool strict =
        block.sense == Sense::pos_def || block.sense == Sense::neg_def;
    e.tolerance = strict ? strictness_epsilon(block) / 2
                         : 1e-9 * (1 + block.expr.data_norm());
    e.pass = e.margin >= -e.tolerance;
    report.pass = report.pass && e.pass;
    report.worst = std::min(report.worst, e.margin);
    report.entries.push_back(std::move(e));
  }
  return report;
}

const MatrixXd& Controller::at(int node) const {
  auto it = K.find(node);
  if (it == K.end())
    throw std::runtime_error("controller has no gain for node " +
                             std::to_string(node));
  return it->second;
}

Controller recover_controller(const Certificate& cert,
                              const ConstrainingGraph& g) {
  if (!cert.synthesis)
    throw std::runtime_error("certificate does not carry synthesis variables");
  const Form form = form_from_string(cert.form);
  const std::string mid_base = is_slack(form) ? "G" : "Xt";

  Controller ctrl;
  ctrl.shared = cert.shared;
  for (int i : g.nodes) {
    const MatrixXd& mid =
        cert.shared ? cert.at(mid_base) : cert.at(node_var(mid_base, i));
    const MatrixXd& Z = cert.shared ? cert.at("Z") : cert.at(node_var("Z", i));
    Eigen::JacobiSVD<MatrixXd> svd(mid);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > 0) || smax / smin > 1e12)
      throw std::runtime_error("gain recovery is ill-conditioned at node " +
                               std::to_string(i));
    ctrl.K[i] = mid.transpose().partialPivLu().solve(Z.transpose()).transpose();
  }
  return ctrl;
}

namespace {

Controller controller_from(const json& j) {
  Controller c;
  c.shared = j.value("shared", false);
  if (!j.contains("K") || !j.at("K").is_object())
    throw std::runtime_error("controller lacks a K object");
  for (const auto& [node, value] : j.at("K").items())
    c.K[std::stoi(node)] = matrix_from_json(value, "K." + node);
  if (c.K.empty()) throw std::runtime_error("controller carries no gains");
  return c;
}

json controller_json(const Controller& c) {
  json j;
  j["shared"] = c.shared;
  json gains;
  for (const auto& [node, K] : c.K)
    gains[std::to_string(node)] = matrix_to_json(K);
  j["K"] = std::move(gains);
  return j;
}

}  // namespace

std::string controller_to_json(const Controller& c) {
  return controller_json(c).dump(2);
}

Controller controller_from_json(const std::string& text) {
  try {
    return controller_from(json::parse(text));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("controller: ") + e.what());
  }
}

void write_controller(const Controller& c, const std::string& path) {
  dump_json(controller_json(c), path);
}

Controller read_controller(const std::string& path) {
  return controller_from(load_json(path));
}

SystemAt close_loop(const CslsModel& model, const Controller& ctrl) {
  if (!model.has_control())
    throw std::invalid_argument("model has no control channel to close");
  return [model, ctrl](int node, int label) {
    StateSpace s = model.systems.at(label);
    const ControlChannel& c = model.control.at(label);
    const MatrixXd& K = ctrl.at(node);
    s.A += c.B_u * K;
    s.C += c.D_u * K;
    return s;
  };
}

LfrAt close_lfr_family(const CslsModel& model, const Controller& ctrl) {
  if (!model.has_control() || !model.has_uncertainty())
    throw std::invalid_argument(
        "closing an uncertain loop needs control and uncertainty channels");
  return [model, ctrl](int node, int label) {
    LfrMode m = lfr_mode(model, label);
    const ControlChannel& c = model.control.at(label);
    const UncertaintyChannel& u = model.uncertainty.at(label);
    const MatrixXd& K = ctrl.at(node);
    m.A += c.B_u * K;
    m.C_zu += u.D_zu_u * K;
    m.C_zp += c.D_u * K;
    return m;
  };
}

StateSpace close_lfr(const LfrMode& m, const MatrixXd& Delta) {
  if (Delta.rows() != m.unc_in() || Delta.cols() != m.unc_out())
    throw std::invalid_argument("uncertainty block has the wrong shape");
  const MatrixXd loop =
      MatrixXd::Identity(m.unc_out(), m.unc_out()) - m.D_zuwu * Delta;
  Eigen::FullPivLU<MatrixXd> lu(loop);
  if (!lu.isInvertible() || lu.rcond() < 1e-12)
    throw std::runtime_error("uncertainty interconnection is ill-posed");
  const MatrixXd DeltaM = Delta * lu.inverse();

  StateSpace s;
  s.A = m.A + m.B_wu * DeltaM * m.C_zu;
  s.B = m.B_wp + m.B_wu * DeltaM * m.D_zuwp;
  s.C = m.C_zp + m.D_zpwu * DeltaM * m.C_zu;
  s.D = m.D_zpwp + m.D_zpwu * DeltaM * m.D_zuwp;
  return s;
}

MatrixXd scaled_identity_delta(const LfrMode& m, double delta) {
  MatrixXd D = MatrixXd::Zero(m.unc_in(), m.unc_out());
  const Eigen::Index k = std::min(D.rows(), D.cols());
  D.topLeftCorner(k, k) = delta * MatrixXd::Identity(k, k);
  return D;
}

SystemAt fixed_delta(const CslsModel& model, double delta) {
  if (!model.has_uncertainty())
    throw std::invalid_argument("model has no uncertainty channel");
  return [model, delta](int, int label) {
    const LfrMode m = lfr_mode(model, label);
    return close_lfr(m, scaled_identity_delta(m, delta));
  };
}

SystemAt close_uncertain(const CslsModel& model, const Controller& ctrl,
                         double delta) {
  LfrAt closed = close_lfr_family(model, ctrl);
  return [closed, delta](int node, int label) {
    const LfrMode m = closed(node, label);
    return close_lfr(m, scaled_identity_delta(m, delta));
  };
}

}  // namespace csls
