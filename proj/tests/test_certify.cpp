#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "csls/certify.hpp"
#include "csls/io.hpp"
#include "csls/sdp.hpp"
#include "fixtures.hpp"

using namespace csls;

namespace {

ConstrainingGraph loop_graph() {
  ConstrainingGraph g;
  g.nodes = {1};
  g.edges = {{1, 1, 1}};
  g.num_labels = 1;
  return g;
}

SystemFamily scalar_family(double a) {
  SystemFamily f;
  f.systems[1] = StateSpace{MatrixXd::Constant(1, 1, a),
                            MatrixXd::Constant(1, 1, 1.0),
                            MatrixXd::Constant(1, 1, 1.0),
                            MatrixXd::Constant(1, 1, 0.0)};
  return f;
}

Certificate scalar_stability_cert(double x) {
  Certificate c;
  c.criterion = "stability";
  c.values["X:1"] = MatrixXd::Constant(1, 1, x);
  return c;
}

// Solves a synthesis program and hands back (problem, certificate, t*).
struct SynthRun {
  double t = 0.0;
  Certificate cert;
};

SynthRun run_synthesis(const CslsModel& model, Form form, bool shared) {
  LmiProblem pb = assemble_l2_min_synthesis(model.graph, open_loop(model), 2,
                                            form, shared);
  SolveResult res = solve(lower(pb));
  REQUIRE(res.usable());
  SynthRun out;
  out.t = res.objective;
  out.cert = extract_certificate(pb, res.y);
  out.cert.criterion = "l2";
  out.cert.form = to_string(form);
  out.cert.synthesis = true;
  out.cert.shared = shared;
  out.cert.gamma = std::sqrt(res.objective);
  return out;
}

double closed_loop_t(const CslsModel& model, const Controller& ctrl) {
  LmiProblem pb = assemble_l2_min(model.graph, close_loop(model, ctrl), 2,
                                  Form::primal);
  SolveResult res = solve(lower(pb));
  REQUIRE(res.usable());
  return res.objective;
}

}  // namespace

TEST_SUITE("certify") {

TEST_CASE("certificates snapshot solved problems and round-trip as json") {
  LmiProblem pb = assemble_l2_min(loop_graph(), by_label(scalar_family(0.5)),
                                  1, Form::primal);
  SolveResult res = solve(lower(pb));
  REQUIRE(res.status == SolveStatus::optimal);
  Certificate cert = extract_certificate(pb, res.y);
  cert.criterion = "l2";
  cert.form = "primal";
  cert.gamma = std::sqrt(res.objective);
  CHECK(cert.has("X:1"));
  CHECK(cert.has("t"));
  CHECK(cert.at("t")(0, 0) == doctest::Approx(4.0).epsilon(1e-4));

  Certificate back = certificate_from_json(certificate_to_json(cert));
  CHECK(back.criterion == "l2");
  CHECK(back.form == "primal");
  CHECK(back.gamma == doctest::Approx(cert.gamma).epsilon(1e-15));
  CHECK(back.values.size() == cert.values.size());
  for (const auto& [name, value] : cert.values)
    CHECK((back.at(name) - value).cwiseAbs().maxCoeff() == 0.0);
  CHECK(!std::isfinite(back.delta));

  const auto path = std::filesystem::temp_directory_path() / "csls_cert.json";
  write_certificate(cert, path.string());
  Certificate from_disk = read_certificate(path.string());
  CHECK(from_disk.values.size() == cert.values.size());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(certificate_from_json("{\"criterion\":\"l2\"}"),
                  std::runtime_error);
  CHECK_THROWS_AS(cert.at("nope"), std::runtime_error);
}

TEST_CASE("residual checks accept margins and reject boundary violations") {
  LmiProblem stable = assemble_stability(loop_graph(),
                                         by_label(scalar_family(0.5)), 1);
  ResidualReport ok = check_residuals(stable, scalar_stability_cert(1.0));
  CHECK(ok.pass);
  REQUIRE(ok.entries.size() == 1);
  // [[X, aX],[aX, X]] at X=1, a=0.5 has lambda_min = 0.5.
  CHECK(ok.entries[0].margin ==
        doctest::Approx(0.5 - strictness_epsilon(stable.blocks[0]))
            .epsilon(1e-9));
  CHECK(ok.worst == ok.entries[0].margin);

  // At a = 1 the block is exactly singular: the full strictness shift is
  // missing, which is more than the tolerated half.
  LmiProblem tight = assemble_stability(loop_graph(),
                                        by_label(scalar_family(1.0)), 1);
  ResidualReport bad = check_residuals(tight, scalar_stability_cert(1.0));
  CHECK(!bad.pass);
  CHECK(bad.entries[0].margin < 0.0);

  CHECK_THROWS_AS(check_residuals(stable, Certificate{}), std::runtime_error);
}

TEST_CASE("solver output at the shifted optimum passes the residual check") {
  LmiProblem pb = assemble_l2_min(loop_graph(), by_label(scalar_family(0.5)),
                                  1, Form::slack);
  SolveResult res = solve(lower(pb));
  REQUIRE(res.status == SolveStatus::optimal);
  ResidualReport report = check_residuals(pb, extract_certificate(pb, res.y));
  CHECK(report.pass);
}

TEST_CASE("controllers recover from slack and factored synthesis") {
  CslsModel model = fx::demo_model(Strategy::zero, false);

  SynthRun shared_slack = run_synthesis(model, Form::slack, true);
  Controller ctrl = recover_controller(shared_slack.cert, model.graph);
  CHECK(ctrl.shared);
  REQUIRE(ctrl.K.count(1));
  REQUIRE(ctrl.K.count(2));
  CHECK((ctrl.at(1) - ctrl.at(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ctrl.at(1).rows() == 1);
  CHECK(ctrl.at(1).cols() == 2);
  const double t_cl = closed_loop_t(model, ctrl);
  CHECK(t_cl > 1.0);
  CHECK(t_cl <= shared_slack.t * (1 + 1e-6) + 1e-6);

  SynthRun node_slack = run_synthesis(model, Form::slack, false);
  Controller per_node = recover_controller(node_slack.cert, model.graph);
  CHECK(!per_node.shared);
  CHECK(closed_loop_t(model, per_node) <= node_slack.t * (1 + 1e-6) + 1e-6);
  CHECK(node_slack.t <= shared_slack.t * (1 + 1e-6));

  SynthRun schur = run_synthesis(model, Form::schur, true);
  Controller from_schur = recover_controller(schur.cert, model.graph);
  CHECK(closed_loop_t(model, from_schur) <= schur.t * (1 + 1e-6) + 1e-6);

  // Ill-conditioned mid refuses to produce a gain.
  Certificate broken = shared_slack.cert;
  MatrixXd G = broken.at("G");
  G(0, 0) = 1e-18;
  G(0, 1) = G(1, 0) = 0.0;
  G(1, 1) = 1.0;
  broken.values["G"] = G;
  CHECK_THROWS_AS(recover_controller(broken, model.graph),
                  std::runtime_error);

  Certificate not_synth;
  CHECK_THROWS_AS(recover_controller(not_synth, model.graph),
                  std::runtime_error);
}

TEST_CASE("controller json round trip") {
  Controller c;
  c.shared = false;
  c.K[1] = (MatrixXd(1, 2) << 0.25, -1.5).finished();
  c.K[2] = (MatrixXd(1, 2) << 0.0, 3.5).finished();
  Controller back = controller_from_json(controller_to_json(c));
  CHECK(back.shared == c.shared);
  REQUIRE(back.K.size() == 2);
  CHECK((back.at(1) - c.at(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.at(2) - c.at(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(controller_from_json("{\"shared\":true}"),
                  std::runtime_error);
  CHECK_THROWS_AS(back.at(3), std::runtime_error);
}

TEST_CASE("fixed uncertainty closes as a linear fractional map") {
  LfrMode m;
  m.A = MatrixXd::Constant(1, 1, 0.0);
  m.B_wu = MatrixXd::Constant(1, 1, 1.0);
  m.B_wp = MatrixXd::Constant(1, 1, 1.0);
  m.C_zu = MatrixXd::Constant(1, 1, 1.0);
  m.C_zp = MatrixXd::Constant(1, 1, 1.0);
  m.D_zuwu = MatrixXd::Constant(1, 1, 0.5);
  m.D_zuwp = MatrixXd::Constant(1, 1, 3.0);
  m.D_zpwu = MatrixXd::Constant(1, 1, 2.0);
  m.D_zpwp = MatrixXd::Constant(1, 1, 4.0);

  // delta = 0.4: M = 1/(1 - 0.2) = 1.25, delta*M = 0.5.
  StateSpace s = close_lfr(m, MatrixXd::Constant(1, 1, 0.4));
  CHECK(s.A(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.B(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(s.C(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.D(0, 0) == doctest::Approx(7.0).epsilon(1e-12));

  // delta = 2 makes I - D_zuwu * delta singular.
  CHECK_THROWS_AS(close_lfr(m, MatrixXd::Constant(1, 1, 2.0)),
                  std::runtime_error);
  CHECK_THROWS_AS(close_lfr(m, MatrixXd::Zero(2, 1)), std::invalid_argument);
}

TEST_CASE("zero uncertainty reproduces the nominal closed loop") {
  CslsModel model = fx::demo_model();
  Controller ctrl;
  ctrl.shared = false;
  ctrl.K[1] = (MatrixXd(1, 2) << 0.1, -0.2).finished();
  ctrl.K[2] = (MatrixXd(1, 2) << -0.3, 0.05).finished();

  SystemAt nominal = close_loop(model, ctrl);
  SystemAt at_zero = close_uncertain(model, ctrl, 0.0);
  for (const Edge& e : model.graph.edges) {
    StateSpace a = nominal(e.tail, e.label);
    StateSpace b = at_zero(e.tail, e.label);
    CHECK((a.A - b.A).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.B - b.B).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.C - b.C).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.D - b.D).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fixed delta perturbs the open family affinely when D_zuwu is 0") {
  CslsModel model = fx::demo_model();
  SystemAt base = fixed_delta(model, 0.0);
  SystemAt bent = fixed_delta(model, 0.5);
  for (const Edge& e : model.graph.edges) {
    const LfrMode m = lfr_mode(model, e.label);
    REQUIRE(m.D_zuwu.cwiseAbs().maxCoeff() == 0.0);
    StateSpace a = base(e.tail, e.label);
    StateSpace b = bent(e.tail, e.label);
    MatrixXd expect = 0.5 * m.B_wu * m.C_zu;
    CHECK((b.A - a.A - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.A - model.systems.at(e.label).A).cwiseAbs().maxCoeff() < 1e-12);
  }
}

}  // TEST_SUITE
