#include <doctest.h>

#include <cmath>

#include "csls/pipeline.hpp"
#include "csls/sim.hpp"
#include "fixtures.hpp"

using namespace csls;

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("nominal l2 analysis certifies the scalar gain") {
  const CslsModel model = fx::scalar_model();

  AnalyzeConfig cfg;  // l2, nominal, slack
  AnalysisReport rep = analyze(model, cfg);
  CHECK(rep.feasible);
  CHECK(rep.gamma == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(rep.residuals.pass);
  CHECK(rep.trace.points.empty());  // minimized directly
  CHECK(rep.certificate.criterion == "l2");
  CHECK(rep.certificate.form == "slack");
  CHECK(!rep.certificate.synthesis);
  CHECK(rep.certificate.gamma == doctest::Approx(rep.gamma));

  cfg.form = Form::dual_schur;  // inverse index level enters nonlinearly
  AnalysisReport dual = analyze(model, cfg);
  CHECK(dual.feasible);
  CHECK(dual.gamma == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(!dual.trace.points.empty());
  CHECK(dual.margin >= 0.0);
  CHECK(dual.residuals.pass);
}

TEST_CASE("energy-to-peak analysis minimizes the level directly") {
  AnalyzeConfig cfg;
  cfg.criterion = Criterion::energy_to_peak;
  cfg.form = Form::schur;
  AnalysisReport rep = analyze(fx::scalar_model(), cfg);
  CHECK(rep.feasible);
  CHECK(rep.gamma == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-4));
  CHECK(rep.residuals.pass);
  CHECK(rep.certificate.criterion == "energy-to-peak");
}

TEST_CASE("quadratic analysis reports feasibility of the stored index") {
  CslsModel model = fx::scalar_model();
  model.index = l2_index(2.5, model.systems);

  AnalyzeConfig cfg;
  cfg.criterion = Criterion::quadratic;
  AnalysisReport loose = analyze(model, cfg);
  CHECK(loose.feasible);
  CHECK(loose.margin > 0.0);
  CHECK(std::isnan(loose.gamma));
  CHECK(loose.residuals.pass);

  model.index = l2_index(1.5, model.systems);
  AnalysisReport tight = analyze(model, cfg);
  CHECK(!tight.feasible);
  CHECK(tight.margin < 0.0);

  model.index.reset();
  CHECK_THROWS_AS(analyze(model, cfg), std::invalid_argument);
}

TEST_CASE("infeasible analysis is reported, not thrown") {
  const CslsModel model = fx::scalar_model(1.5);  // unstable mode

  AnalyzeConfig cfg;  // direct minimization path
  AnalysisReport rep = analyze(model, cfg);
  CHECK(!rep.feasible);
  CHECK(rep.solve.status == SolveStatus::infeasible);

  cfg.form = Form::dual;  // bisected path: infeasible at the upper bracket
  cfg.bisect_hi = 1e4;
  AnalysisReport dual = analyze(model, cfg);
  CHECK(!dual.feasible);
  CHECK(dual.margin < 0.0);
  CHECK(dual.trace.points.empty());
}

TEST_CASE("nominal synthesis meets the demo target and re-analyzes") {
  const CslsModel model = fx::demo_model(Strategy::zero, false);

  SynthesizeConfig cfg;  // l2, nominal, slack, shared gain
  SynthesisReport rep = synthesize(model, cfg);
  REQUIRE(rep.feasible);
  CHECK(rep.gamma == doctest::Approx(3.6707).epsilon(0.02));
  CHECK(rep.residuals.pass);
  CHECK(rep.certificate.synthesis);
  CHECK(rep.certificate.shared);
  CHECK(rep.controller.shared);
  CHECK(rep.controller.at(1).rows() == 1);
  CHECK(rep.controller.at(1).cols() == 2);

  // The synthesis certificate doubles as a closed-loop certificate, so an
  // independent re-analysis can only improve the level.
  REQUIRE(rep.closed_loop.has_value());
  CHECK(rep.closed_loop->feasible);
  CHECK(rep.closed_loop->gamma <= rep.gamma * (1 + 1e-6));
  CHECK(rep.closed_loop->residuals.pass);
}

TEST_CASE("robust synthesis certifies the uncertain demo") {
  const CslsModel model = fx::demo_model_robust();

  SynthesizeConfig cfg;
  cfg.mode = Mode::robust;
  SynthesisReport rep = synthesize(model, cfg);
  REQUIRE(rep.feasible);
  CHECK(rep.gamma == doctest::Approx(6.7094).epsilon(0.02));
  CHECK(!rep.trace.points.empty());
  CHECK(rep.residuals.pass);
  CHECK(rep.certificate.form == "dual-slack");

  // Re-analyzing the synthesized loop node by node tightens the level.
  REQUIRE(rep.closed_loop.has_value());
  CHECK(rep.closed_loop->feasible);
  CHECK(rep.closed_loop->gamma <= rep.gamma * (1 + 1e-3));
  CHECK(rep.closed_loop->gamma == doctest::Approx(6.2371).epsilon(0.10));
}

TEST_CASE("vanishing actuator gain makes robust certification impossible") {
  // When the uncertainty can cancel the whole control channel, the
  // admissible all-success walk runs the unstable open loop, so no
  // controller is robustly certifiable; the solver must report that rather
  // than certify a wrong bound.
  const CslsModel model = fx::demo_model(Strategy::zero, true);

  SynthesizeConfig syn;
  syn.reanalyze = false;
  const SynthesisReport nominal = synthesize(model, syn);
  REQUIRE(nominal.feasible);

  AnalyzeConfig rob;
  rob.mode = Mode::robust;
  rob.form = Form::dual_slack;
  const AnalysisReport analysis = analyze(model, nominal.controller, rob);
  CHECK(!analysis.feasible);

  SynthesizeConfig rsyn;
  rsyn.mode = Mode::robust;
  const SynthesisReport robust = synthesize(model, rsyn);
  CHECK(!robust.feasible);

  // Ground truth for the refusal: at delta = -1 the closed loop contains the
  // open-loop dynamics, and long products of the always-success walk grow.
  const SystemAt worst = close_uncertain(model, nominal.controller, -1.0);
  const SpectralAudit audit = spectral_audit(model.graph, worst, 12);
  CHECK(audit.growth > 1.0);

  AnalyzeConfig fixed;
  fixed.mode = Mode::fixed_delta;
  fixed.delta = -1.0;
  const AnalysisReport at_worst = analyze(model, nominal.controller, fixed);
  CHECK(!at_worst.feasible);
}

TEST_CASE("fixed-delta sweep reproduces the per-uncertainty bounds") {
  const CslsModel model = fx::demo_model(Strategy::zero, true);

  SynthesizeConfig syn;
  syn.reanalyze = false;
  const SynthesisReport nominal = synthesize(model, syn);
  REQUIRE(nominal.feasible);

  AnalyzeConfig cfg;  // l2, slack, per node
  const std::vector<double> deltas = {-0.2, -0.1, 0.0, 0.1, 0.2};
  const std::vector<double> reference = {3.4358, 3.1612, 3.4861, 3.9482,
                                         5.0226};
  const std::vector<SweepRow> rows =
      sweep_delta(model, nominal.controller, cfg, deltas, 1);
  REQUIRE(rows.size() == deltas.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(deltas[i]);
    CHECK(rows[i].delta == deltas[i]);
    CHECK(rows[i].report.feasible);
    CHECK(rows[i].report.gamma ==
          doctest::Approx(reference[i]).epsilon(0.10));
    CHECK(rows[i].report.certificate.delta ==
          doctest::Approx(deltas[i]));
  }

  // Concurrent rows must agree exactly with the serial run.
  const std::vector<SweepRow> parallel =
      sweep_delta(model, nominal.controller, cfg, deltas, 3);
  for (size_t i = 0; i < rows.size(); ++i)
    CHECK(parallel[i].report.gamma == rows[i].report.gamma);

  // Every fixed-delta level is dominated by the robust level of the
  // certifiable channel (the reference bounds pair these two readings of the
  // same actuator uncertainty).
  const CslsModel certifiable = fx::demo_model_robust();
  AnalyzeConfig rob;
  rob.mode = Mode::robust;
  rob.form = Form::dual_slack;
  const AnalysisReport robust = analyze(certifiable, nominal.controller, rob);
  REQUIRE(robust.feasible);
  CHECK(robust.gamma == doctest::Approx(6.8472).epsilon(0.10));
  for (const SweepRow& row : rows)
    CHECK(row.report.gamma <= robust.gamma * (1 + 1e-6));

  // Tying the slack across nodes can only raise the certified level; allow
  // the bisection tolerance on both sides of the comparison.
  rob.shared_slack = true;
  const AnalysisReport shared = analyze(certifiable, nominal.controller, rob);
  REQUIRE(shared.feasible);
  CHECK(shared.gamma == doctest::Approx(7.0049).epsilon(0.10));
  CHECK(shared.gamma >= robust.gamma * (1 - 5e-4));
}

TEST_CASE("certificates rebuild and re-check from their metadata") {
  // Round-trip through JSON, reassemble the program from the certificate's
  // metadata alone, and re-check the stored point.
  auto round_trip = [](const Certificate& c) {
    return certificate_from_json(certificate_to_json(c));
  };

  const CslsModel nominal = fx::demo_model(Strategy::zero, false);
  SynthesizeConfig syn;
  syn.reanalyze = false;
  const SynthesisReport born = synthesize(nominal, syn);
  REQUIRE(born.feasible);

  SUBCASE("nominal synthesis certificate") {
    const Certificate cert = round_trip(born.certificate);
    CHECK(cert.mode == "nominal");
    const LmiProblem pb = rebuild_problem(nominal, cert);
    CHECK(check_residuals(pb, cert).pass);
  }

  SUBCASE("robust closed-loop analysis certificate") {
    const CslsModel model = fx::demo_model_robust();
    AnalyzeConfig cfg;
    cfg.mode = Mode::robust;
    cfg.form = Form::dual_slack;
    const AnalysisReport rep = analyze(model, born.controller, cfg);
    REQUIRE(rep.feasible);
    const Certificate cert = round_trip(rep.certificate);
    REQUIRE(cert.multiplier.has_value());
    CHECK(cert.multiplier->bound == 1.0);
    const LmiProblem pb = rebuild_problem(model, born.controller, cert);
    CHECK(check_residuals(pb, cert).pass);
  }

  SUBCASE("fixed-delta analysis certificate") {
    const CslsModel model = fx::demo_model(Strategy::zero, true);
    AnalyzeConfig cfg;
    cfg.mode = Mode::fixed_delta;
    cfg.delta = 0.1;
    const AnalysisReport rep = analyze(model, born.controller, cfg);
    REQUIRE(rep.feasible);
    const Certificate cert = round_trip(rep.certificate);
    const LmiProblem pb = rebuild_problem(model, born.controller, cert);
    CHECK(check_residuals(pb, cert).pass);
  }

  SUBCASE("energy-to-peak certificate") {
    AnalyzeConfig cfg;
    cfg.criterion = Criterion::energy_to_peak;
    cfg.form = Form::schur;
    const CslsModel model = fx::scalar_model();
    const AnalysisReport rep = analyze(model, cfg);
    REQUIRE(rep.feasible);
    const Certificate cert = round_trip(rep.certificate);
    const LmiProblem pb = rebuild_problem(model, cert);
    CHECK(check_residuals(pb, cert).pass);
  }

  SUBCASE("tampered values fail with a named block") {
    Certificate cert = round_trip(born.certificate);
    cert.values.begin()->second *= 25.0;
    const LmiProblem pb = rebuild_problem(nominal, cert);
    const ResidualReport res = check_residuals(pb, cert);
    CHECK(!res.pass);
    bool named = false;
    for (const auto& e : res.entries)
      if (!e.pass && !e.tag.empty()) named = true;
    CHECK(named);
  }
}

TEST_CASE("configuration errors are rejected up front") {
  const CslsModel certain = fx::demo_model(Strategy::zero, false);
  const CslsModel uncertain = fx::demo_model(Strategy::zero, true);

  AnalyzeConfig robust;
  robust.mode = Mode::robust;
  CHECK_THROWS_AS(analyze(certain, robust), std::invalid_argument);

  AnalyzeConfig e2p_robust;
  e2p_robust.mode = Mode::robust;
  e2p_robust.criterion = Criterion::energy_to_peak;
  CHECK_THROWS_AS(analyze(uncertain, e2p_robust), std::invalid_argument);

  SynthesizeConfig fixed;
  fixed.mode = Mode::fixed_delta;
  CHECK_THROWS_AS(synthesize(uncertain, fixed), std::invalid_argument);

  SynthesizeConfig plain;
  CHECK_THROWS_AS(synthesize(fx::scalar_model(), plain),
                  std::invalid_argument);  // no control channel
}

TEST_CASE("uncontrollable synthesis comes back infeasible") {
  // The unstable mode is outside the actuator's reach.
  StateSpace s;
  s.A = MatrixXd{{1.5, 0.0}, {0.0, 0.5}};
  s.B = MatrixXd{{1.0}, {1.0}};
  s.C = MatrixXd{{1.0, 0.0}};
  s.D = MatrixXd{{0.0}};
  CslsModel model = fx::single_mode_model(s);
  ControlChannel ch;
  ch.B_u = MatrixXd{{0.0}, {1.0}};
  ch.D_u = MatrixXd{{0.0}};
  model.control.emplace(1, ch);

  SynthesizeConfig cfg;
  cfg.reanalyze = false;
  SynthesisReport rep = synthesize(model, cfg);
  CHECK(!rep.feasible);
  CHECK(rep.solve.status == SolveStatus::infeasible);
}

TEST_SUITE_END();
