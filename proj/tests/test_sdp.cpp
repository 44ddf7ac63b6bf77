#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "csls/lmi.hpp"
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
  StateSpace s;
  s.A = MatrixXd::Constant(1, 1, a);
  s.B = MatrixXd::Constant(1, 1, 1.0);
  s.C = MatrixXd::Constant(1, 1, 1.0);
  s.D = MatrixXd::Constant(1, 1, 0.0);
  SystemFamily fam;
  fam.systems[1] = s;
  return fam;
}

PerformanceIndex scalar_l2(double gamma) {
  PerformanceIndex p;
  p.entries[1] = l2_squared_index(gamma * gamma, 1, 1);
  return p;
}

LmiProblem scalar_min_t(Form form) {
  return assemble_l2_min(loop_graph(), by_label(scalar_family(0.5)), 1, form);
}

MarginResult scalar_l2_probe(double gamma, Form form) {
  LmiProblem pb = assemble_dissipativity(loop_graph(),
                                         by_label(scalar_family(0.5)), 1,
                                         scalar_l2(gamma), form);
  return feasibility_margin(pb);
}

}  // namespace

TEST_SUITE("sdp") {

TEST_CASE("lowering keeps block order, applies shifts and sign flips") {
  LmiProblem pb = assemble_stability(fx::two_of_three_graph(),
                                     by_label(fx::demo_model().systems), 2);
  ConicProgram cp = lower(pb);
  CHECK(cp.num_vars == 6);
  CHECK(cp.c.norm() == 0.0);
  REQUIRE(cp.blocks.size() == 3);
  VectorXd y = VectorXd::LinSpaced(6, -0.7, 1.3);
  for (size_t b = 0; b < cp.blocks.size(); ++b) {
    const auto& cone = cp.blocks[b];
    const auto& block = pb.blocks[b];
    CHECK(cone.tag == block.tag);
    CHECK(cone.dim() == 4);
    CHECK(cone.shift == doctest::Approx(strictness_epsilon(block)).epsilon(1e-12));
    CHECK(cone.shift > 0.0);
    MatrixXd expect =
        block.expr.eval(y) - cone.shift * MatrixXd::Identity(4, 4);
    CHECK((cone.eval(y) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }

  // Negative senses are flipped into the same cone.
  LmiProblem neg;
  const auto& s = neg.vars.add_scalar("s");
  AffineMatrix expr = AffineMatrix::term(s.offset, MatrixXd::Identity(2, 2)) +
                      AffineMatrix::fixed(-3 * MatrixXd::Identity(2, 2));
  neg.blocks.push_back(make_block(expr, Sense::neg_def, "flip"));
  ConicProgram ncp = lower(neg);
  VectorXd ys(1);
  ys << -1.0;
  MatrixXd got = ncp.blocks[0].eval(ys);
  MatrixXd expect = 4 * MatrixXd::Identity(2, 2) -
                    ncp.blocks[0].shift * MatrixXd::Identity(2, 2);
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lowering rejects variables that never appear") {
  LmiProblem pb;
  pb.vars.add_scalar("used");
  pb.vars.add_scalar("orphan");
  AffineMatrix expr = AffineMatrix::term(0, MatrixXd::Identity(1, 1));
  pb.blocks.push_back(make_block(expr, Sense::pos_semi, "only-used"));
  CHECK_THROWS_AS(lower(pb), std::logic_error);

  // Structural zeros do not count as appearances.
  LmiProblem pz;
  pz.vars.add_scalar("zero");
  AffineMatrix zexpr =
      AffineMatrix::fixed(MatrixXd::Zero(1, 1)) * AffineMatrix::zero(1, 1) +
      AffineMatrix::term(0, MatrixXd::Zero(1, 1)) +
      AffineMatrix::fixed(MatrixXd::Identity(1, 1));
  pz.blocks.push_back(make_block(zexpr, Sense::pos_semi, "zero-coeff"));
  CHECK_THROWS_AS(lower(pz), std::logic_error);
}

TEST_CASE("constant programs reduce to an eigenvalue check") {
  LmiProblem ok;
  ok.blocks.push_back(make_block(
      AffineMatrix::fixed(2 * MatrixXd::Identity(2, 2)), Sense::pos_def, "c"));
  CHECK(solve(lower(ok)).status == SolveStatus::optimal);

  LmiProblem bad;
  bad.blocks.push_back(make_block(AffineMatrix::fixed(MatrixXd::Identity(1, 1)),
                                  Sense::neg_def, "c"));
  CHECK(solve(lower(bad)).status == SolveStatus::infeasible);
}

TEST_CASE("small objective problems solve to high accuracy") {
  auto one_var = [](double target, bool two_by_two) {
    LmiProblem pb;
    const auto& t = pb.vars.add_scalar("t");
    pb.objective_id = t.offset;
    AffineMatrix expr;
    if (two_by_two) {
      MatrixXd coeff = MatrixXd::Identity(2, 2);
      MatrixXd off = MatrixXd::Zero(2, 2);
      off(0, 1) = off(1, 0) = 1.0;
      expr = AffineMatrix::term(t.offset, coeff) + AffineMatrix::fixed(off);
    } else {
      expr = AffineMatrix::term(t.offset, MatrixXd::Identity(1, 1)) +
             AffineMatrix::fixed(MatrixXd::Constant(1, 1, -target));
    }
    pb.blocks.push_back(make_block(expr, Sense::pos_semi, "cone"));
    return pb;
  };

  SolveResult at_zero = solve(lower(one_var(0.0, false)));
  CHECK(at_zero.status == SolveStatus::optimal);
  CHECK(std::abs(at_zero.objective) < 1e-6);

  SolveResult at_three = solve(lower(one_var(3.0, false)));
  CHECK(at_three.status == SolveStatus::optimal);
  CHECK(at_three.objective == doctest::Approx(3.0).epsilon(1e-6));

  SolveResult corr = solve(lower(one_var(0.0, true)));
  CHECK(corr.status == SolveStatus::optimal);
  CHECK(corr.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("infeasible and unbounded programs are certified") {
  LmiProblem pb;
  const auto& v = pb.vars.add_scalar("y");
  pb.blocks.push_back(make_block(
      AffineMatrix::term(v.offset, MatrixXd::Identity(1, 1)), Sense::pos_semi,
      "lo"));
  pb.blocks.push_back(make_block(
      AffineMatrix::term(v.offset, -MatrixXd::Identity(1, 1)) +
          AffineMatrix::fixed(MatrixXd::Constant(1, 1, -1.0)),
      Sense::pos_semi, "hi"));
  SolveResult inf = solve(lower(pb));
  CHECK(inf.status == SolveStatus::infeasible);

  LmiProblem ray;
  const auto& u = ray.vars.add_scalar("y");
  ray.blocks.push_back(make_block(
      AffineMatrix::term(u.offset, MatrixXd::Identity(1, 1)), Sense::pos_semi,
      "lo"));
  ConicProgram cp = lower(ray);
  cp.c(0) = -1.0;  // maximize y over y >= 0
  SolveResult unb = solve(cp);
  CHECK(unb.status == SolveStatus::unbounded);
}

TEST_CASE("stability margin separates contractive from expanding loops") {
  LmiProblem stable = assemble_stability(loop_graph(),
                                         by_label(scalar_family(0.5)), 1);
  MarginResult ms = feasibility_margin(stable);
  CHECK(ms.feasible());
  CHECK(ms.margin > 0.0);
  CHECK(ms.y.size() == 1);

  // The maximizing point satisfies every cone with at least the margin.
  ConicProgram cp = lower(stable);
  for (const auto& cone : cp.blocks) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cone.eval(ms.y),
                                                Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= ms.margin - 1e-6);
  }

  LmiProblem unstable = assemble_stability(loop_graph(),
                                           by_label(scalar_family(1.1)), 1);
  MarginResult mu = feasibility_margin(unstable);
  CHECK(!mu.feasible());
  CHECK(mu.margin < 0.0);
}

TEST_CASE("direct gain-squared minimization matches the closed form") {
  // x+ = 0.5 x + w, z = x has l2 gain 1/(1-0.5) = 2, so t* = 4. Strictness
  // shifts bias the optimum upward by O(eps * conditioning), hence 1e-4.
  for (Form form : {Form::primal, Form::schur, Form::slack}) {
    CAPTURE(to_string(form));
    SolveResult res = solve(lower(scalar_min_t(form)));
    CHECK(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(4.0).epsilon(1e-4));
  }
}

TEST_CASE("bisection certifies the scalar l2 gain at 2") {
  for (Form form : {Form::primal, Form::dual_slack}) {
    CAPTURE(to_string(form));
    BisectionTrace trace = bisect_gamma(
        [&](double g) { return scalar_l2_probe(g, form); }, 1e-1, 1e2);
    CHECK(trace.gamma == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(trace.best.feasible());
    CHECK(trace.points.size() >= 5);
    double max_inf = 0.0, min_feas = 1e300;
    for (const auto& pt : trace.points) {
      if (pt.feasible)
        min_feas = std::min(min_feas, pt.gamma);
      else
        max_inf = std::max(max_inf, pt.gamma);
    }
    CHECK(max_inf < min_feas);
  }
}

TEST_CASE("bisection brackets are validated") {
  auto never = [](double) {
    MarginResult r;
    r.margin = -1.0;
    return r;
  };
  CHECK_THROWS_AS(bisect_gamma(never, 1.0, 2.0), std::runtime_error);

  auto always = [](double) {
    MarginResult r;
    r.margin = 1.0;
    return r;
  };
  BisectionTrace trace = bisect_gamma(always, 1.0, 2.0);
  CHECK(trace.gamma == doctest::Approx(1.0));
  CHECK(trace.points.size() == 2);

  CHECK_THROWS_AS(bisect_gamma(always, -1.0, 2.0), std::invalid_argument);
}

TEST_CASE("energy-to-peak level is minimized directly") {
  // x+ = 0.5 x + w, z = x: peak bound gamma* = sqrt(4/3).
  for (Form form : {Form::schur, Form::slack}) {
    CAPTURE(to_string(form));
    LmiProblem pb = assemble_energy_to_peak(loop_graph(),
                                            by_label(scalar_family(0.5)), 1,
                                            form);
    SolveResult res = solve(lower(pb));
    CHECK(res.status == SolveStatus::optimal);
    CHECK(res.objective == doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-5));
  }
}

TEST_CASE("demo synthesis program is solvable end to end") {
  CslsModel model = fx::demo_model(Strategy::zero, false);
  LmiProblem pb = assemble_l2_min_synthesis(model.graph,
                                            open_loop(model), 2,
                                            Form::slack, true);
  SolveResult res = solve(lower(pb));
  CHECK(res.usable());
  CHECK(res.objective > 0.0);
  CHECK(std::sqrt(res.objective) < 20.0);
}

TEST_CASE("sdpa export writes the documented sparse format") {
  LmiProblem pb;
  const auto& x = pb.vars.add_scalar("x");
  pb.objective_id = x.offset;
  pb.blocks.push_back(make_block(
      AffineMatrix::term(x.offset, MatrixXd::Identity(1, 1)), Sense::pos_semi,
      "cone"));
  std::ostringstream os;
  write_sdpa(os, lower(pb));
  CHECK(os.str() == "1\n1\n1\n1\n1 1 1 1 1\n");

  // A strict block shifts the constant part, which lands in F0 = -G0.
  LmiProblem strict;
  const auto& s = strict.vars.add_scalar("x");
  strict.blocks.push_back(make_block(
      AffineMatrix::term(s.offset, MatrixXd::Identity(1, 1)), Sense::pos_def,
      "cone"));
  ConicProgram cp = lower(strict);
  std::ostringstream os2;
  write_sdpa(os2, cp);
  std::istringstream is(os2.str());
  std::string l1, l2, l3, l4;
  std::getline(is, l1);
  std::getline(is, l2);
  std::getline(is, l3);
  std::getline(is, l4);
  CHECK(l1 == "1");
  CHECK(l4 == "0");  // feasibility problem: zero objective
  int k, b, i, j;
  double v;
  REQUIRE((is >> k >> b >> i >> j >> v));
  CHECK(k == 0);
  CHECK(v == doctest::Approx(cp.blocks[0].shift));
  REQUIRE((is >> k >> b >> i >> j >> v));
  CHECK(k == 1);
  CHECK(v == 1.0);
}

TEST_CASE("sdpa solution files parse into statuses and points") {
  std::istringstream ok(
      "phase.value  = pdOPT\n"
      "   Iteration = 17\n"
      "objValPrimal = +4.0000000000e+00\n"
      "objValDual   = +3.9999999900e+00\n"
      "xVec = \n"
      "{+2.5000000000e+00,+1.5000000000e+00}\n");
  SdpaSolution sol = read_sdpa_solution(ok, 2);
  CHECK(sol.status == SolveStatus::optimal);
  CHECK(sol.iterations == 17);
  CHECK(sol.obj_primal == doctest::Approx(4.0));
  CHECK(sol.y(0) == doctest::Approx(2.5));
  CHECK(sol.y(1) == doctest::Approx(1.5));

  std::istringstream inf("phase.value = pINF_dFEAS\n");
  CHECK(read_sdpa_solution(inf, 2).status == SolveStatus::infeasible);
  std::istringstream unb("phase.value = pUNBD\nxVec =\n{0.0,0.0}\n");
  CHECK(read_sdpa_solution(unb, 2).status == SolveStatus::unbounded);

  std::istringstream noph("objValPrimal = 1.0\n");
  CHECK_THROWS_AS(read_sdpa_solution(noph, 1), std::runtime_error);
  std::istringstream short_x("phase.value = pdOPT\nxVec =\n{1.0}\n");
  CHECK_THROWS_AS(read_sdpa_solution(short_x, 2), std::runtime_error);
}

TEST_CASE("solver backend is selected from the environment") {
  unsetenv("CSLS_SDP_SOLVER");
  CHECK(selected_backend() == SolverBackend::embedded);
  setenv("CSLS_SDP_SOLVER", "embedded", 1);
  CHECK(selected_backend() == SolverBackend::embedded);
  setenv("CSLS_SDP_SOLVER", "sdpa", 1);
  CHECK(selected_backend() == SolverBackend::sdpa);
  setenv("CSLS_SDP_SOLVER", "bogus", 1);
  CHECK_THROWS_AS(selected_backend(), std::runtime_error);
  unsetenv("CSLS_SDP_SOLVER");

  LmiProblem pb;
  const auto& t = pb.vars.add_scalar("t");
  pb.objective_id = t.offset;
  pb.blocks.push_back(make_block(
      AffineMatrix::term(t.offset, MatrixXd::Identity(1, 1)) +
          AffineMatrix::fixed(MatrixXd::Constant(1, 1, -2.0)),
      Sense::pos_semi, "cone"));
  SolveResult res = solve_auto(lower(pb));
  CHECK(res.status == SolveStatus::optimal);
  CHECK(res.objective == doctest::Approx(2.0).epsilon(1e-6));
}

}  // TEST_SUITE
