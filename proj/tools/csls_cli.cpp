// Command-line surface over the csls library: compile weakly-hard models,
// lift plants, certify and synthesize controllers, validate certificates
// against simulation, and sweep fixed uncertainty values.
//
// Exit codes: 0 success/feasible, 2 infeasible, 3 validation failure,
// 4 input error, 5 solver failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csls/io.hpp"
#include "csls/pipeline.hpp"
#include "csls/sim.hpp"

namespace {

using namespace csls;

constexpr int kOk = 0;
constexpr int kInfeasible = 2;
constexpr int kValidationFailure = 3;
constexpr int kInputError = 4;
constexpr int kSolverFailure = 5;

// Reports must be byte-identical across runs with the same config, so every
// number goes through one formatter and no timing information is printed.
std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// ---- flag parsing --------------------------------------------------------

struct ParsedConstraint {
  WhrtConstraint c;
  Strategy strategy = Strategy::zero;
};

// "whrt:<k>/<n>:<zero|hold>"
ParsedConstraint parse_constraint(const std::string& s) {
  const std::string bad =
      "constraint must look like whrt:<k>/<n>:<zero|hold>, got '" + s + "'";
  std::istringstream is(s);
  std::string head, body, strat;
  if (!std::getline(is, head, ':') || head != "whrt" ||
      !std::getline(is, body, ':') || !std::getline(is, strat))
    throw std::invalid_argument(bad);
  const auto slash = body.find('/');
  if (slash == std::string::npos) throw std::invalid_argument(bad);
  ParsedConstraint out;
  try {
    size_t used = 0;
    out.c.min_hits = std::stoi(body.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument(bad);
    const std::string win = body.substr(slash + 1);
    out.c.window = std::stoi(win, &used);
    if (used != win.size()) throw std::invalid_argument(bad);
  } catch (const std::exception&) {
    throw std::invalid_argument(bad);
  }
  out.strategy = strategy_from_string(strat);
  return out;
}

struct ParsedMode {
  Mode mode = Mode::nominal;
  double delta = 0.0;
};

// "nominal" | "robust" | "fixed-delta:<value>"
ParsedMode parse_mode(const std::string& s) {
  ParsedMode out;
  if (s.rfind("fixed-delta:", 0) == 0) {
    out.mode = Mode::fixed_delta;
    const std::string v = s.substr(12);
    size_t used = 0;
    try {
      out.delta = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty())
      throw std::invalid_argument("bad fixed-delta value in mode '" + s +
                                  "'");
    return out;
  }
  out.mode = mode_from_string(s);
  if (out.mode == Mode::fixed_delta)
    throw std::invalid_argument(
        "fixed-delta mode needs a value: fixed-delta:<value>");
  return out;
}

// "a:b:step", inclusive endpoints.
std::vector<double> parse_sweep(const std::string& s) {
  std::istringstream is(s);
  std::string a, b, step;
  if (!std::getline(is, a, ':') || !std::getline(is, b, ':') ||
      !std::getline(is, step))
    throw std::invalid_argument("sweep range must look like a:b:step, got '" +
                                s + "'");
  double lo = 0, hi = 0, h = 0;
  try {
    lo = std::stod(a);
    hi = std::stod(b);
    h = std::stod(step);
  } catch (const std::exception&) {
    throw std::invalid_argument("non-numeric sweep range '" + s + "'");
  }
  if (!(h > 0) || hi < lo)
    throw std::invalid_argument("sweep range needs step > 0 and b >= a");
  std::vector<double> deltas;
  for (int i = 0;; ++i) {
    const double d = lo + i * h;
    if (d > hi + h * 1e-9) break;
    deltas.push_back(d);
  }
  return deltas;
}

// ---- shared option plumbing ----------------------------------------------

struct CommonOpts {
  std::string model_path;
  std::string controller_path;
  std::string criterion = "l2";
  std::string mode = "nominal";
  std::string form = "slack";
  bool shared_slack = false;
  bool per_node_gain = false;
  double bound = 1.0;
  double rel_tol = 1e-4;
  double bisect_lo = 1e-3;
  double bisect_hi = 1e6;
  std::string solver;  // empty = leave CSLS_SDP_SOLVER alone
  std::string out_dir = ".";
};

void add_solver_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--solver", o.solver, "SDP backend")
      ->check(CLI::IsMember({"embedded", "sdpa"}));
  cmd->add_option("--out-dir", o.out_dir, "directory for report artifacts");
}

void add_level_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--criterion", o.criterion, "performance criterion")
      ->check(CLI::IsMember({"l2", "quadratic", "energy-to-peak"}));
  cmd->add_option("--form", o.form, "LMI form")
      ->check(CLI::IsMember(
          {"primal", "schur", "slack", "dual", "dual-schur", "dual-slack"}));
  cmd->add_option("--bound", o.bound,
                  "uncertainty radius certified in robust mode");
  cmd->add_option("--tol", o.rel_tol, "bisection relative tolerance");
  cmd->add_option("--bisect-lo", o.bisect_lo, "bisection bracket, lower");
  cmd->add_option("--bisect-hi", o.bisect_hi, "bisection bracket, upper");
}

void apply_solver_choice(const CommonOpts& o) {
  if (!o.solver.empty()) setenv("CSLS_SDP_SOLVER", o.solver.c_str(), 1);
}

void ensure_out_dir(const CommonOpts& o) {
  std::filesystem::create_directories(o.out_dir);
}

// Flag combinations are validated before any solver work.
void validate_run(const CslsModel& model, Criterion crit, Mode mode) {
  if (crit == Criterion::energy_to_peak) {
    if (mode != Mode::nominal)
      throw std::invalid_argument(
          "energy-to-peak is only available in nominal mode");
    for (const auto& [label, sys] : model.systems.systems)
      if (!sys.D.isZero(0.0))
        throw std::invalid_argument(
            "energy-to-peak needs zero feedthrough; label " +
            std::to_string(label) + " has D != 0");
  }
  if (crit == Criterion::quadratic && !model.index)
    throw std::invalid_argument(
        "quadratic criterion needs an index stored in the model file");
  if (mode != Mode::nominal && !model.has_uncertainty())
    throw std::invalid_argument(to_string(mode) +
                                " mode needs an uncertainty channel");
}

std::string residual_summary(const ResidualReport& r) {
  std::string worst_tag = "-";
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& e : r.entries)
    if (e.margin < worst) {
      worst = e.margin;
      worst_tag = e.tag;
    }
  std::string out = r.pass ? "PASS" : "FAIL";
  out += " (" + std::to_string(r.entries.size()) + " blocks, worst margin " +
         fmt(r.worst) + " in " + worst_tag + ")";
  if (!r.pass) {
    out += "; violated:";
    for (const auto& e : r.entries)
      if (!e.pass) out += " " + e.tag;
  }
  return out;
}

nlohmann::json residuals_json(const ResidualReport& r) {
  nlohmann::json j;
  j["pass"] = r.pass;
  j["worst"] = r.worst;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"tag", e.tag},
                       {"margin", e.margin},
                       {"tolerance", e.tolerance},
                       {"pass", e.pass}});
  j["entries"] = std::move(entries);
  return j;
}

nlohmann::json diagnostics_json(const SolveResult& s) {
  return {{"status", to_string(s.status)},
          {"iterations", s.iterations},
          {"message", s.message}};
}

void emit_report(const CommonOpts& o, const std::string& text,
                 const nlohmann::json& sidecar) {
  ensure_out_dir(o);
  write_text(join_path(o.out_dir, "report.txt"), text);
  dump_json(sidecar, join_path(o.out_dir, "report.json"));
  std::cout << text;
}

// ---- compile-whrt ---------------------------------------------------------

struct CompileOpts {
  std::string plant_path;
  std::string constraint;
  std::string out_path = "model.json";
};

int cmd_compile_whrt(const CompileOpts& o) {
  BasePlant plant;
  ParsedConstraint pc;
  try {
    pc = parse_constraint(o.constraint);
    plant = read_plant(o.plant_path);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  CslsModel model;
  try {
    model = compile_whrt(plant, pc.c, pc.strategy);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  write_model(model, o.out_path);
  std::cout << "compiled " << o.constraint << " over "
            << plant.A.rows() << " states\n"
            << "  graph: " << model.graph.nodes.size() << " nodes, "
            << model.graph.edges.size() << " edges, "
            << model.graph.num_labels << " labels\n"
            << "  control: " << yes_no(model.has_control())
            << ", uncertainty: " << yes_no(model.has_uncertainty())
            << ", index: " << yes_no(model.index.has_value()) << "\n"
            << "  model: " << o.out_path << "\n";
  return kOk;
}

// ---- lift ------------------------------------------------------------------

struct LiftOpts {
  std::string plant_path;
  int label = 1;
  std::string strategy = "zero";
  std::string out_path;
};

int cmd_lift(const LiftOpts& o) {
  BasePlant plant;
  Strategy strat;
  try {
    strat = strategy_from_string(o.strategy);
    if (o.label < 1) throw std::invalid_argument("label must be >= 1");
    plant = read_plant(o.plant_path);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  const LiftedMode m = lift_mode(plant, o.label, strat);

  const Eigen::IOFormat mat(10, 0, ", ", "\n           ", "[", "]");
  std::cout << "lifted label " << o.label << " (" << o.strategy
            << " strategy): one success then " << o.label - 1 << " losses\n"
            << "  A      = " << m.sys.A.format(mat) << "\n"
            << "  B_w    = " << m.sys.B.format(mat) << "\n"
            << "  C      = " << m.sys.C.format(mat) << "\n"
            << "  D_w    = " << m.sys.D.format(mat) << "\n"
            << "  B_u    = " << m.ctrl.B_u.format(mat) << "\n"
            << "  D_u    = " << m.ctrl.D_u.format(mat) << "\n";
  if (m.unc) {
    std::cout << "  B_wu   = " << m.unc->B_wu.format(mat) << "\n"
              << "  D_zpwu = " << m.unc->D_zpwu.format(mat) << "\n"
              << "  D_zu_u = " << m.unc->D_zu_u.format(mat) << "\n";
  }
  if (!o.out_path.empty()) {
    nlohmann::json j;
    j["label"] = o.label;
    j["strategy"] = o.strategy;
    j["system"] = {{"A", matrix_to_json(m.sys.A)},
                   {"B", matrix_to_json(m.sys.B)},
                   {"C", matrix_to_json(m.sys.C)},
                   {"D", matrix_to_json(m.sys.D)}};
    j["control"] = {{"B_u", matrix_to_json(m.ctrl.B_u)},
                    {"D_u", matrix_to_json(m.ctrl.D_u)}};
    if (m.unc)
      j["uncertainty"] = {{"B_wu", matrix_to_json(m.unc->B_wu)},
                          {"C_zu", matrix_to_json(m.unc->C_zu)},
                          {"D_zuwu", matrix_to_json(m.unc->D_zuwu)},
                          {"D_zuwp", matrix_to_json(m.unc->D_zuwp)},
                          {"D_zpwu", matrix_to_json(m.unc->D_zpwu)},
                          {"D_zu_u", matrix_to_json(m.unc->D_zu_u)}};
    dump_json(j, o.out_path);
    std::cout << "  written: " << o.out_path << "\n";
  }
  return kOk;
}

// ---- analyze ---------------------------------------------------------------

AnalyzeConfig analyze_config(const CommonOpts& o, const ParsedMode& pm) {
  AnalyzeConfig cfg;
  cfg.criterion = criterion_from_string(o.criterion);
  cfg.mode = pm.mode;
  cfg.delta = pm.delta;
  cfg.form = form_from_string(o.form);
  cfg.shared_slack = o.shared_slack;
  cfg.mult.bound = o.bound;
  cfg.bisect_lo = o.bisect_lo;
  cfg.bisect_hi = o.bisect_hi;
  cfg.rel_tol = o.rel_tol;
  return cfg;
}

std::string mode_line(const AnalyzeConfig& cfg) {
  std::string s = to_string(cfg.mode);
  if (cfg.mode == Mode::fixed_delta) s += " (delta " + fmt(cfg.delta) + ")";
  if (cfg.mode == Mode::robust) s += " (bound " + fmt(cfg.mult.bound) + ")";
  return s;
}

int cmd_analyze(const CommonOpts& o) {
  CslsModel model;
  std::optional<Controller> ctrl;
  ParsedMode pm;
  AnalyzeConfig cfg;
  try {
    pm = parse_mode(o.mode);
    cfg = analyze_config(o, pm);
    model = read_model(o.model_path);
    if (!o.controller_path.empty())
      ctrl = read_controller(o.controller_path);
    validate_run(model, cfg.criterion, cfg.mode);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  apply_solver_choice(o);

  AnalysisReport rep;
  try {
    rep = ctrl ? analyze(model, *ctrl, cfg) : analyze(model, cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }

  std::ostringstream txt;
  txt << "analysis report\n"
      << "  model: " << o.model_path << "\n"
      << "  controller: "
      << (o.controller_path.empty() ? "none" : o.controller_path) << "\n"
      << "  criterion: " << o.criterion << "\n"
      << "  mode: " << mode_line(cfg) << "\n"
      << "  form: " << o.form << "\n"
      << "  shared slack: " << yes_no(cfg.shared_slack) << "\n"
      << "result\n"
      << "  feasible: " << yes_no(rep.feasible) << "\n";
  if (rep.feasible && std::isfinite(rep.gamma))
    txt << "  gamma: " << fmt(rep.gamma) << "\n";
  if (std::isfinite(rep.margin))
    txt << "  margin: " << fmt(rep.margin) << "\n";
  if (!rep.trace.points.empty())
    txt << "  bisection probes: " << rep.trace.points.size() << " (bracket ["
        << fmt(o.bisect_lo) << ", " << fmt(o.bisect_hi) << "], rel tol "
        << fmt(o.rel_tol) << ")\n";
  if (rep.feasible)
    txt << "residuals\n  " << residual_summary(rep.residuals) << "\n";

  nlohmann::json j;
  j["comparable"] = {{"command", "analyze"},
                     {"criterion", o.criterion},
                     {"mode", to_string(cfg.mode)},
                     {"form", o.form},
                     {"shared", cfg.shared_slack},
                     {"feasible", rep.feasible}};
  if (cfg.mode == Mode::fixed_delta) j["comparable"]["delta"] = cfg.delta;
  if (cfg.mode == Mode::robust) j["comparable"]["bound"] = cfg.mult.bound;
  if (rep.feasible && std::isfinite(rep.gamma))
    j["comparable"]["gamma"] = rep.gamma;
  if (std::isfinite(rep.margin)) j["comparable"]["margin"] = rep.margin;
  if (!rep.trace.points.empty())
    j["comparable"]["probes"] = rep.trace.points.size();
  if (rep.feasible) j["comparable"]["residuals"] = residuals_json(rep.residuals);
  j["diagnostics"] = diagnostics_json(rep.solve);

  if (rep.feasible) {
    ensure_out_dir(o);
    const std::string cert_path = join_path(o.out_dir, "certificate.json");
    write_certificate(rep.certificate, cert_path);
    txt << "artifacts\n  certificate: " << cert_path << "\n";
    j["comparable"]["certificate"] = cert_path;
  }
  emit_report(o, txt.str(), j);
  return rep.feasible ? kOk : kInfeasible;
}

// ---- synthesize ------------------------------------------------------------

int cmd_synthesize(const CommonOpts& o, bool reanalyze) {
  CslsModel model;
  ParsedMode pm;
  SynthesizeConfig cfg;
  try {
    pm = parse_mode(o.mode);
    cfg.criterion = criterion_from_string(o.criterion);
    cfg.mode = pm.mode;
    cfg.form = form_from_string(o.form);
    cfg.shared_gain = !o.per_node_gain;
    cfg.mult.bound = o.bound;
    cfg.bisect_lo = o.bisect_lo;
    cfg.bisect_hi = o.bisect_hi;
    cfg.rel_tol = o.rel_tol;
    cfg.reanalyze = reanalyze;
    model = read_model(o.model_path);
    if (!model.has_control())
      throw std::invalid_argument("synthesis needs a control channel");
    if (cfg.mode == Mode::fixed_delta)
      throw std::invalid_argument("synthesis modes are nominal and robust");
    validate_run(model, cfg.criterion, cfg.mode);
    if (cfg.criterion == Criterion::energy_to_peak)
      throw std::invalid_argument("energy-to-peak synthesis is not available");
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  apply_solver_choice(o);

  SynthesisReport rep;
  try {
    rep = synthesize(model, cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }

  std::ostringstream txt;
  txt << "synthesis report\n"
      << "  model: " << o.model_path << "\n"
      << "  criterion: " << o.criterion << "\n"
      << "  mode: " << to_string(cfg.mode)
      << (cfg.mode == Mode::robust ? " (bound " + fmt(cfg.mult.bound) + ")"
                                   : "")
      << "\n"
      << "  shared gain: " << yes_no(cfg.shared_gain) << "\n"
      << "result\n"
      << "  feasible: " << yes_no(rep.feasible) << "\n";
  nlohmann::json j;
  j["comparable"] = {{"command", "synthesize"},
                     {"criterion", o.criterion},
                     {"mode", to_string(cfg.mode)},
                     {"shared", cfg.shared_gain},
                     {"feasible", rep.feasible}};
  if (cfg.mode == Mode::robust) j["comparable"]["bound"] = cfg.mult.bound;
  if (rep.feasible) {
    if (std::isfinite(rep.gamma)) {
      txt << "  gamma: " << fmt(rep.gamma) << "\n";
      j["comparable"]["gamma"] = rep.gamma;
    }
    if (!rep.trace.points.empty())
      txt << "  bisection probes: " << rep.trace.points.size() << "\n";
    txt << "residuals\n  " << residual_summary(rep.residuals) << "\n";
    j["comparable"]["residuals"] = residuals_json(rep.residuals);

    txt << "controller\n  shared: " << yes_no(rep.controller.shared) << "\n";
    const Eigen::IOFormat row(10, 0, ", ", "; ", "", "", "[", "]");
    nlohmann::json kj;
    for (const auto& [node, K] : rep.controller.K) {
      txt << "  K[" << node << "] = " << K.format(row) << "\n";
      kj[std::to_string(node)] = matrix_to_json(K);
    }
    j["comparable"]["controller"] = std::move(kj);

    if (rep.closed_loop) {
      txt << "closed-loop re-analysis\n"
          << "  feasible: " << yes_no(rep.closed_loop->feasible) << "\n";
      nlohmann::json cl = {{"feasible", rep.closed_loop->feasible}};
      if (rep.closed_loop->feasible &&
          std::isfinite(rep.closed_loop->gamma)) {
        txt << "  gamma: " << fmt(rep.closed_loop->gamma) << "\n";
        cl["gamma"] = rep.closed_loop->gamma;
      }
      j["comparable"]["closed_loop"] = std::move(cl);
    }

    ensure_out_dir(o);
    const std::string cert_path = join_path(o.out_dir, "certificate.json");
    const std::string ctrl_path = join_path(o.out_dir, "controller.json");
    write_certificate(rep.certificate, cert_path);
    write_controller(rep.controller, ctrl_path);
    txt << "artifacts\n  certificate: " << cert_path
        << "\n  controller: " << ctrl_path << "\n";
    j["comparable"]["certificate"] = cert_path;
    j["comparable"]["controller_file"] = ctrl_path;
  }
  j["diagnostics"] = diagnostics_json(rep.solve);
  emit_report(o, txt.str(), j);
  return rep.feasible ? kOk : kInfeasible;
}

// ---- validate --------------------------------------------------------------

struct ValidateOpts {
  CommonOpts common;
  std::string certificate_path;
  std::uint64_t seed = 1;
  int horizon = 200;
  int trials = 16;
  int audit_depth = 12;
  int walks = 8;
  int walk_horizon = 50;
  std::string trajectory_csv;
};

// Uniformly random admissible walk as edge indices.
EdgeWalk random_walk(const ConstrainingGraph& g, int start_node, int steps,
                     std::mt19937_64& rng) {
  std::map<int, std::vector<int>> out;
  for (size_t i = 0; i < g.edges.size(); ++i)
    out[g.edges[i].tail].push_back(static_cast<int>(i));
  EdgeWalk walk;
  int node = start_node;
  for (int t = 0; t < steps; ++t) {
    const auto& choices = out.at(node);
    std::uniform_int_distribution<size_t> pick(0, choices.size() - 1);
    const int e = choices[pick(rng)];
    walk.push_back(e);
    node = g.edges[e].head;
  }
  return walk;
}

int cmd_validate(const ValidateOpts& vo) {
  const CommonOpts& o = vo.common;
  CslsModel model;
  Certificate cert;
  std::optional<Controller> ctrl;
  try {
    model = read_model(o.model_path);
    cert = read_certificate(vo.certificate_path);
    if (!o.controller_path.empty())
      ctrl = read_controller(o.controller_path);
    else if (cert.synthesis)
      ctrl = recover_controller(cert, model.graph);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  apply_solver_choice(o);

  std::ostringstream txt;
  txt << "validation report\n"
      << "  model: " << o.model_path << "\n"
      << "  certificate: " << vo.certificate_path << " (criterion "
      << cert.criterion << ", mode " << cert.mode << ", form " << cert.form
      << ", synthesis " << yes_no(cert.synthesis) << ")\n"
      << "  controller: "
      << (!o.controller_path.empty()
              ? o.controller_path
              : (cert.synthesis ? "recovered from certificate" : "none"))
      << "\n";
  nlohmann::json j;
  j["comparable"] = {{"command", "validate"},
                     {"criterion", cert.criterion},
                     {"mode", cert.mode},
                     {"seed", vo.seed},
                     {"horizon", vo.horizon},
                     {"trials", vo.trials}};

  bool pass = true;
  txt << "checks\n";

  Criterion crit;
  Mode mode;
  try {
    crit = criterion_from_string(cert.criterion);
    mode = mode_from_string(cert.mode);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }

  // A. residual re-check against the independently rebuilt program.
  try {
    const LmiProblem pb = (ctrl && !cert.synthesis)
                              ? rebuild_problem(model, *ctrl, cert)
                              : rebuild_problem(model, cert);
    const ResidualReport res = check_residuals(pb, cert);
    pass = pass && res.pass;
    txt << "  residuals: " << residual_summary(res) << "\n";
    j["comparable"]["residuals"] = residuals_json(res);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::runtime_error& e) {
    // A value missing or mis-shaped for the rebuilt program is a corrupt
    // certificate, which is a validation failure, not an input error.
    pass = false;
    txt << "  residuals: FAIL (" << e.what() << ")\n";
    j["comparable"]["residuals"] = {{"pass", false}, {"error", e.what()}};
  }

  // The channel the certificate speaks about, per mode; robust certificates
  // are spot-checked on a fixed-delta grid inside the certified set.
  auto channel_at = [&](double delta) -> SystemAt {
    switch (mode) {
      case Mode::nominal:
        return ctrl ? close_loop(model, *ctrl) : by_label(model.systems);
      case Mode::fixed_delta:
        return ctrl ? close_uncertain(model, *ctrl, cert.delta)
                    : fixed_delta(model, cert.delta);
      case Mode::robust:
        return ctrl ? close_uncertain(model, *ctrl, delta)
                    : fixed_delta(model, delta);
    }
    throw std::logic_error("unreachable");
  };
  std::vector<double> probes = {0.0};
  if (mode == Mode::robust && cert.multiplier) {
    const double r = cert.multiplier->bound;
    probes = {-r, -r / 2, 0.0, r / 2, r};
  }

  // B. empirical lower bounds never exceed the certified level.
  GainEstimate best;
  if (std::isfinite(cert.gamma) && crit != Criterion::quadratic) {
    double lb = 0.0;
    for (double d : probes) {
      try {
        const SystemAt chan = channel_at(d);
        const GainEstimate est =
            crit == Criterion::l2
                ? empirical_l2_lb(model.graph, chan, vo.horizon, vo.trials,
                                  vo.seed)
                : empirical_peak_lb(model.graph, chan, vo.horizon,
                                    vo.trials, vo.seed);
        if (est.bound > lb) {
          lb = est.bound;
          best = est;
        }
      } catch (const std::exception&) {
        // ill-posed closure at a probe point; the certificate still speaks
        // for the rest of the set
      }
    }
    const bool ok = lb <= cert.gamma + 1e-6;
    pass = pass && ok;
    txt << "  empirical bound: " << (ok ? "PASS" : "FAIL")
        << " (lower bound " << fmt(lb) << " vs gamma " << fmt(cert.gamma)
        << "; seed " << vo.seed << ", horizon " << vo.horizon << ", trials "
        << vo.trials << ")\n";
    j["comparable"]["empirical"] = {{"lower_bound", lb},
                                    {"gamma", cert.gamma},
                                    {"pass", ok}};
  }

  // C. per-step dissipation of the certified storage along random walks.
  if (crit != Criterion::energy_to_peak) {
    try {
      const std::map<int, MatrixXd> storage =
          storage_from_certificate(cert, model.graph.nodes);
      PerformanceIndex index;
      if (crit == Criterion::l2) {
        const SystemAt chan = channel_at(0.0);
        index = l2_index(cert.gamma, perf_dims_cli(model.graph, chan));
      } else {
        index = *model.index;
      }
      const SystemAt chan = channel_at(0.0);
      std::mt19937_64 rng(vo.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      double min_slack = std::numeric_limits<double>::infinity();
      double scale = 1.0;
      for (int wlk = 0; wlk < vo.walks; ++wlk) {
        const int start =
            model.graph.nodes[wlk % model.graph.nodes.size()];
        const EdgeWalk walk =
            random_walk(model.graph, start, vo.walk_horizon, rng);
        const int n = static_cast<int>(model.systems.state_dim());
        VectorXd x0(n);
        for (int i = 0; i < n; ++i) x0(i) = gauss(rng);
        std::vector<VectorXd> inputs;
        for (int e : walk) {
          const Edge& edge = model.graph.edges[e];
          const StateSpace s = chan(edge.tail, edge.label);
          VectorXd w(s.input_dim());
          for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = gauss(rng);
          inputs.push_back(std::move(w));
        }
        const Trajectory traj =
            simulate(model.graph, chan, walk, x0, inputs);
        const DissipationAudit audit =
            check_dissipation(traj, storage, index);
        min_slack = std::min(min_slack, audit.min_slack);
        for (double s : audit.slacks) scale = std::max(scale, std::abs(s));
        scale = std::max(scale, std::abs(audit.telescoped));
      }
      const bool ok = min_slack >= -1e-7 * scale;
      pass = pass && ok;
      txt << "  dissipation: " << (ok ? "PASS" : "FAIL") << " (min slack "
          << fmt(min_slack) << " over " << vo.walks << " walks, horizon "
          << vo.walk_horizon << ")\n";
      j["comparable"]["dissipation"] = {{"min_slack", min_slack},
                                        {"pass", ok}};
    } catch (const std::exception& e) {
      pass = false;
      txt << "  dissipation: FAIL (" << e.what() << ")\n";
      j["comparable"]["dissipation"] = {{"pass", false},
                                        {"error", e.what()}};
    }
  }

  // D. spectral audit of the closed dynamics (informational).
  try {
    const SpectralAudit audit =
        spectral_audit(model.graph, channel_at(0.0), vo.audit_depth);
    txt << "  spectral audit: growth " << fmt(audit.growth) << " at depth "
        << audit.depth << (audit.complete ? "" : " (truncated)")
        << ", informational\n";
    j["comparable"]["spectral"] = {{"growth", audit.growth},
                                   {"depth", audit.depth},
                                   {"complete", audit.complete}};
  } catch (const std::exception& e) {
    txt << "  spectral audit: skipped (" << e.what() << ")\n";
  }

  if (!vo.trajectory_csv.empty() && !best.walk.empty()) {
    std::ofstream os(vo.trajectory_csv);
    if (os) {
      const Trajectory traj =
          simulate(model.graph, channel_at(0.0), best.walk,
                   VectorXd::Zero(model.systems.state_dim()), best.input);
      write_trajectory_csv(os, traj);
      txt << "  trajectory: " << vo.trajectory_csv << "\n";
    }
  }

  txt << "verdict\n  " << (pass ? "PASS" : "FAIL") << "\n";
  j["comparable"]["pass"] = pass;
  emit_report(o, txt.str(), j);
  return pass ? kOk : kValidationFailure;
}

// ---- sweep -----------------------------------------------------------------

struct SweepOpts {
  CommonOpts common;
  std::string range;
  int jobs = 1;
  std::string csv_path;
};

int cmd_sweep(const SweepOpts& so) {
  const CommonOpts& o = so.common;
  CslsModel model;
  std::optional<Controller> ctrl;
  std::vector<double> deltas;
  AnalyzeConfig cfg;
  try {
    deltas = parse_sweep(so.range);
    cfg = analyze_config(o, {Mode::fixed_delta, 0.0});
    if (so.jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
    model = read_model(o.model_path);
    if (!o.controller_path.empty())
      ctrl = read_controller(o.controller_path);
    validate_run(model, cfg.criterion, Mode::fixed_delta);
  } catch (const std::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  }
  apply_solver_choice(o);

  std::vector<SweepRow> rows;
  try {
    rows = ctrl ? sweep_delta(model, *ctrl, cfg, deltas, so.jobs)
                : sweep_delta(model, cfg, deltas, so.jobs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  }

  size_t feasible = 0;
  std::ostringstream txt, csv;
  txt << "fixed-delta sweep\n"
      << "  model: " << o.model_path << "\n"
      << "  controller: "
      << (o.controller_path.empty() ? "none" : o.controller_path) << "\n"
      << "  criterion: " << o.criterion << ", form " << o.form << "\n"
      << "  deltas: " << so.range << "\n"
      << "rows\n";
  csv << "delta,gamma,feasible\n";
  nlohmann::json jrows = nlohmann::json::array();
  for (const SweepRow& row : rows) {
    const bool f = row.report.feasible;
    feasible += f;
    txt << "  delta " << fmt(row.delta) << ": "
        << (f ? "gamma " + fmt(row.report.gamma) : "infeasible") << "\n";
    csv << fmt(row.delta) << "," << (f ? fmt(row.report.gamma) : "") << ","
        << (f ? 1 : 0) << "\n";
    nlohmann::json rj = {{"delta", row.delta}, {"feasible", f}};
    if (f) rj["gamma"] = row.report.gamma;
    jrows.push_back(std::move(rj));
  }
  txt << "summary\n  feasible rows: " << feasible << " / " << rows.size()
      << "\n";

  nlohmann::json j;
  j["comparable"] = {{"command", "sweep"},
                     {"criterion", o.criterion},
                     {"form", o.form},
                     {"rows", std::move(jrows)}};
  if (!so.csv_path.empty()) {
    write_text(so.csv_path, csv.str());
    txt << "  csv: " << so.csv_path << "\n";
  }
  emit_report(o, txt.str(), j);
  return feasible == rows.size() ? kOk : kInfeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Certified analysis and synthesis for constrained switching linear "
      "systems"};
  app.require_subcommand(1);

  CompileOpts co;
  CLI::App* compile =
      app.add_subcommand("compile-whrt",
                         "compile a weakly-hard constraint and base plant "
                         "into a switching model");
  compile->add_option("--plant", co.plant_path, "base plant file")
      ->required();
  compile
      ->add_option("--constraint", co.constraint,
                   "whrt:<k>/<n>:<zero|hold>")
      ->required();
  compile->add_option("-o,--output", co.out_path, "model file to write");

  LiftOpts lo;
  CLI::App* lift = app.add_subcommand(
      "lift", "lift one label of a base plant and print the block matrices");
  lift->add_option("--plant", lo.plant_path, "base plant file")->required();
  lift->add_option("--label", lo.label, "block length (1 = plant itself)")
      ->required();
  lift->add_option("--strategy", lo.strategy, "zero or hold")
      ->check(CLI::IsMember({"zero", "hold"}));
  lift->add_option("-o,--output", lo.out_path, "lifted mode file to write");

  CommonOpts ao;
  CLI::App* analyze = app.add_subcommand(
      "analyze", "certify a performance level of a (closed) model");
  analyze->add_option("--model", ao.model_path, "model file")->required();
  analyze->add_option("--controller", ao.controller_path,
                      "close the loop with this gain file");
  analyze->add_option("--mode", ao.mode,
                      "nominal | robust | fixed-delta:<value>");
  analyze->add_flag("--shared-slack", ao.shared_slack,
                    "tie the slack certificate across nodes");
  add_level_flags(analyze, ao);
  add_solver_flags(analyze, ao);

  CommonOpts so_;
  bool no_reanalyze = false;
  CLI::App* synth = app.add_subcommand(
      "synthesize", "synthesize a state-feedback gain with a certificate");
  synth->add_option("--model", so_.model_path, "model file")->required();
  synth->add_option("--mode", so_.mode, "nominal | robust");
  synth->add_flag("--per-node-gain", so_.per_node_gain,
                  "allow a different gain per graph node");
  synth->add_flag("--no-reanalyze", no_reanalyze,
                  "skip the closed-loop re-analysis");
  add_level_flags(synth, so_);
  add_solver_flags(synth, so_);

  ValidateOpts vo;
  CLI::App* validate = app.add_subcommand(
      "validate",
      "re-check a certificate: residuals, empirical bounds, dissipation");
  validate->add_option("--model", vo.common.model_path, "model file")
      ->required();
  validate
      ->add_option("--certificate", vo.certificate_path, "certificate file")
      ->required();
  validate->add_option("--controller", vo.common.controller_path,
                       "gain file that closed the loop");
  validate->add_option("--seed", vo.seed, "simulation seed");
  validate->add_option("--horizon", vo.horizon, "empirical bound horizon");
  validate->add_option("--trials", vo.trials, "empirical bound trials");
  validate->add_option("--audit-depth", vo.audit_depth,
                       "spectral audit depth");
  validate->add_option("--trajectory-csv", vo.trajectory_csv,
                       "dump the worst found trajectory as CSV");
  add_solver_flags(validate, vo.common);

  SweepOpts sw;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "fixed-delta analyses over a range of uncertainty values");
  sweep->add_option("--model", sw.common.model_path, "model file")
      ->required();
  sweep->add_option("--controller", sw.common.controller_path,
                    "close the loop with this gain file");
  sweep->add_option("--sweep-delta", sw.range, "a:b:step, inclusive")
      ->required();
  sweep->add_option("--jobs", sw.jobs, "concurrent rows");
  sweep->add_option("--csv", sw.csv_path, "write rows as CSV");
  add_level_flags(sweep, sw.common);
  add_solver_flags(sweep, sw.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (app.got_subcommand(compile)) return cmd_compile_whrt(co);
    if (app.got_subcommand(lift)) return cmd_lift(lo);
    if (app.got_subcommand(analyze)) return cmd_analyze(ao);
    if (app.got_subcommand(synth)) return cmd_synthesize(so_, !no_reanalyze);
    if (app.got_subcommand(validate)) return cmd_validate(vo);
    if (app.got_subcommand(sweep)) return cmd_sweep(sw);
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverFailure;
  }
  return kInputError;
}
