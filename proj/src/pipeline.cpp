#include "csls/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>

namespace csls {

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::l2: return "l2";
    case Criterion::quadratic: return "quadratic";
    case Criterion::energy_to_peak: return "energy-to-peak";
  }
  throw std::logic_error("unreachable");
}

Criterion criterion_from_string(const std::string& s) {
  if (s == "l2") return Criterion::l2;
  if (s == "quadratic") return Criterion::quadratic;
  if (s == "energy-to-peak") return Criterion::energy_to_peak;
  throw std::invalid_argument("unknown criterion: " + s);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::nominal: return "nominal";
    case Mode::robust: return "robust";
    case Mode::fixed_delta: return "fixed-delta";
  }
  throw std::logic_error("unreachable");
}

Mode mode_from_string(const std::string& s) {
  if (s == "nominal") return Mode::nominal;
  if (s == "robust") return Mode::robust;
  if (s == "fixed-delta") return Mode::fixed_delta;
  throw std::invalid_argument("unknown mode: " + s);
}

namespace {

ChannelDims perf_dims(const ConstrainingGraph& g, const SystemAt& sys) {
  ChannelDims dims;
  for (const Edge& e : g.edges)
    if (!dims.count(e.label)) {
      const StateSpace s = sys(e.tail, e.label);
      dims.emplace(e.label, std::make_pair(s.input_dim(), s.output_dim()));
    }
  return dims;
}

ChannelDims perf_dims(const ConstrainingGraph& g, const LfrAt& lfr) {
  ChannelDims dims;
  for (const Edge& e : g.edges)
    if (!dims.count(e.label)) {
      const LfrMode m = lfr(e.tail, e.label);
      dims.emplace(e.label, std::make_pair(m.perf_in(), m.perf_out()));
    }
  return dims;
}

double scalar_value(const Certificate& cert, const std::string& name) {
  const MatrixXd& v = cert.at(name);
  if (v.size() != 1) throw std::logic_error(name + " is not scalar");
  return v(0, 0);
}

// Solves a problem whose named scalar objective is the level (or its
// square) and certifies the optimum.
AnalysisReport minimize_level(const LmiProblem& pb,
                              const std::string& objective,
                              bool level_squared, const SolveOptions& opt) {
  AnalysisReport rep;
  rep.solve = solve(lower(pb), opt);
  if (!rep.solve.usable()) {
    // Infeasibility is an answer; anything else is the absence of one.
    if (rep.solve.status != SolveStatus::infeasible)
      throw std::runtime_error("level minimization failed: " +
                               rep.solve.message);
    return rep;
  }
  rep.certificate = extract_certificate(pb, rep.solve.y);
  const double value = scalar_value(rep.certificate, objective);
  rep.gamma = level_squared ? std::sqrt(value) : value;
  rep.feasible = true;
  rep.residuals = check_residuals(pb, rep.certificate);
  return rep;
}

// Bisects the level against a family of feasibility problems and certifies
// the smallest feasible one.
AnalysisReport bisect_level(const std::function<LmiProblem(double)>& build,
                            const AnalyzeConfig& cfg) {
  AnalysisReport rep;
  auto probe = [&](double gamma) {
    return feasibility_margin(build(gamma), cfg.solver);
  };
  const MarginResult top = probe(cfg.bisect_hi);
  rep.solve = top.raw;
  rep.margin = top.margin;
  if (!top.feasible()) return rep;  // infeasible on the whole bracket
  rep.trace = bisect_gamma(probe, cfg.bisect_lo, cfg.bisect_hi, cfg.rel_tol);
  rep.gamma = rep.trace.gamma;
  rep.margin = rep.trace.best.margin;
  rep.solve = rep.trace.best.raw;
  const LmiProblem pb = build(rep.trace.gamma);
  rep.certificate = extract_certificate(pb, rep.trace.best.y);
  rep.feasible = true;
  rep.residuals = check_residuals(pb, rep.certificate);
  return rep;
}

AnalysisReport feasibility(const LmiProblem& pb, const SolveOptions& opt) {
  AnalysisReport rep;
  const MarginResult m = feasibility_margin(pb, opt);
  rep.solve = m.raw;
  rep.margin = m.margin;
  if (!m.feasible()) return rep;
  rep.certificate = extract_certificate(pb, m.y);
  rep.feasible = true;
  rep.residuals = check_residuals(pb, rep.certificate);
  return rep;
}

AnalysisReport analyze_channel(const ConstrainingGraph& g, int n,
                               const SystemAt& sys,
                               const std::optional<PerformanceIndex>& index,
                               const AnalyzeConfig& cfg) {
  switch (cfg.criterion) {
    case Criterion::l2:
      if (cfg.form == Form::primal || cfg.form == Form::schur ||
          cfg.form == Form::slack) {
        return minimize_level(
            assemble_l2_min(g, sys, n, cfg.form, cfg.shared_slack), "t",
            true, cfg.solver);
      } else {
        const ChannelDims dims = perf_dims(g, sys);
        return bisect_level(
            [&](double gamma) {
              return assemble_dissipativity(g, sys, n, l2_index(gamma, dims),
                                            cfg.form, cfg.shared_slack);
            },
            cfg);
      }
    case Criterion::quadratic:
      if (!index)
        throw std::invalid_argument(
            "quadratic criterion requires a stored index");
      return feasibility(assemble_dissipativity(g, sys, n, *index, cfg.form,
                                                cfg.shared_slack),
                         cfg.solver);
    case Criterion::energy_to_peak:
      return minimize_level(
          assemble_energy_to_peak(g, sys, n, cfg.form, cfg.shared_slack),
          "gamma", false, cfg.solver);
  }
  throw std::logic_error("unreachable");
}

AnalysisReport analyze_uncertain(const ConstrainingGraph& g, int n,
                                 const LfrAt& lfr,
                                 const std::optional<PerformanceIndex>& index,
                                 const AnalyzeConfig& cfg) {
  switch (cfg.criterion) {
    case Criterion::l2: {
      const ChannelDims dims = perf_dims(g, lfr);
      return bisect_level(
          [&](double gamma) {
            return assemble_robust_performance(g, lfr, n,
                                               l2_index(gamma, dims),
                                               cfg.form, cfg.mult,
                                               cfg.shared_slack);
          },
          cfg);
    }
    case Criterion::quadratic:
      if (!index)
        throw std::invalid_argument(
            "quadratic criterion requires a stored index");
      return feasibility(
          assemble_robust_performance(g, lfr, n, *index, cfg.form, cfg.mult,
                                      cfg.shared_slack),
          cfg.solver);
    case Criterion::energy_to_peak:
      throw std::invalid_argument(
          "energy-to-peak analysis has no robust form");
  }
  throw std::logic_error("unreachable");
}

void stamp(AnalysisReport& rep, const AnalyzeConfig& cfg) {
  Certificate& c = rep.certificate;
  c.criterion = to_string(cfg.criterion);
  c.mode = to_string(cfg.mode);
  c.form = to_string(cfg.form);
  c.synthesis = false;
  c.shared = cfg.shared_slack;
  c.gamma = rep.gamma;
  if (cfg.mode == Mode::fixed_delta) c.delta = cfg.delta;
  if (cfg.mode == Mode::robust) c.multiplier = cfg.mult;
}

void require_uncertain(const CslsModel& model, const char* what) {
  if (!model.has_uncertainty())
    throw std::invalid_argument(std::string(what) +
                                " requires an uncertainty channel");
}

}  // namespace

AnalysisReport analyze(const CslsModel& model, const AnalyzeConfig& cfg) {
  require_valid_model(model);
  const int n = static_cast<int>(model.systems.state_dim());
  AnalysisReport rep;
  switch (cfg.mode) {
    case Mode::nominal:
      rep = analyze_channel(model.graph, n, by_label(model.systems),
                            model.index, cfg);
      break;
    case Mode::fixed_delta:
      require_uncertain(model, "fixed-delta analysis");
      rep = analyze_channel(model.graph, n, fixed_delta(model, cfg.delta),
                            model.index, cfg);
      break;
    case Mode::robust:
      require_uncertain(model, "robust analysis");
      rep = analyze_uncertain(model.graph, n, by_label_lfr(model),
                              model.index, cfg);
      break;
  }
  stamp(rep, cfg);
  return rep;
}

AnalysisReport analyze(const CslsModel& model, const Controller& ctrl,
                       const AnalyzeConfig& cfg) {
  require_valid_model(model);
  if (!model.has_control())
    throw std::invalid_argument(
        "closed-loop analysis requires a control channel");
  const int n = static_cast<int>(model.systems.state_dim());
  AnalysisReport rep;
  switch (cfg.mode) {
    case Mode::nominal:
      rep = analyze_channel(model.graph, n, close_loop(model, ctrl),
                            model.index, cfg);
      break;
    case Mode::fixed_delta:
      require_uncertain(model, "fixed-delta analysis");
      rep = analyze_channel(model.graph, n,
                            close_uncertain(model, ctrl, cfg.delta),
                            model.index, cfg);
      break;
    case Mode::robust:
      require_uncertain(model, "robust analysis");
      rep = analyze_uncertain(model.graph, n, close_lfr_family(model, ctrl),
                              model.index, cfg);
      break;
  }
  stamp(rep, cfg);
  return rep;
}

namespace {

double require_level(const Certificate& cert) {
  if (!std::isfinite(cert.gamma))
    throw std::invalid_argument("certificate does not record a level");
  return cert.gamma;
}

const MultiplierClass& require_multiplier(const Certificate& cert) {
  if (!cert.multiplier)
    throw std::invalid_argument(
        "robust certificate does not record its multiplier class");
  return *cert.multiplier;
}

LmiProblem rebuild_channel(const ConstrainingGraph& g, int n,
                           const SystemAt& sys,
                           const std::optional<PerformanceIndex>& index,
                           Criterion crit, Form form,
                           const Certificate& cert) {
  switch (crit) {
    case Criterion::l2:
      if (form == Form::primal || form == Form::schur || form == Form::slack)
        return assemble_l2_min(g, sys, n, form, cert.shared);
      return assemble_dissipativity(
          g, sys, n, l2_index(require_level(cert), perf_dims(g, sys)), form,
          cert.shared);
    case Criterion::quadratic:
      if (!index)
        throw std::invalid_argument(
            "quadratic certificate needs the model's stored index");
      return assemble_dissipativity(g, sys, n, *index, form, cert.shared);
    case Criterion::energy_to_peak:
      return assemble_energy_to_peak(g, sys, n, form, cert.shared);
  }
  throw std::logic_error("unreachable");
}

LmiProblem rebuild_core(const CslsModel& model, const Controller* ctrl,
                        const Certificate& cert) {
  require_valid_model(model);
  const ConstrainingGraph& g = model.graph;
  const int n = static_cast<int>(model.systems.state_dim());
  const Criterion crit = criterion_from_string(cert.criterion);
  const Mode mode = mode_from_string(cert.mode);
  const Form form =
      cert.form.empty() ? Form::slack : form_from_string(cert.form);

  if (cert.synthesis) {
    if (ctrl)
      throw std::invalid_argument(
          "synthesis certificates embed the gain; rebuild without a "
          "controller");
    if (mode == Mode::nominal) {
      switch (crit) {
        case Criterion::l2:
          return assemble_l2_min_synthesis(g, open_loop(model), n, form,
                                           cert.shared);
        case Criterion::quadratic:
          if (!model.index)
            throw std::invalid_argument(
                "quadratic certificate needs the model's stored index");
          return assemble_synthesis(g, open_loop(model), n, *model.index,
                                    form, cert.shared);
        case Criterion::energy_to_peak:
          break;
      }
      throw std::invalid_argument(
          "energy-to-peak synthesis certificates do not exist");
    }
    if (mode != Mode::robust)
      throw std::invalid_argument("synthesis modes are nominal and robust");
    require_uncertain(model, "robust synthesis certificate");
    const OpenLoopLfrAt ol = open_loop_lfr(model);
    ChannelDims dims;
    for (const Edge& e : g.edges)
      if (!dims.count(e.label)) {
        const LfrMode m = ol(e.label).lfr;
        dims.emplace(e.label, std::make_pair(m.perf_in(), m.perf_out()));
      }
    switch (crit) {
      case Criterion::l2:
        return assemble_robust_synthesis(
            g, ol, n, l2_index(require_level(cert), dims),
            require_multiplier(cert), cert.shared);
      case Criterion::quadratic:
        if (!model.index)
          throw std::invalid_argument(
              "quadratic certificate needs the model's stored index");
        return assemble_robust_synthesis(g, ol, n, *model.index,
                                         require_multiplier(cert),
                                         cert.shared);
      case Criterion::energy_to_peak:
        break;
    }
    throw std::invalid_argument(
        "energy-to-peak synthesis certificates do not exist");
  }

  switch (mode) {
    case Mode::nominal:
      return rebuild_channel(
          g, n, ctrl ? close_loop(model, *ctrl) : by_label(model.systems),
          model.index, crit, form, cert);
    case Mode::fixed_delta: {
      require_uncertain(model, "fixed-delta certificate");
      if (!std::isfinite(cert.delta))
        throw std::invalid_argument(
            "fixed-delta certificate does not record delta");
      return rebuild_channel(g, n,
                             ctrl ? close_uncertain(model, *ctrl, cert.delta)
                                  : fixed_delta(model, cert.delta),
                             model.index, crit, form, cert);
    }
    case Mode::robust: {
      require_uncertain(model, "robust certificate");
      const LfrAt lfr =
          ctrl ? close_lfr_family(model, *ctrl) : by_label_lfr(model);
      switch (crit) {
        case Criterion::l2:
          return assemble_robust_performance(
              g, lfr, n, l2_index(require_level(cert), perf_dims(g, lfr)),
              form, require_multiplier(cert), cert.shared);
        case Criterion::quadratic:
          if (!model.index)
            throw std::invalid_argument(
                "quadratic certificate needs the model's stored index");
          return assemble_robust_performance(g, lfr, n, *model.index, form,
                                             require_multiplier(cert),
                                             cert.shared);
        case Criterion::energy_to_peak:
          throw std::invalid_argument(
              "energy-to-peak analysis has no robust form");
      }
      break;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

LmiProblem rebuild_problem(const CslsModel& model, const Certificate& cert) {
  return rebuild_core(model, nullptr, cert);
}

LmiProblem rebuild_problem(const CslsModel& model, const Controller& ctrl,
                           const Certificate& cert) {
  return rebuild_core(model, &ctrl, cert);
}

SynthesisReport synthesize(const CslsModel& model,
                           const SynthesizeConfig& cfg) {
  require_valid_model(model);
  if (!model.has_control())
    throw std::invalid_argument("synthesis requires a control channel");
  const ConstrainingGraph& g = model.graph;
  const int n = static_cast<int>(model.systems.state_dim());

  AnalysisReport run;
  Form used = cfg.form;
  if (cfg.mode == Mode::nominal) {
    switch (cfg.criterion) {
      case Criterion::l2:
        run = minimize_level(assemble_l2_min_synthesis(g, open_loop(model), n,
                                                       cfg.form,
                                                       cfg.shared_gain),
                             "t", true, cfg.solver);
        break;
      case Criterion::quadratic:
        if (!model.index)
          throw std::invalid_argument(
              "quadratic synthesis requires a stored index");
        run = feasibility(assemble_synthesis(g, open_loop(model), n,
                                             *model.index, cfg.form,
                                             cfg.shared_gain),
                          cfg.solver);
        break;
      case Criterion::energy_to_peak:
        throw std::invalid_argument(
            "energy-to-peak synthesis is not available");
    }
  } else if (cfg.mode == Mode::robust) {
    require_uncertain(model, "robust synthesis");
    used = Form::dual_slack;
    const OpenLoopLfrAt ol = open_loop_lfr(model);
    switch (cfg.criterion) {
      case Criterion::l2: {
        ChannelDims dims;
        for (const Edge& e : g.edges)
          if (!dims.count(e.label)) {
            const LfrMode m = ol(e.label).lfr;
            dims.emplace(e.label,
                         std::make_pair(m.perf_in(), m.perf_out()));
          }
        AnalyzeConfig probe_cfg;
        probe_cfg.solver = cfg.solver;
        probe_cfg.bisect_lo = cfg.bisect_lo;
        probe_cfg.bisect_hi = cfg.bisect_hi;
        probe_cfg.rel_tol = cfg.rel_tol;
        run = bisect_level(
            [&](double gamma) {
              return assemble_robust_synthesis(g, ol, n,
                                               l2_index(gamma, dims),
                                               cfg.mult, cfg.shared_gain);
            },
            probe_cfg);
        break;
      }
      case Criterion::quadratic:
        if (!model.index)
          throw std::invalid_argument(
              "quadratic synthesis requires a stored index");
        run = feasibility(assemble_robust_synthesis(g, ol, n, *model.index,
                                                    cfg.mult,
                                                    cfg.shared_gain),
                          cfg.solver);
        break;
      case Criterion::energy_to_peak:
        throw std::invalid_argument(
            "energy-to-peak synthesis is not available");
    }
  } else {
    throw std::invalid_argument("synthesis modes are nominal and robust");
  }

  SynthesisReport rep;
  rep.feasible = run.feasible;
  rep.gamma = run.gamma;
  rep.certificate = std::move(run.certificate);
  rep.residuals = std::move(run.residuals);
  rep.trace = std::move(run.trace);
  rep.solve = std::move(run.solve);
  rep.certificate.criterion = to_string(cfg.criterion);
  rep.certificate.mode = to_string(cfg.mode);
  rep.certificate.form = to_string(used);
  rep.certificate.synthesis = true;
  rep.certificate.shared = cfg.shared_gain;
  rep.certificate.gamma = rep.gamma;
  if (cfg.mode == Mode::robust) rep.certificate.multiplier = cfg.mult;

  if (rep.feasible) {
    rep.controller = recover_controller(rep.certificate, g);
    if (cfg.reanalyze) {
      AnalyzeConfig acfg;
      acfg.criterion = cfg.criterion;
      acfg.mode = cfg.mode;
      acfg.form = used;
      acfg.shared_slack = cfg.shared_gain;
      acfg.mult = cfg.mult;
      acfg.bisect_lo = cfg.bisect_lo;
      acfg.bisect_hi = cfg.bisect_hi;
      acfg.rel_tol = cfg.rel_tol;
      acfg.solver = cfg.solver;
      rep.closed_loop = analyze(model, rep.controller, acfg);
    }
  }
  return rep;
}

namespace {

std::vector<SweepRow> sweep_core(const CslsModel& model,
                                 const Controller* ctrl, AnalyzeConfig cfg,
                                 const std::vector<double>& deltas,
                                 int jobs) {
  cfg.mode = Mode::fixed_delta;
  std::vector<SweepRow> rows(deltas.size());
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (size_t i = next.fetch_add(1); i < deltas.size();
         i = next.fetch_add(1)) {
      try {
        AnalyzeConfig c = cfg;
        c.delta = deltas[i];
        rows[i].delta = deltas[i];
        rows[i].report = ctrl ? analyze(model, *ctrl, c) : analyze(model, c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const int threads =
      std::max(1, std::min(jobs, static_cast<int>(deltas.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return rows;
}

}  // namespace

std::vector<SweepRow> sweep_delta(const CslsModel& model, AnalyzeConfig cfg,
                                  const std::vector<double>& deltas,
                                  int jobs) {
  return sweep_core(model, nullptr, std::move(cfg), deltas, jobs);
}

std::vector<SweepRow> sweep_delta(const CslsModel& model,
                                  const Controller& ctrl, AnalyzeConfig cfg,
                                  const std::vector<double>& deltas,
                                  int jobs) {
  return sweep_core(model, &ctrl, std::move(cfg), deltas, jobs);
}

}  // namespace csls
