#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "csls/sdp.hpp"

namespace csls {

void write_sdpa(std::ostream& os, const ConicProgram& p) {
  os << std::setprecision(17);
  os << p.num_vars << "\n";
  os << p.blocks.size() << "\n";
  for (size_t b = 0; b < p.blocks.size(); ++b)
    os << p.blocks[b].dim() << (b + 1 < p.blocks.size() ? " " : "\n");
  for (int i = 0; i < p.num_vars; ++i)
    os << p.c(i) << (i + 1 < p.num_vars ? " " : "\n");
  if (p.blocks.empty()) os << "\n";
  if (p.num_vars == 0) os << "\n";

  // SDPA solves min c^T x s.t. sum_k x_k F_k - F0 >= 0, entries upper
  // triangular, matrices and blocks 1-based.
  auto emit = [&](int k, int b, const MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i; j < m.cols(); ++j)
        if (m(i, j) != 0.0)
          os << k << " " << b << " " << i + 1 << " " << j + 1 << " " << m(i, j)
             << "\n";
  };
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    emit(0, static_cast<int>(b) + 1, (-p.blocks[b].F0).eval());
    for (const auto& [id, coeff] : p.blocks[b].F)
      emit(id + 1, static_cast<int>(b) + 1, coeff);
  }
}

SdpaSolution read_sdpa_solution(std::istream& is, int num_vars) {
  SdpaSolution sol;
  sol.y = VectorXd::Zero(num_vars);
  std::string line;
  bool have_phase = false, have_x = false;

  auto value_after_equals = [](const std::string& s) {
    const auto pos = s.find('=');
    if (pos == std::string::npos) return std::string();
    std::istringstream rest(s.substr(pos + 1));
    std::string tok;
    rest >> tok;
    return tok;
  };

  while (std::getline(is, line)) {
    if (line.find("phase.value") != std::string::npos) {
      const std::string phase = value_after_equals(line);
      have_phase = true;
      if (phase == "pdOPT")
        sol.status = SolveStatus::optimal;
      else if (phase == "pdFEAS")
        sol.status = SolveStatus::inaccurate;
      else if (phase == "pINF_dFEAS" || phase == "dUNBD")
        sol.status = SolveStatus::infeasible;
      else if (phase == "pFEAS_dINF" || phase == "pUNBD")
        sol.status = SolveStatus::unbounded;
      else
        sol.status = SolveStatus::failed;
    } else if (line.find("objValPrimal") != std::string::npos) {
      sol.obj_primal = std::stod(value_after_equals(line));
    } else if (line.find("objValDual") != std::string::npos) {
      sol.obj_dual = std::stod(value_after_equals(line));
    } else if (line.find("Iteration") != std::string::npos ||
               line.find("iteration") != std::string::npos) {
      const std::string v = value_after_equals(line);
      if (!v.empty()) sol.iterations = std::atoi(v.c_str());
    } else if (line.find("xVec") != std::string::npos) {
      // Values follow on this or the next lines, wrapped in {...}.
      std::string body = line.substr(line.find("xVec") + 4);
      while (body.find('}') == std::string::npos && std::getline(is, line))
        body += line;
      const auto open = body.find('{');
      const auto close = body.find('}');
      if (open == std::string::npos || close == std::string::npos)
        throw std::runtime_error("malformed xVec in solver output");
      std::string inner = body.substr(open + 1, close - open - 1);
      for (auto& ch : inner)
        if (ch == ',') ch = ' ';
      std::istringstream nums(inner);
      double v = 0.0;
      int k = 0;
      while (nums >> v) {
        if (k >= num_vars)
          throw std::runtime_error("xVec longer than variable count");
        sol.y(k++) = v;
      }
      if (k != num_vars)
        throw std::runtime_error("xVec shorter than variable count");
      have_x = true;
    }
  }
  if (!have_phase)
    throw std::runtime_error("solver output lacks phase.value");
  if (!have_x && (sol.status == SolveStatus::optimal ||
                  sol.status == SolveStatus::inaccurate))
    throw std::runtime_error("solver output lacks xVec");
  return sol;
}

SolverBackend selected_backend() {
  const char* env = std::getenv("CSLS_SDP_SOLVER");
  if (!env || !*env) return SolverBackend::embedded;
  const std::string v(env);
  if (v == "embedded") return SolverBackend::embedded;
  if (v == "sdpa") return SolverBackend::sdpa;
  throw std::runtime_error("unknown CSLS_SDP_SOLVER value: " + v);
}

namespace {

SolveResult solve_external_sdpa(const ConicProgram& p,
                                const SolveOptions& opt) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();
  const auto stamp = std::to_string(
      std::chrono::steady_clock::now().time_since_epoch().count());
  const fs::path in = dir / ("csls_" + stamp + ".dat-s");
  const fs::path out = dir / ("csls_" + stamp + ".result");
  {
    std::ofstream os(in);
    if (!os) throw std::runtime_error("cannot write " + in.string());
    write_sdpa(os, p);
  }
  const std::string cmd = "sdpa -ds " + in.string() + " -o " + out.string() +
                          (opt.verbosity >= 2 ? "" : " > /dev/null 2>&1");
  const int rc = std::system(cmd.c_str());
  if (rc != 0)
    throw std::runtime_error(
        "external sdpa invocation failed (is the sdpa binary on PATH?)");
  std::ifstream is(out);
  if (!is) throw std::runtime_error("sdpa produced no output file");
  const SdpaSolution sol = read_sdpa_solution(is, p.num_vars);
  std::error_code ec;
  fs::remove(in, ec);
  fs::remove(out, ec);

  SolveResult res;
  res.status = sol.status;
  res.y = sol.y;
  res.objective = p.num_vars ? p.c.dot(sol.y) : 0.0;
  res.iterations = sol.iterations;
  res.gap = std::abs(sol.obj_primal - sol.obj_dual) /
            (1 + std::abs(sol.obj_primal) + std::abs(sol.obj_dual));
  res.message = "external sdpa";
  return res;
}

}  // namespace

SolveResult solve_auto(const ConicProgram& p, const SolveOptions& opt) {
  switch (selected_backend()) {
    case SolverBackend::sdpa: return solve_external_sdpa(p, opt);
    case SolverBackend::embedded: break;
  }
  return solve(p, opt);
}

}  // namespace csls
