#include "csls/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace csls {

MatrixXd ConeBlock::eval(const VectorXd& y) const {
  MatrixXd out = F0;
  for (const auto& [id, coeff] : F) out += y(id) * coeff;
  return out;
}

ConicProgram lower(const LmiProblem& p) {
  ConicProgram cp;
  cp.num_vars = static_cast<int>(p.vars.size());
  cp.c = VectorXd::Zero(cp.num_vars);
  if (p.objective_id >= 0) {
    if (p.objective_id >= cp.num_vars)
      throw std::logic_error("objective id out of range");
    cp.c(p.objective_id) = 1.0;
  }

  std::set<int> used;
  for (const auto& block : p.blocks) {
    ConeBlock cone;
    cone.tag = block.tag;
    const bool flip =
        block.sense == Sense::neg_def || block.sense == Sense::neg_semi;
    const bool strict =
        block.sense == Sense::pos_def || block.sense == Sense::neg_def;
    const double sign = flip ? -1.0 : 1.0;
    cone.F0 = sign * block.expr.constant_part();
    if (strict) {
      cone.shift = strictness_epsilon(block);
      cone.F0 -= cone.shift *
                 MatrixXd::Identity(block.expr.rows(), block.expr.cols());
    }
    for (const auto& [id, coeff] : block.expr.coefficients()) {
      if (id < 0 || id >= cp.num_vars)
        throw std::logic_error("coefficient id out of range in block " +
                               block.tag);
      if (max_abs(coeff) == 0.0) continue;  // cancelled terms
      cone.F[id] = sign * coeff;
      used.insert(id);
    }
    cp.blocks.push_back(std::move(cone));
  }

  for (const auto& v : p.vars.variables()) {
    for (int k = 0; k < v.count(); ++k) {
      if (!used.count(v.offset + k))
        throw std::logic_error("variable " + v.name +
                               " does not appear in any block");
    }
  }
  return cp;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::inaccurate: return "inaccurate";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::failed: return "failed";
  }
  return "unknown";
}

namespace {

using BlockMats = std::vector<MatrixXd>;

// Largest alpha in (0, 1] with M + alpha*dM > 0, given M > 0.
double step_to_boundary(const MatrixXd& M, const MatrixXd& dM) {
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return 0.0;
  const MatrixXd L = llt.matrixL();
  MatrixXd W = L.triangularView<Eigen::Lower>().solve(dM);
  W = L.triangularView<Eigen::Lower>().solve(W.transpose().eval());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(
      ((W + W.transpose()) / 2).eval(), Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0.0) return 1.0;
  return std::min(1.0, -1.0 / lmin);
}

struct Workspace {
  const ConicProgram& p;
  VectorXd y;
  BlockMats X, S;

  explicit Workspace(const ConicProgram& prog) : p(prog) {
    y = VectorXd::Zero(p.num_vars);
    double beta = 10.0;
    for (const auto& b : p.blocks) {
      beta = std::max(beta, b.F0.norm());
      for (const auto& [id, coeff] : b.F) beta = std::max(beta, coeff.norm());
    }
    for (const auto& b : p.blocks) {
      X.push_back(beta * MatrixXd::Identity(b.dim(), b.dim()));
      S.push_back(beta * MatrixXd::Identity(b.dim(), b.dim()));
    }
  }

  Eigen::Index order() const {
    Eigen::Index n = 0;
    for (const auto& b : p.blocks) n += b.dim();
    return n;
  }

  // <F_i, X> over all blocks.
  VectorXd apply(const BlockMats& Xs) const {
    VectorXd out = VectorXd::Zero(p.num_vars);
    for (size_t b = 0; b < p.blocks.size(); ++b)
      for (const auto& [id, coeff] : p.blocks[b].F)
        out(id) += (coeff * Xs[b]).trace();
    return out;
  }

  BlockMats combine(const VectorXd& dy) const {
    BlockMats out;
    for (const auto& b : p.blocks) {
      MatrixXd m = MatrixXd::Zero(b.dim(), b.dim());
      for (const auto& [id, coeff] : b.F) m += dy(id) * coeff;
      out.push_back(std::move(m));
    }
    return out;
  }
};

}  // namespace

SolveResult solve(const ConicProgram& p, const SolveOptions& opt) {
  SolveResult res;
  res.y = VectorXd::Zero(p.num_vars);

  double f0_norm = 0.0, data_scale = 1.0;
  for (const auto& b : p.blocks) {
    f0_norm += b.F0.squaredNorm();
    for (const auto& [id, coeff] : b.F)
      data_scale = std::max(data_scale, coeff.norm());
  }
  f0_norm = std::sqrt(f0_norm);
  const double c_norm = p.num_vars ? p.c.norm() : 0.0;

  if (p.num_vars == 0) {  // constant feasibility check
    double worst = 0.0;
    for (const auto& b : p.blocks) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(b.F0,
                                                  Eigen::EigenvaluesOnly);
      worst = std::min(worst, eig.eigenvalues().minCoeff());
    }
    res.status = worst >= -1e-12 * (1 + f0_norm) ? SolveStatus::optimal
                                                 : SolveStatus::infeasible;
    return res;
  }

  Workspace w(p);
  const Eigen::Index N = w.order();
  const size_t nb = p.blocks.size();
  int stalls = 0;
  double best_score = std::numeric_limits<double>::infinity();
  int flat_iters = 0;

  for (int iter = 0; iter <= opt.max_iters; ++iter) {
    res.iterations = iter;

    // Residuals and factorizations at the current iterate.
    BlockMats Sinv(nb), Rp(nb);
    bool factor_ok = true;
    double mu = 0.0, rp_norm2 = 0.0;
    BlockMats Fy = w.combine(w.y);
    for (size_t b = 0; b < nb; ++b) {
      Eigen::LLT<MatrixXd> llt(w.S[b]);
      if (llt.info() != Eigen::Success) {
        factor_ok = false;
        break;
      }
      Sinv[b] = llt.solve(MatrixXd::Identity(w.S[b].rows(), w.S[b].cols()));
      mu += (w.X[b] * w.S[b]).trace();
      Rp[b] = w.S[b] - p.blocks[b].F0 - Fy[b];
      rp_norm2 += Rp[b].squaredNorm();
    }
    if (!factor_ok) break;
    mu /= static_cast<double>(N);
    res.mu = mu;

    const VectorXd rd = p.c - w.apply(w.X);
    res.primal_residual = std::sqrt(rp_norm2) / (1 + f0_norm);
    res.dual_residual = rd.norm() / (1 + c_norm);
    const double pobj = p.c.dot(w.y);
    double dobj = 0.0;
    for (size_t b = 0; b < nb; ++b) dobj -= (p.blocks[b].F0 * w.X[b]).trace();
    res.gap = std::abs(pobj - dobj) / (1 + std::abs(pobj) + std::abs(dobj));
    res.objective = pobj;
    res.y = w.y;

    if (opt.verbosity >= 2)
      std::cerr << "sdp iter " << iter << " mu " << mu << " pres "
                << res.primal_residual << " dres " << res.dual_residual
                << " gap " << res.gap << " obj " << pobj << "\n";

    if (res.primal_residual <= opt.tol && res.dual_residual <= opt.tol &&
        res.gap <= opt.tol) {
      res.status = SolveStatus::optimal;
      return res;
    }

    // Near-converged but flat residuals mean the numerical floor is
    // reached: stop grinding and classify below. Only engages once the
    // composite score is small, since the early phase is not monotone.
    const double score =
        std::max({res.primal_residual, res.dual_residual, res.gap});
    if (score <= 1e-3) {
      if (score < 0.9 * best_score) {
        best_score = score;
        flat_iters = 0;
      } else if (++flat_iters >= 25) {
        break;
      }
    }

    // Certificate of an empty cone: X ray with <F_i, X> = 0, <F0, X> < 0.
    double trX = 0.0;
    for (const auto& Xb : w.X) trX += Xb.trace();
    if (trX > 1e8) {
      const VectorXd ray = w.apply(w.X) / trX;
      double v0 = 0.0;
      for (size_t b = 0; b < nb; ++b) v0 += (p.blocks[b].F0 * w.X[b]).trace();
      v0 /= trX;
      if (ray.lpNorm<Eigen::Infinity>() <= 1e-8 * data_scale &&
          v0 < -1e-9 * (1 + f0_norm)) {
        res.status = SolveStatus::infeasible;
        res.message = "improving ray in the dual cone";
        return res;
      }
    }
    // Certificate of unbounded objective: y ray staying in the cone.
    const double ynorm = w.y.lpNorm<Eigen::Infinity>();
    if (ynorm > 1e8) {
      const VectorXd yhat = w.y / ynorm;
      if (p.c.dot(yhat) < -1e-9 * (1 + c_norm)) {
        double lmin = 0.0;
        BlockMats dir = w.combine(yhat);
        for (const auto& d : dir) {
          Eigen::SelfAdjointEigenSolver<MatrixXd> eig(d,
                                                      Eigen::EigenvaluesOnly);
          lmin = std::min(lmin, eig.eigenvalues().minCoeff());
        }
        if (lmin >= -1e-9 * data_scale) {
          res.status = SolveStatus::unbounded;
          res.message = "objective decreases along a feasible ray";
          return res;
        }
      }
    }
    if (iter == opt.max_iters) break;

    // Schur complement M_ij = <F_i, X F_j S^-1> and affine terms.
    MatrixXd M = MatrixXd::Zero(p.num_vars, p.num_vars);
    VectorXd a = VectorXd::Zero(p.num_vars);  // <F_i, S^-1>
    VectorXd r = VectorXd::Zero(p.num_vars);  // <F_i, X Rp S^-1>
    for (size_t b = 0; b < nb; ++b) {
      const auto& Fb = p.blocks[b].F;
      std::vector<std::pair<int, MatrixXd>> T;
      for (const auto& [id, coeff] : Fb)
        T.emplace_back(id, w.X[b] * coeff * Sinv[b]);
      for (const auto& [i, Fi] : Fb) {
        for (const auto& [j, Tj] : T) M(i, j) += (Fi * Tj).trace();
        a(i) += (Fi * Sinv[b]).trace();
        r(i) += (Fi * w.X[b] * Rp[b] * Sinv[b]).trace();
      }
    }
    M = ((M + M.transpose()) / 2).eval();
    Eigen::LDLT<MatrixXd> mldlt(M);
    if (mldlt.info() != Eigen::Success) break;
    auto direction = [&](const VectorXd& rhs, const BlockMats* corr,
                         double sigma_mu, VectorXd& dy, BlockMats& dX,
                         BlockMats& dS) {
      dy = mldlt.solve(rhs);
      if (!dy.allFinite()) return false;
      dS = w.combine(dy);
      dX.assign(nb, MatrixXd());
      for (size_t b = 0; b < nb; ++b) {
        dS[b] -= Rp[b];
        MatrixXd dXb = sigma_mu * Sinv[b] - w.X[b] - w.X[b] * dS[b] * Sinv[b];
        if (corr) dXb -= (*corr)[b] * Sinv[b];
        dX[b] = ((dXb + dXb.transpose()) / 2).eval();
      }
      return true;
    };

    // Predictor.
    VectorXd dy_a;
    BlockMats dX_a, dS_a;
    if (!direction(-p.c + r, nullptr, 0.0, dy_a, dX_a, dS_a)) break;
    double ap = 1.0, ad = 1.0;
    for (size_t b = 0; b < nb; ++b) {
      ap = std::min(ap, step_to_boundary(w.X[b], dX_a[b]));
      ad = std::min(ad, step_to_boundary(w.S[b], dS_a[b]));
    }
    double mu_aff = 0.0;
    for (size_t b = 0; b < nb; ++b)
      mu_aff += ((w.X[b] + ap * dX_a[b]) * (w.S[b] + ad * dS_a[b])).trace();
    mu_aff /= static_cast<double>(N);
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3);
    sigma = std::min(1.0, std::max(sigma, 1e-8));

    // Corrector.
    VectorXd h = VectorXd::Zero(p.num_vars);
    BlockMats corr(nb);
    for (size_t b = 0; b < nb; ++b) {
      corr[b] = dX_a[b] * dS_a[b];
      for (const auto& [id, coeff] : p.blocks[b].F)
        h(id) += (coeff * corr[b] * Sinv[b]).trace();
    }
    VectorXd dy;
    BlockMats dX, dS;
    if (!direction(sigma * mu * a - p.c + r - h, &corr, sigma * mu, dy, dX,
                   dS))
      break;

    ap = ad = 1.0;
    for (size_t b = 0; b < nb; ++b) {
      ap = std::min(ap, opt.tau * step_to_boundary(w.X[b], dX[b]));
      ad = std::min(ad, opt.tau * step_to_boundary(w.S[b], dS[b]));
    }
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    if (std::max(ap, ad) < 1e-8) {
      if (++stalls >= 3) break;
    } else {
      stalls = 0;
    }
    for (size_t b = 0; b < nb; ++b) {
      w.X[b] += ap * dX[b];
      w.X[b] = ((w.X[b] + w.X[b].transpose()) / 2).eval();
      w.S[b] += ad * dS[b];
      w.S[b] = ((w.S[b] + w.S[b].transpose()) / 2).eval();
    }
    w.y += ad * dy;
  }

  if (res.primal_residual <= opt.accept_tol && res.gap <= opt.accept_tol &&
      res.dual_residual <=
          std::max(opt.accept_tol, opt.accept_dual_tol)) {
    res.status = SolveStatus::inaccurate;
    res.message = "stopped above target tolerance";
  } else {
    res.status = SolveStatus::failed;
    std::ostringstream msg;
    msg << "no convergence after " << res.iterations
        << " iterations (pres " << res.primal_residual << ", dres "
        << res.dual_residual << ", gap " << res.gap << ")";
    res.message = msg.str();
  }
  return res;
}

MarginResult feasibility_margin(const ConicProgram& p,
                                const SolveOptions& opt) {
  constexpr double kCap = 1e3;
  ConicProgram mp = p;
  const int theta = mp.num_vars;
  mp.num_vars += 1;
  mp.c = VectorXd::Zero(mp.num_vars);
  mp.c(theta) = -1.0;  // maximize theta
  for (auto& b : mp.blocks)
    b.F[theta] = -MatrixXd::Identity(b.dim(), b.dim());
  ConeBlock cap;
  cap.F0 = MatrixXd::Constant(1, 1, kCap);
  cap.F[theta] = MatrixXd::Constant(1, 1, -1.0);
  cap.tag = "margin-cap";
  mp.blocks.push_back(std::move(cap));

  MarginResult out;
  out.raw = solve_auto(mp, opt);
  if (!out.raw.usable())
    throw std::runtime_error("feasibility margin solve " +
                             to_string(out.raw.status) +
                             (out.raw.message.empty() ? ""
                                                      : ": " + out.raw.message));
  out.margin = out.raw.y(theta);
  out.y = out.raw.y.head(theta);
  return out;
}

MarginResult feasibility_margin(const LmiProblem& p, const SolveOptions& opt) {
  return feasibility_margin(lower(p), opt);
}

BisectionTrace bisect_gamma(const std::function<MarginResult(double)>& probe,
                            double lo, double hi, double rel_tol) {
  if (!(0 < lo && lo < hi))
    throw std::invalid_argument("bisection bracket must satisfy 0 < lo < hi");
  BisectionTrace trace;
  auto run = [&](double g) {
    MarginResult r = probe(g);
    trace.points.push_back({g, r.margin, r.feasible()});
    return r;
  };

  MarginResult at_hi = run(hi);
  if (!at_hi.feasible())
    throw std::runtime_error("infeasible at upper bracket gamma=" +
                             std::to_string(hi));
  trace.best = at_hi;
  trace.gamma = hi;

  MarginResult at_lo = run(lo);
  if (at_lo.feasible()) {
    trace.best = at_lo;
    trace.gamma = lo;
  } else {
    while (hi - lo > rel_tol * hi) {
      const double mid = std::sqrt(lo * hi);
      MarginResult at_mid = run(mid);
      if (at_mid.feasible()) {
        hi = mid;
        trace.best = at_mid;
        trace.gamma = mid;
      } else {
        lo = mid;
      }
    }
  }

  double max_inf = 0.0, min_feas = std::numeric_limits<double>::infinity();
  for (const auto& pt : trace.points) {
    if (pt.feasible)
      min_feas = std::min(min_feas, pt.gamma);
    else
      max_inf = std::max(max_inf, pt.gamma);
  }
  if (max_inf >= min_feas)
    throw std::runtime_error("feasibility probes are not monotone in gamma");
  return trace;
}

}  // namespace csls
