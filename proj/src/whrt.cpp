#include "csls/whrt.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace csls {

Strategy strategy_from_string(const std::string& s) {
  if (s == "zero") return Strategy::zero;
  if (s == "hold") return Strategy::hold;
  throw std::invalid_argument("unknown strategy '" + s +
                              "' (expected zero|hold)");
}

std::string to_string(Strategy s) {
  return s == Strategy::zero ? "zero" : "hold";
}

bool satisfies_window_rule(const LossWord& w, int n, int k) {
  if (n < 1 || k < 0) throw std::invalid_argument("bad window parameters");
  const int len = static_cast<int>(w.size());
  for (int start = 0; start + n <= len; ++start) {
    int hits = 0;
    for (int j = 0; j < n; ++j) hits += w[start + j] == '1';
    if (hits < k) return false;
  }
  return true;
}

bool factor_admissible(const LossWord& w, int n, int k) {
  if (n < 1 || k < 0) throw std::invalid_argument("bad window parameters");
  const int len = static_cast<int>(w.size());
  for (int j = 1; j <= std::min(len, n); ++j) {
    const int need = k - (n - j);
    if (need <= 0) continue;
    for (int start = 0; start + j <= len; ++start) {
      int hits = 0;
      for (int t = 0; t < j; ++t) hits += w[start + t] == '1';
      if (hits < need) return false;
    }
  }
  return true;
}

LossWord expand_labels(const std::vector<int>& labels) {
  LossWord w;
  for (int l : labels) {
    if (l < 1) throw std::invalid_argument("labels must be >= 1");
    w.push_back('1');
    w.append(static_cast<std::size_t>(l - 1), '0');
  }
  return w;
}

std::vector<int> block_labels(const LossWord& w) {
  std::vector<int> labels;
  for (std::size_t i = 0; i < w.size();) {
    if (w[i] != '1') {
      throw std::invalid_argument(
          "word does not decompose into blocks (loss before first success)");
    }
    std::size_t j = i + 1;
    while (j < w.size() && w[j] == '0') ++j;
    labels.push_back(static_cast<int>(j - i));
    i = j;
  }
  return labels;
}

ConstrainingGraph compile_graph(int n, int k) {
  if (n < 1) throw std::invalid_argument("window length must be >= 1");
  if (k < 1) {
    throw std::invalid_argument(
        "min_hits must be >= 1 (k = 0 leaves loss runs unbounded)");
  }
  if (k > n) throw std::invalid_argument("min_hits exceeds window length");
  if (n > 26) throw std::invalid_argument("window length too large");

  // Outcome automaton over the last n-1 attempt results; bit n-2 is the
  // oldest, bit 0 the most recent. A transition appends one outcome and its
  // admissibility is the window rule on the full n-outcome window.
  const int sbits = n - 1;
  const int num_states = 1 << sbits;
  const unsigned mask = static_cast<unsigned>(num_states - 1);
  auto step = [&](unsigned s, unsigned b) { return ((s << 1) | b) & mask; };
  auto allowed = [&](unsigned s, unsigned b) {
    const unsigned window = (s << 1) | b;
    return std::popcount(window) >= k;
  };

  // Keep only states on bi-infinite admissible paths: iteratively drop
  // states without an allowed successor or predecessor.
  std::vector<bool> live(num_states, true);
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<bool> has_out(num_states, false), has_in(num_states, false);
    for (int s = 0; s < num_states; ++s) {
      if (!live[s]) continue;
      for (unsigned b = 0; b <= 1; ++b) {
        if (allowed(s, b) && live[step(s, b)]) {
          has_out[s] = true;
          has_in[step(s, b)] = true;
        }
      }
    }
    for (int s = 0; s < num_states; ++s) {
      if (live[s] && !(has_out[s] && has_in[s])) {
        live[s] = false;
        changed = true;
      }
    }
  }
  const unsigned all_ones = mask;
  if (!live[all_ones]) {
    throw std::logic_error("all-success state trimmed; constraint vacuous");
  }

  // Contract one success plus its loss run into a labeled edge.
  struct CEdge {
    unsigned tail, head;
    int label;
  };
  std::vector<CEdge> cedges;
  const int max_label = n - k + 1;
  for (int s = 0; s < num_states; ++s) {
    if (!live[s]) continue;
    if (!allowed(s, 1) || !live[step(s, 1)]) continue;
    unsigned t = step(s, 1);
    cedges.push_back({static_cast<unsigned>(s), t, 1});
    for (int l = 2; l <= max_label; ++l) {
      if (!allowed(t, 0) || !live[step(t, 0)]) break;
      t = step(t, 0);
      cedges.push_back({static_cast<unsigned>(s), t, l});
    }
  }

  // Trim the contracted graph the same way (normally a no-op).
  std::set<unsigned> cnodes;
  for (const auto& e : cedges) {
    cnodes.insert(e.tail);
    cnodes.insert(e.head);
  }
  for (bool changed = true; changed;) {
    changed = false;
    std::set<unsigned> has_out, has_in;
    for (const auto& e : cedges) {
      if (cnodes.count(e.tail) && cnodes.count(e.head)) {
        has_out.insert(e.tail);
        has_in.insert(e.head);
      }
    }
    for (auto it = cnodes.begin(); it != cnodes.end();) {
      if (!has_out.count(*it) || !has_in.count(*it)) {
        it = cnodes.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  std::erase_if(cedges, [&](const CEdge& e) {
    return !cnodes.count(e.tail) || !cnodes.count(e.head);
  });
  if (!cnodes.count(all_ones)) {
    throw std::logic_error("all-success state lost in contraction");
  }

  // Merge states with identical outgoing label structure (iterated forward
  // bisimulation); the quotient has the same walk-label language.
  std::map<unsigned, int> cls;
  for (unsigned s : cnodes) cls[s] = 0;
  for (bool changed = true; changed;) {
    std::map<unsigned, std::set<std::pair<int, int>>> sig;
    for (const auto& e : cedges) sig[e.tail].insert({e.label, cls[e.head]});
    std::map<std::pair<int, std::set<std::pair<int, int>>>, int> renum;
    std::map<unsigned, int> next;
    for (unsigned s : cnodes) {
      auto key = std::make_pair(cls[s], sig[s]);
      auto [it, inserted] =
          renum.emplace(key, static_cast<int>(renum.size()));
      next[s] = it->second;
    }
    changed = next != cls;
    cls = std::move(next);
  }

  // Canonical numbering: traverse classes from the all-success class,
  // ordering new targets by (label, smallest member state).
  std::map<int, unsigned> smallest;
  for (unsigned s : cnodes) {
    auto it = smallest.find(cls[s]);
    if (it == smallest.end() || s < it->second) smallest[cls[s]] = s;
  }
  std::set<std::tuple<int, int, int>> qedges;  // (class, class, label)
  for (const auto& e : cedges) {
    qedges.insert({cls[e.tail], cls[e.head], e.label});
  }
  std::map<int, int> id;  // class -> node id
  std::vector<int> order;
  id[cls[all_ones]] = 1;
  order.push_back(cls[all_ones]);
  for (std::size_t qi = 0; qi < order.size(); ++qi) {
    const int c = order[qi];
    std::vector<std::tuple<int, unsigned, int>> outs;  // (label, member, cls)
    for (const auto& [tail, head, label] : qedges) {
      if (tail == c && !id.count(head)) {
        outs.push_back({label, smallest[head], head});
      }
    }
    std::sort(outs.begin(), outs.end());
    for (const auto& [label, member, target] : outs) {
      if (!id.count(target)) {
        id[target] = static_cast<int>(id.size()) + 1;
        order.push_back(target);
      }
    }
  }
  if (id.size() != smallest.size()) {
    throw std::logic_error("constraint graph not reachable from all-success");
  }

  ConstrainingGraph g;
  g.nodes.resize(id.size());
  std::iota(g.nodes.begin(), g.nodes.end(), 1);
  int seen_max_label = 0;
  for (const auto& [tail, head, label] : qedges) {
    g.edges.push_back({id[tail], id[head], label});
    seen_max_label = std::max(seen_max_label, label);
  }
  g.num_labels = seen_max_label;
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.tail, a.label, a.head) < std::tie(b.tail, b.label, b.head);
  });
  require_valid(g);
  return g;
}

void require_consistent(const BasePlant& p, const std::string& what) {
  const auto n = p.A.rows();
  if (p.A.cols() != n) throw std::invalid_argument(what + ": A must be square");
  require_shape(p.B_w, n, p.B_w.cols(), what + ".B_w");
  require_shape(p.B_u, n, p.B_u.cols(), what + ".B_u");
  require_shape(p.C, p.C.rows(), n, what + ".C");
  require_shape(p.D_w, p.C.rows(), p.B_w.cols(), what + ".D_w");
  require_shape(p.D_u, p.C.rows(), p.B_u.cols(), what + ".D_u");
  if (p.has_uncertainty()) {
    require_shape(p.B_u_delta, n, p.B_u.cols(), what + ".B_u_delta");
    require_shape(p.D_u_delta, p.C.rows(), p.B_u.cols(), what + ".D_u_delta");
  }
  if (p.index) {
    const auto dw = p.B_w.cols();
    const auto dz = p.C.rows();
    require_shape(p.index->Q, dw, dw, what + ".index.Q");
    require_shape(p.index->S, dw, dz, what + ".index.S");
    require_shape(p.index->R, dz, dz, what + ".index.R");
  }
}

namespace {

// Powers A^0..A^m.
std::vector<MatrixXd> powers(const MatrixXd& A, int m) {
  std::vector<MatrixXd> P;
  P.push_back(MatrixXd::Identity(A.rows(), A.cols()));
  for (int i = 1; i <= m; ++i) P.push_back(P.back() * A);
  return P;
}

// Lifted column pair for an input applied at the first sub-step and zeroed
// (zero) or repeated (hold) for the remaining l-1 sub-steps.
std::pair<MatrixXd, MatrixXd> lift_input_column(
    const std::vector<MatrixXd>& Ap, const MatrixXd& C, const MatrixXd& Bcol,
    const MatrixXd& Dcol, int l, Strategy s) {
  const auto n = Ap[0].rows();
  const auto dz = C.rows();
  const auto du = Bcol.cols();
  MatrixXd Bl;
  MatrixXd Dl(l * dz, du);
  if (s == Strategy::zero) {
    Bl = Ap[l - 1] * Bcol;
    Dl.topRows(dz) = Dcol;
    for (int r = 1; r < l; ++r) {
      Dl.middleRows(r * dz, dz) = C * Ap[r - 1] * Bcol;
    }
  } else {
    MatrixXd sum = MatrixXd::Zero(n, n);
    for (int j = 0; j < l; ++j) sum += Ap[j];
    Bl = sum * Bcol;
    Dl.topRows(dz) = Dcol;
    MatrixXd partial = MatrixXd::Zero(n, n);
    for (int r = 1; r < l; ++r) {
      partial += Ap[r - 1];
      Dl.middleRows(r * dz, dz) = C * partial * Bcol + Dcol;
    }
  }
  return {Bl, Dl};
}

}  // namespace

LiftedMode lift_mode(const BasePlant& p, int l, Strategy s) {
  require_consistent(p, "base plant");
  if (l < 1) throw std::invalid_argument("block length must be >= 1");
  const auto n = p.A.rows();
  const auto dw = p.B_w.cols();
  const auto dz = p.C.rows();
  const auto du = p.B_u.cols();
  const auto Ap = powers(p.A, l);

  LiftedMode m;
  m.sys.A = Ap[l];
  m.sys.B.resize(n, l * dw);
  for (int c = 0; c < l; ++c) {
    m.sys.B.middleCols(c * dw, dw) = Ap[l - 1 - c] * p.B_w;
  }
  m.sys.C.resize(l * dz, n);
  for (int r = 0; r < l; ++r) m.sys.C.middleRows(r * dz, dz) = p.C * Ap[r];
  m.sys.D = MatrixXd::Zero(l * dz, l * dw);
  for (int r = 0; r < l; ++r) {
    for (int c = 0; c <= r; ++c) {
      m.sys.D.block(r * dz, c * dw, dz, dw) =
          r == c ? p.D_w : MatrixXd(p.C * Ap[r - c - 1] * p.B_w);
    }
  }
  std::tie(m.ctrl.B_u, m.ctrl.D_u) =
      lift_input_column(Ap, p.C, p.B_u, p.D_u, l, s);
  if (p.has_uncertainty()) {
    UncertaintyChannel u;
    std::tie(u.B_wu, u.D_zpwu) =
        lift_input_column(Ap, p.C, p.B_u_delta, p.D_u_delta, l, s);
    u.C_zu = MatrixXd::Zero(du, n);
    u.D_zuwu = MatrixXd::Zero(du, du);
    u.D_zuwp = MatrixXd::Zero(du, l * dw);
    u.D_zu_u = MatrixXd::Identity(du, du);
    m.unc = std::move(u);
  }
  return m;
}

LiftedMode lift_zero(const BasePlant& p, int l) {
  return lift_mode(p, l, Strategy::zero);
}

LiftedMode lift_hold(const BasePlant& p, int l) {
  return lift_mode(p, l, Strategy::hold);
}

namespace {

// I_l (x) M as an explicit block diagonal.
MatrixXd repeat_blkdiag(const MatrixXd& M, int l) {
  MatrixXd out = MatrixXd::Zero(l * M.rows(), l * M.cols());
  for (int i = 0; i < l; ++i) {
    out.block(i * M.rows(), i * M.cols(), M.rows(), M.cols()) = M;
  }
  return out;
}

}  // namespace

PerformanceIndex lift_index(const QuadraticIndex& base,
                            const ConstrainingGraph& g) {
  PerformanceIndex p;
  for (int l = 1; l <= g.num_labels; ++l) {
    QuadraticIndex q;
    q.Q = repeat_blkdiag(base.Q, l);
    q.S = repeat_blkdiag(base.S, l);
    q.R = repeat_blkdiag(base.R, l);
    p.entries.emplace(l, std::move(q));
  }
  return p;
}

CslsModel compile_whrt(const BasePlant& p, const WhrtConstraint& c,
                       Strategy s) {
  CslsModel m;
  m.graph = compile_graph(c.window, c.min_hits);
  for (int l = 1; l <= m.graph.num_labels; ++l) {
    LiftedMode mode = lift_mode(p, l, s);
    m.systems.systems.emplace(l, std::move(mode.sys));
    m.control.emplace(l, std::move(mode.ctrl));
    if (mode.unc) m.uncertainty.emplace(l, std::move(*mode.unc));
  }
  if (p.index) m.index = lift_index(*p.index, m.graph);
  require_valid_model(m);
  return m;
}

std::vector<VectorXd> pack_signal(const std::vector<VectorXd>& base,
                                  const std::vector<int>& labels, int d) {
  std::size_t total = 0;
  for (int l : labels) {
    if (l < 1) throw std::invalid_argument("labels must be >= 1");
    total += static_cast<std::size_t>(l);
  }
  if (base.size() != total) {
    throw std::invalid_argument("pack_signal: expected " +
                                std::to_string(total) + " samples, got " +
                                std::to_string(base.size()));
  }
  std::vector<VectorXd> blocked;
  blocked.reserve(labels.size());
  std::size_t pos = 0;
  for (int l : labels) {
    VectorXd blk(l * d);
    for (int j = 0; j < l; ++j) {
      if (base[pos].size() != d) {
        throw std::invalid_argument("pack_signal: sample dimension mismatch");
      }
      blk.segment(j * d, d) = base[pos++];
    }
    blocked.push_back(std::move(blk));
  }
  return blocked;
}

std::vector<VectorXd> unpack_signal(const std::vector<VectorXd>& blocked,
                                    const std::vector<int>& labels, int d) {
  if (blocked.size() != labels.size()) {
    throw std::invalid_argument("unpack_signal: block count mismatch");
  }
  std::vector<VectorXd> base;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int l = labels[t];
    if (blocked[t].size() != l * d) {
      throw std::invalid_argument("unpack_signal: block dimension mismatch");
    }
    for (int j = 0; j < l; ++j) base.push_back(blocked[t].segment(j * d, d));
  }
  return base;
}

}  // namespace csls
