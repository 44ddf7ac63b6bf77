#include "csls/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace csls {

namespace {

std::string edge_str(const Edge& e) {
  return "(" + std::to_string(e.tail) + "," + std::to_string(e.head) + "," +
         std::to_string(e.label) + ")";
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return a > UINT64_MAX - b ? UINT64_MAX : a + b;
}

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a == 0 || b == 0) return 0;
  if (a > UINT64_MAX / b) return UINT64_MAX;
  return a * b;
}

}  // namespace

std::vector<std::string> validate_graph(const ConstrainingGraph& g) {
  std::vector<std::string> out;
  if (g.nodes.empty()) out.push_back("graph has no nodes");
  if (g.num_labels < 1) out.push_back("num_labels must be >= 1");
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i] <= 0) {
      out.push_back("node " + std::to_string(g.nodes[i]) +
                    " is not a positive integer");
    }
    if (i > 0 && g.nodes[i] <= g.nodes[i - 1]) {
      out.push_back("node list not strictly increasing at position " +
                    std::to_string(i));
    }
  }
  std::set<int> nodeset(g.nodes.begin(), g.nodes.end());
  std::set<int> has_out, has_in, labels_seen;
  std::set<std::tuple<int, int, int>> triples;
  for (const Edge& e : g.edges) {
    if (!nodeset.count(e.tail)) {
      out.push_back("edge " + edge_str(e) + " has unknown tail");
    }
    if (!nodeset.count(e.head)) {
      out.push_back("edge " + edge_str(e) + " has unknown head");
    }
    if (e.label < 1 || e.label > g.num_labels) {
      out.push_back("edge " + edge_str(e) + " has label outside 1.." +
                    std::to_string(g.num_labels));
    }
    if (!triples.insert({e.tail, e.head, e.label}).second) {
      out.push_back("duplicate edge " + edge_str(e));
    }
    has_out.insert(e.tail);
    has_in.insert(e.head);
    labels_seen.insert(e.label);
  }
  for (int v : g.nodes) {
    if (!has_out.count(v)) {
      out.push_back("node " + std::to_string(v) + " has no outgoing edge");
    }
    if (!has_in.count(v)) {
      out.push_back("node " + std::to_string(v) + " has no incoming edge");
    }
  }
  for (int l = 1; l <= g.num_labels; ++l) {
    if (!labels_seen.count(l)) {
      out.push_back("label " + std::to_string(l) + " unused");
    }
  }
  return out;
}

void require_valid(const ConstrainingGraph& g) {
  auto v = validate_graph(g);
  if (v.empty()) return;
  std::string msg = "invalid constraining graph:";
  for (const auto& s : v) msg += "\n  " + s;
  throw std::invalid_argument(msg);
}

bool is_walk(const ConstrainingGraph& g, const EdgeWalk& w) {
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (w[t] < 0 || w[t] >= static_cast<int>(g.edges.size())) return false;
    if (t > 0 && g.edges[w[t]].tail != g.edges[w[t - 1]].head) return false;
  }
  return true;
}

std::vector<int> walk_labels(const ConstrainingGraph& g, const EdgeWalk& w) {
  std::vector<int> labels;
  labels.reserve(w.size());
  for (int e : w) labels.push_back(g.edges.at(e).label);
  return labels;
}

int node_position(const ConstrainingGraph& g, int node) {
  auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), node);
  if (it == g.nodes.end() || *it != node) {
    throw std::invalid_argument("unknown node " + std::to_string(node));
  }
  return static_cast<int>(it - g.nodes.begin());
}

std::uint64_t count_walks(const ConstrainingGraph& g, int start, int length) {
  if (length < 0) throw std::invalid_argument("negative walk length");
  const int n = static_cast<int>(g.nodes.size());
  const int s = node_position(g, start);
  // counts[v] = number of walks of the lengths consumed so far ending at v.
  std::vector<std::uint64_t> counts(n, 0);
  counts[s] = 1;
  for (int t = 0; t < length; ++t) {
    std::vector<std::uint64_t> next(n, 0);
    for (const Edge& e : g.edges) {
      int a = node_position(g, e.tail);
      int b = node_position(g, e.head);
      next[b] = sat_add(next[b], sat_mul(counts[a], 1));
    }
    // Multi-edges contribute once each, handled by the loop above.
    counts.swap(next);
  }
  std::uint64_t total = 0;
  for (auto c : counts) total = sat_add(total, c);
  return total;
}

std::vector<EdgeWalk> enumerate_walks(const ConstrainingGraph& g, int start,
                                      int length, std::uint64_t budget) {
  require_valid(g);
  const std::uint64_t count = count_walks(g, start, length);
  if (count > budget) {
    throw std::runtime_error("walk budget exceeded: " +
                             (count == UINT64_MAX ? std::string(">= 2^64")
                                                  : std::to_string(count)) +
                             " walks requested, budget " +
                             std::to_string(budget));
  }
  // Out-edges in increasing edge-index order give lexicographic output.
  std::map<int, std::vector<int>> out;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    out[g.edges[i].tail].push_back(static_cast<int>(i));
  }
  std::vector<EdgeWalk> result;
  result.reserve(static_cast<std::size_t>(count));
  EdgeWalk current;
  auto dfs = [&](auto&& self, int node, int remaining) -> void {
    if (remaining == 0) {
      result.push_back(current);
      return;
    }
    for (int ei : out[node]) {
      current.push_back(ei);
      self(self, g.edges[ei].head, remaining - 1);
      current.pop_back();
    }
  };
  node_position(g, start);
  dfs(dfs, start, length);
  return result;
}

}  // namespace csls
