#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csls {

// Labeled directed multigraph constraining admissible switching sequences.
// Nodes are positive integers; labels range over 1..num_labels. Admissible
// sequences are walks, so every node needs an incoming and an outgoing edge.
struct Edge {
  int tail = 0;
  int head = 0;
  int label = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct ConstrainingGraph {
  std::vector<int> nodes;  // strictly increasing
  std::vector<Edge> edges;
  int num_labels = 0;
};

// A walk stored as indices into graph.edges, consecutive edges chained
// head-to-tail.
using EdgeWalk = std::vector<int>;

// Structural violations as human-readable messages; empty means valid.
// Checks: node list sorted/unique/positive, endpoints exist, labels in
// range, every label used, every node has in- and out-degree >= 1, no
// duplicate (tail, head, label) triple.
std::vector<std::string> validate_graph(const ConstrainingGraph& g);

// Throws std::invalid_argument listing all violations.
void require_valid(const ConstrainingGraph& g);

bool is_walk(const ConstrainingGraph& g, const EdgeWalk& w);

std::vector<int> walk_labels(const ConstrainingGraph& g, const EdgeWalk& w);

// Node index (position in g.nodes) lookup; throws on unknown node.
int node_position(const ConstrainingGraph& g, int node);

// Exact count of length-`length` walks starting at `start`, saturating at
// UINT64_MAX. Computed from powers of the edge-count adjacency matrix.
std::uint64_t count_walks(const ConstrainingGraph& g, int start, int length);

// All length-`length` walks from `start`, lexicographic in edge indices.
// Throws std::runtime_error when the exact count exceeds `budget`.
std::vector<EdgeWalk> enumerate_walks(const ConstrainingGraph& g, int start,
                                      int length,
                                      std::uint64_t budget = 1000000);

}  // namespace csls
