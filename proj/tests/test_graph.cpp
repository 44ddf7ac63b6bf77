#include <doctest.h>

#include "csls/graph.hpp"
#include "fixtures.hpp"

using namespace csls;

TEST_SUITE_BEGIN("graph");

TEST_CASE("valid demo graph passes validation") {
  CHECK(validate_graph(fx::two_of_three_graph()).empty());
}

TEST_CASE("missing out-edge is flagged") {
  ConstrainingGraph g;
  g.nodes = {1, 2};
  g.edges = {{1, 2, 1}, {1, 1, 1}};
  g.num_labels = 1;
  auto v = validate_graph(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("node 2 has no outgoing edge") != std::string::npos);
}

TEST_CASE("duplicate edges and label gaps are flagged") {
  ConstrainingGraph g;
  g.nodes = {1};
  g.edges = {{1, 1, 1}, {1, 1, 1}, {1, 1, 3}};
  g.num_labels = 3;
  auto v = validate_graph(g);
  bool dup = false, unused = false;
  for (const auto& s : v) {
    dup = dup || s.find("duplicate edge") != std::string::npos;
    unused = unused || s.find("label 2 unused") != std::string::npos;
  }
  CHECK(dup);
  CHECK(unused);
}

TEST_CASE("unknown endpoints and out-of-range labels are flagged") {
  ConstrainingGraph g;
  g.nodes = {1};
  g.edges = {{1, 3, 1}, {1, 1, 5}};
  g.num_labels = 1;
  auto v = validate_graph(g);
  REQUIRE(v.size() == 2);
  CHECK(v[0].find("unknown head") != std::string::npos);
  CHECK(v[1].find("label outside") != std::string::npos);
}

TEST_CASE("walk enumeration is lexicographic in edge indices") {
  const auto g = fx::two_of_three_graph();
  // edges: 0 = (1,1,1), 1 = (1,2,2), 2 = (2,1,1)
  auto w = enumerate_walks(g, 1, 2);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == EdgeWalk{0, 0});
  CHECK(w[1] == EdgeWalk{0, 1});
  CHECK(w[2] == EdgeWalk{1, 2});
  auto w2 = enumerate_walks(g, 2, 1);
  REQUIRE(w2.size() == 1);
  CHECK(w2[0] == EdgeWalk{2});

  CHECK(enumerate_walks(g, 1, 0) == std::vector<EdgeWalk>{{}});
  CHECK(walk_labels(g, w[2]) == std::vector<int>{2, 1});
  CHECK(is_walk(g, w[2]));
  CHECK_FALSE(is_walk(g, EdgeWalk{1, 1}));
}

TEST_CASE("enumerated count matches adjacency-power count") {
  const auto g = fx::two_of_three_graph();
  for (int T = 0; T <= 12; ++T) {
    for (int start : g.nodes) {
      CHECK(enumerate_walks(g, start, T, 1u << 20).size() ==
            count_walks(g, start, T));
    }
  }
}

TEST_CASE("walk budget overflow raises") {
  const auto g = fx::two_of_three_graph();
  CHECK_THROWS_WITH_AS(enumerate_walks(g, 1, 40),
                       doctest::Contains("walk budget exceeded"),
                       std::runtime_error);
  CHECK_THROWS_AS(enumerate_walks(g, 7, 1), std::invalid_argument);
}

TEST_SUITE_END();
