#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "plm/hetgraph.hpp"
#include "test_util.hpp"

using namespace plm::graph;
using plm::Rng;
using plm::derive_seed;

TEST_CASE("load_graph counts nodes and edges") {
  HetGraph g = parse_graph(
      R"({"kind":"node","id":1,"type":"member","features":{"bio":"a"},"labels":{}}
{"kind":"node","id":2,"type":"member","features":{},"labels":{}}
{"kind":"node","id":3,"type":"job","features":{},"labels":{}}
{"kind":"edge","rel":"ui","src":1,"dst":3}
)");
  CHECK(g.n_members == 2);
  CHECK(g.n_jobs == 1);
  CHECK(g.edge_count(RelationType::member_job) == 1);
  CHECK(g.edge_count(RelationType::member_member) == 0);
}

TEST_CASE("empty file yields the empty graph") {
  HetGraph g = parse_graph("");
  CHECK(g.n_members == 0);
  CHECK(g.n_jobs == 0);
}

TEST_CASE("load_graph rejects bad input") {
  // dangling edge names the offending id
  try {
    parse_graph(R"({"kind":"node","id":1,"type":"member","features":{},"labels":{}}
{"kind":"edge","rel":"ui","src":1,"dst":99}
)");
    FAIL("expected a validation error");
  } catch (const GraphError& e) {
    CHECK(std::string(e.what()).find("99") != std::string::npos);
  }
  // malformed line reports the line number
  try {
    parse_graph("{\"kind\":\"node\",\"id\":1,\"type\":\"member\"}\nnot json\n");
    FAIL("expected a parse error");
  } catch (const GraphError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_graph(R"({"kind":"node","id":1,"type":"member","bogus":1}
)"),
                  GraphError);
  CHECK_THROWS_AS(parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":1,"type":"member"}
)"),
                  GraphError);
  // type mismatch on edge endpoints
  CHECK_THROWS_AS(parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"job"}
{"kind":"edge","rel":"uu","src":1,"dst":2}
)"),
                  GraphError);
  // duplicate edge
  CHECK_THROWS_AS(parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"job"}
{"kind":"edge","rel":"ui","src":1,"dst":2}
{"kind":"edge","rel":"ui","src":1,"dst":2}
)"),
                  GraphError);
}

TEST_CASE("serialize/parse round trip") {
  HetGraph g = testutil::random_graph(42, 12, 8);
  HetGraph g2 = parse_graph(serialize_graph(g));
  CHECK(g2.n_members == g.n_members);
  CHECK(g2.n_jobs == g.n_jobs);
  CHECK(g2.ui_out == g.ui_out);
  CHECK(g2.uu_out == g.uu_out);
  CHECK(g2.features == g.features);
}

TEST_CASE("neighbors reads sorted adjacency and validates types") {
  HetGraph g = testutil::small_graph();
  auto n1 = neighbors(g, 1, RelationType::member_job);
  CHECK(std::vector<NodeId>(n1.begin(), n1.end()) == std::vector<NodeId>{4, 5});
  auto n3 = neighbors(g, 3, RelationType::member_member);
  CHECK(n3.empty());
  CHECK_THROWS_AS(neighbors(g, 4, RelationType::member_member), GraphError);
  CHECK_THROWS_AS(neighbors(g, 77, RelationType::member_job), GraphError);
}

TEST_CASE("ego graph: fanout cap, isolated node, determinism") {
  HetGraph g = parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"member"}
{"kind":"node","id":3,"type":"job"}
{"kind":"node","id":4,"type":"job"}
{"kind":"node","id":5,"type":"job"}
{"kind":"edge","rel":"ui","src":1,"dst":3}
{"kind":"edge","rel":"ui","src":1,"dst":4}
{"kind":"edge","rel":"ui","src":1,"dst":5}
)");
  EgoGraph ego = sample_ego_graph(g, 1, 1, 2, 7);
  CHECK(ego.nodes.size() == 3);  // center + exactly fanout jobs
  CHECK(ego.hop(1) == 0);

  EgoGraph iso = sample_ego_graph(g, 2, 3, 5, 7);
  CHECK(iso.nodes.size() == 1);
  CHECK(iso.nodes[0].first == 2);

  EgoGraph a = sample_ego_graph(g, 1, 2, 2, 123);
  EgoGraph b = sample_ego_graph(g, 1, 2, 2, 123);
  CHECK(a.nodes == b.nodes);
  CHECK(a.edges.size() == b.edges.size());

  CHECK_THROWS_AS(sample_ego_graph(g, 99, 2, 2, 1), GraphError);
}

TEST_CASE("ego graph respects the banned set") {
  HetGraph g = testutil::small_graph();
  std::vector<NodeId> banned{4, 5};
  EgoGraph ego = sample_ego_graph(g, 1, 2, 5, 9, banned);
  CHECK(!ego.contains(4));
  CHECK(!ego.contains(5));
}

TEST_CASE("chain reachability uses bidirectional expansion") {
  // u1 -> u2 -> u3 follow chain: u3 must be reachable from u1 at depth 2.
  HetGraph g = parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"member"}
{"kind":"node","id":3,"type":"member"}
{"kind":"edge","rel":"uu","src":1,"dst":2}
{"kind":"edge","rel":"uu","src":2,"dst":3}
)");
  EgoGraph ego = sample_ego_graph(g, 1, 2, 5, 3);
  CHECK(ego.hop(1) == 0);
  CHECK(ego.hop(2) == 1);
  CHECK(ego.hop(3) == 2);
  // And the reverse direction: from u3 the chain is reachable upstream.
  EgoGraph rev = sample_ego_graph(g, 3, 2, 5, 3);
  CHECK(rev.hop(1) == 2);
}

TEST_CASE("ego hop distances match full-graph BFS when nothing is subsampled") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    HetGraph g = testutil::random_graph(seed, 14, 9, 0.12, 0.08);
    // Fanout large enough that no neighbor is dropped: distances must equal
    // the unrestricted BFS distances capped at depth.
    const int depth = 2;
    EgoGraph ego = sample_ego_graph(g, 1, depth, 1000, seed * 11);
    auto dist = oracles::bfs_distances(g, 1);
    for (auto [id, hop] : ego.nodes) CHECK(hop == dist[id]);
    for (NodeId id = 1; static_cast<std::int64_t>(id) <= g.node_count(); ++id) {
      bool reachable = dist[id] >= 0 && dist[id] <= depth;
      CHECK(ego.contains(id) == reachable);
    }
  }
}

TEST_CASE("shortest_distance equals an all-pairs oracle on the induced subgraph") {
  for (std::uint64_t seed : {10u, 20u, 30u}) {
    HetGraph g = testutil::random_graph(seed, 16, 10, 0.1, 0.08);
    EgoGraph ego = sample_ego_graph(g, 2, 2, 3, seed);
    // Index nodes and run Floyd-Warshall over the induced edges.
    std::map<NodeId, int> index;
    for (auto [id, hop] : ego.nodes) index.emplace(id, static_cast<int>(index.size()));
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : ego.edges)
      edges.emplace_back(index.at(e.src), index.at(e.dst));
    auto apsp = oracles::floyd_warshall(static_cast<int>(index.size()), edges);
    for (auto [id, hop] : ego.nodes)
      CHECK(shortest_distance(ego, id) == apsp[index.at(ego.center)][index.at(id)]);
  }
  HetGraph g = testutil::small_graph();
  EgoGraph ego = sample_ego_graph(g, 1, 1, 5, 3);
  CHECK_THROWS_AS(shortest_distance(ego, 77), GraphError);
}

TEST_CASE("metapath parsing") {
  Metapath uiu = Metapath::parse("UIU");
  CHECK(uiu.length() == 2);
  CHECK(uiu.source() == EntityType::member);
  CHECK(uiu.target() == EntityType::member);
  CHECK_THROWS_AS(Metapath::parse("UII"), GraphError);
  CHECK_THROWS_AS(Metapath::parse("X"), GraphError);
  MetapathSet phi = MetapathSet::parse_list(kDefaultMetapaths);
  CHECK(phi.m() == 6);
  CHECK(phi.psi_size() == 7);
}

TEST_CASE("metapath existence basics") {
  HetGraph g = testutil::small_graph();
  CHECK(metapath_exists(g, 1, 4, Metapath::parse("UI")));
  CHECK(!metapath_exists(g, 3, 4, Metapath::parse("UI")));
  CHECK(metapath_exists(g, 1, 2, Metapath::parse("UIU")));  // 1->4<-2
  CHECK(metapath_exists(g, 4, 1, Metapath::parse("IU")));
  // type mismatch is false, not an error
  CHECK(!metapath_exists(g, 4, 5, Metapath::parse("UU")));
  // one-hop existence equals direct adjacency for every pair
  for (NodeId a = 1; a <= 3; ++a)
    for (NodeId b = 1; b <= 3; ++b) {
      bool adj = std::binary_search(g.uu_out[a - 1].begin(), g.uu_out[a - 1].end(), b);
      CHECK(metapath_exists(g, a, b, Metapath::parse("UU")) == adj);
    }
  CHECK_THROWS_AS(metapath_exists(g, 99, 1, Metapath::parse("UU")), GraphError);
}

TEST_CASE("metapath existence and proximity match the DFS path oracle") {
  MetapathSet phi = MetapathSet::parse_list("UU,UI,IU,UIU,UUI,IUI,IUU");
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    HetGraph g = testutil::random_graph(seed, 9, 6, 0.15, 0.12);
    for (NodeId a = 1; static_cast<std::int64_t>(a) <= g.node_count(); ++a)
      for (NodeId b = 1; static_cast<std::int64_t>(b) <= g.node_count(); ++b) {
        ProximityVector psi = compute_proximity(g, a, b, phi);
        CHECK(psi.bit(0) == (a == b));
        for (int i = 0; i < phi.m(); ++i) {
          bool expect = oracles::metapath_exists_oracle(g, a, b, phi.paths[i]);
          CHECK(metapath_exists(g, a, b, phi.paths[i]) == expect);
          CHECK(psi.bit(i + 1) == expect);
        }
      }
  }
}

TEST_CASE("proximity identity and empty graph") {
  HetGraph g = parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"member"}
)");
  MetapathSet phi = MetapathSet::parse_list(kDefaultMetapaths);
  ProximityVector self = compute_proximity(g, 1, 1, phi);
  CHECK(self.bit(0));
  CHECK(self.bits == 1);
  ProximityVector other = compute_proximity(g, 1, 2, phi);
  CHECK(other.bits == 0);
}

TEST_CASE("triple sampling: forced outcome and exclusions") {
  // u1 -> i3; i3 interacted by u1 and u2. UIU triple from u1 with ego {u1}
  // can only be (u1, [i3], [u2]).
  HetGraph g = parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"member"}
{"kind":"node","id":3,"type":"job"}
{"kind":"edge","rel":"ui","src":1,"dst":3}
{"kind":"edge","rel":"ui","src":2,"dst":3}
)");
  EgoGraph ego;
  ego.center = 1;
  ego.nodes = {{1, 0}};
  auto triple = sample_metapath_triple(g, 1, Metapath::parse("UIU"), 3, 3, ego, 5);
  REQUIRE(triple.has_value());
  CHECK(triple->intermediates == std::vector<NodeId>{3});
  CHECK(triple->ends == std::vector<NodeId>{2});

  // all end candidates inside the ego graph -> empty end list
  EgoGraph full;
  full.center = 1;
  full.nodes = {{1, 0}, {2, 1}, {3, 1}};
  auto blocked = sample_metapath_triple(g, 1, Metapath::parse("UIU"), 3, 3, full, 5);
  REQUIRE(blocked.has_value());
  CHECK(blocked->ends.empty());

  // no intermediates at all
  auto none = sample_metapath_triple(g, 2, Metapath::parse("UUI"), 3, 3, ego, 5);
  CHECK(!none.has_value());
}

TEST_CASE("repetition weighting: multiplicity 2 candidate drawn ~2/3 of the time") {
  // u1 -> {i4, i5}; i4 <- {u1,u2}, i5 <- {u1,u2,u3}: end pool from (4,5) is
  // {u2 (via i4), u2 (via i5), u3 (via i5)} once u1 is excluded.
  HetGraph g = parse_graph(R"({"kind":"node","id":1,"type":"member"}
{"kind":"node","id":2,"type":"member"}
{"kind":"node","id":3,"type":"member"}
{"kind":"node","id":4,"type":"job"}
{"kind":"node","id":5,"type":"job"}
{"kind":"edge","rel":"ui","src":1,"dst":4}
{"kind":"edge","rel":"ui","src":1,"dst":5}
{"kind":"edge","rel":"ui","src":2,"dst":4}
{"kind":"edge","rel":"ui","src":2,"dst":5}
{"kind":"edge","rel":"ui","src":3,"dst":5}
)");
  EgoGraph ego;
  ego.center = 1;
  ego.nodes = {{1, 0}};
  int u2_first = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    auto triple = sample_metapath_triple(g, 1, Metapath::parse("UIU"), 2, 1, ego,
                                         derive_seed(0, 1, t, "freq"));
    REQUIRE(triple.has_value());
    REQUIRE(triple->ends.size() == 1);
    if (triple->ends[0] == 2) ++u2_first;
  }
  double freq = static_cast<double>(u2_first) / trials;
  CHECK(freq == doctest::Approx(2.0 / 3.0).epsilon(0.03));
}

TEST_CASE("triple sampling is deterministic under a fixed seed") {
  HetGraph g = testutil::random_graph(3, 10, 6, 0.2, 0.15);
  EgoGraph ego = sample_ego_graph(g, 1, 2, 3, 77);
  auto a = sample_metapath_triple(g, 1, Metapath::parse("UIU"), 3, 3, ego, 55);
  auto b = sample_metapath_triple(g, 1, Metapath::parse("UIU"), 3, 3, ego, 55);
  REQUIRE(a.has_value() == b.has_value());
  if (a) {
    CHECK(a->intermediates == b->intermediates);
    CHECK(a->ends == b->ends);
  }
}
