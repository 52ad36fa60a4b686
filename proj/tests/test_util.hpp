#pragma once
// Small graph fixtures and random-graph generation shared by the tests.

#include <string>
#include <vector>

#include "plm/hetgraph.hpp"
#include "plm/rng.hpp"

namespace testutil {

using plm::graph::HetGraph;
using plm::graph::NodeId;

// 3 members (1..3), 2 jobs (4, 5):
//   ui: 1->4, 1->5, 2->4, 3->5    uu: 1->2, 2->1, 2->3
inline HetGraph small_graph() {
  return plm::graph::parse_graph(R"({"kind":"node","id":1,"type":"member","features":{"bio":"alpha beta"},"labels":{"t0":1}}
{"kind":"node","id":2,"type":"member","features":{"bio":"gamma delta"},"labels":{"t0":0}}
{"kind":"node","id":3,"type":"member","features":{"bio":"epsilon zeta"},"labels":{"t0":1}}
{"kind":"node","id":4,"type":"job","features":{"jd":"eta theta"},"labels":{}}
{"kind":"node","id":5,"type":"job","features":{"jd":"iota kappa"},"labels":{}}
{"kind":"edge","rel":"ui","src":1,"dst":4}
{"kind":"edge","rel":"ui","src":1,"dst":5}
{"kind":"edge","rel":"ui","src":2,"dst":4}
{"kind":"edge","rel":"ui","src":3,"dst":5}
{"kind":"edge","rel":"uu","src":1,"dst":2}
{"kind":"edge","rel":"uu","src":2,"dst":1}
{"kind":"edge","rel":"uu","src":2,"dst":3}
)");
}

// Random graph with dense ids (members first). Edge probabilities chosen so
// metapaths of both kinds exist.
inline HetGraph random_graph(std::uint64_t seed, int n_members, int n_jobs,
                             double p_ui = 0.15, double p_uu = 0.1) {
  plm::Rng rng(seed);
  std::string lines;
  for (int i = 1; i <= n_members + n_jobs; ++i) {
    bool member = i <= n_members;
    lines += std::string("{\"kind\":\"node\",\"id\":") + std::to_string(i) +
             ",\"type\":\"" + (member ? "member" : "job") +
             "\",\"features\":{\"" + (member ? "bio" : "jd") + "\":\"w" +
             std::to_string(i) + "\"},\"labels\":{}}\n";
  }
  for (int u = 1; u <= n_members; ++u) {
    for (int j = n_members + 1; j <= n_members + n_jobs; ++j)
      if (rng.bernoulli(p_ui))
        lines += "{\"kind\":\"edge\",\"rel\":\"ui\",\"src\":" + std::to_string(u) +
                 ",\"dst\":" + std::to_string(j) + "}\n";
    for (int v = 1; v <= n_members; ++v)
      if (v != u && rng.bernoulli(p_uu))
        lines += "{\"kind\":\"edge\",\"rel\":\"uu\",\"src\":" + std::to_string(u) +
                 ",\"dst\":" + std::to_string(v) + "}\n";
  }
  return plm::graph::parse_graph(lines);
}

}  // namespace testutil
