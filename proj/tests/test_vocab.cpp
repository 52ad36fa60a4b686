#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "plm/rng.hpp"
#include "plm/vocab.hpp"
#include "test_util.hpp"

using namespace plm::vocab;
using plm::Rng;
using plm::graph::EgoGraph;

TEST_CASE("byte tokenizer basics") {
  ByteTokenizer tok;
  CHECK(tok.tokenize("").empty());
  auto ab = tok.tokenize("ab");
  CHECK(ab == std::vector<TokenId>{97, 98});
  CHECK(tok.detokenize(std::vector<TokenId>{104, 105}) == "hi");
  CHECK(tok.detokenize({}) == "");
  CHECK_THROWS_AS(tok.detokenize(std::vector<TokenId>{300}), VocabError);
}

TEST_CASE("tokenize/detokenize round trip on random utf-8") {
  ByteTokenizer tok;
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    int len = static_cast<int>(rng.uniform(40));
    for (int i = 0; i < len; ++i) {
      switch (rng.uniform(3)) {
        case 0:
          s.push_back(static_cast<char>('a' + rng.uniform(26)));
          break;
        case 1: {  // two-byte code point
          unsigned cp = 0x80 + static_cast<unsigned>(rng.uniform(0x700));
          s.push_back(static_cast<char>(0xc0 | (cp >> 6)));
          s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
          break;
        }
        default: {  // three-byte code point
          unsigned cp = 0x800 + static_cast<unsigned>(rng.uniform(0xf000));
          s.push_back(static_cast<char>(0xe0 | (cp >> 12)));
          s.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
          s.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
          break;
        }
      }
    }
    CHECK(tok.detokenize(tok.tokenize(s)) == s);
  }
}

TEST_CASE("vocabulary layout partitions the id space") {
  ByteTokenizer tok;
  auto g = testutil::small_graph();
  VocabLayout layout = VocabLayout::build(tok, g, {{"t0", 2}, {"t1", 5}});
  CHECK(layout.v_text == 257);
  CHECK(layout.node_begin() == 257);
  CHECK(layout.node_end() == 262);
  CHECK(layout.class_begin(0) == 262);
  CHECK(layout.class_begin(1) == 264);
  CHECK(layout.v_total() == 269);
  // no gaps, no overlaps: every id below v_total belongs to exactly one range
  for (TokenId t = 0; t < layout.v_total(); ++t) {
    int owners = 0;
    owners += layout.is_text(t);
    owners += layout.is_node(t);
    owners += t >= layout.class_begin(0) && t < layout.class_begin(1);
    owners += t >= layout.class_begin(1) && t < layout.v_total();
    CHECK(owners == 1);
  }
}

TEST_CASE("node token bijection") {
  ByteTokenizer tok;
  auto g = testutil::small_graph();
  VocabLayout layout = VocabLayout::build(tok, g, {});
  CHECK(layout.node_token(1) == layout.v_text);
  CHECK(layout.node_token(5) == layout.v_text + 4);
  for (plm::graph::NodeId id = 1; id <= 5; ++id)
    CHECK(layout.node_of(layout.node_token(id)) == id);
  CHECK_THROWS_AS(layout.node_token(6), VocabError);
  CHECK_THROWS_AS(layout.node_of(0), VocabError);
  CHECK_THROWS_AS(layout.task_index("missing"), VocabError);
}

TEST_CASE("compose_node_embedding adds the three rows") {
  const std::int64_t k = 2;
  // 2 members, 1 job; tables laid out row-major.
  std::vector<double> z = {1, 0, 0.5, 0.5, 2, 2};
  std::vector<double> e = {0, 1, 3, 3};
  std::vector<double> p = {1, 1, 10, 10, 20, 20};
  EmbeddingTablesView<double> view{z.data(), e.data(), p.data(), k, 2, 3, 2};
  EgoGraph ego;
  ego.center = 1;
  ego.nodes = {{1, 0}, {3, 1}};

  auto h = compose_node_embedding(view, 1, ego);
  CHECK(h == std::vector<double>{2, 2});  // z=(1,0) e_member=(0,1) p0=(1,1)
  auto j = compose_node_embedding(view, 3, ego);
  CHECK(j == std::vector<double>{15, 15});  // z=(2,2) e_job=(3,3) p1=(10,10)

  CHECK_THROWS_AS(compose_node_embedding(view, 2, ego), plm::graph::GraphError);
  ego.nodes = {{1, 0}, {3, 3}};
  CHECK_THROWS_AS(compose_node_embedding(view, 3, ego), VocabError);
}

TEST_CASE("composed embedding is linear in each table") {
  Rng rng(11);
  const std::int64_t k = 8;
  std::vector<double> z(3 * k), e(2 * k), p(2 * k);
  for (auto* v : {&z, &e, &p})
    for (auto& x : *v) x = rng.normal();
  // three members so nodes 2 and 3 share the entity row
  EmbeddingTablesView<double> view{z.data(), e.data(), p.data(), k, 3, 3, 1};
  EgoGraph ego;
  ego.center = 1;
  ego.nodes = {{1, 0}, {2, 1}};

  auto before = compose_node_embedding(view, 2, ego);
  const double delta = 0.37;
  for (std::int64_t c = 0; c < k; ++c) z[(2 - 1) * k + c] += delta;
  auto after = compose_node_embedding(view, 2, ego);
  for (std::int64_t c = 0; c < k; ++c)
    CHECK(after[c] - before[c] == doctest::Approx(delta));
  // same-type nodes at the same hop differ by exactly z_i - z_j
  ego.nodes = {{1, 0}, {2, 1}, {3, 1}};
  auto h2 = compose_node_embedding(view, 2, ego);
  auto h3 = compose_node_embedding(view, 3, ego);
  for (std::int64_t c = 0; c < k; ++c)
    CHECK(h2[c] - h3[c] == doctest::Approx(z[k + c] - z[2 * k + c]));
}
