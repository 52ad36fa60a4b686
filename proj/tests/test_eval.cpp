#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "plm/eval.hpp"
#include "plm/rng.hpp"
#include "test_util.hpp"

using namespace plm;
using namespace plm::eval;
using graph::EntityType;
using graph::MetapathSet;
using graph::NodeId;

namespace {

struct EvalFixture {
  graph::HetGraph g = testutil::small_graph();
  vocab::ByteTokenizer tok;
  vocab::VocabLayout layout = vocab::VocabLayout::build(tok, g, {{"t0", 2}});
  MetapathSet phi = MetapathSet::parse_list(graph::kDefaultMetapaths);
  nn::ParameterStore<double> params;
  prompts::PromptBuilder builder{g, tok, layout};

  EvalFixture() {
    nn::TransformerConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.dim = 16;
    cfg.ffn_dim = 32;
    cfg.psi_size = phi.psi_size();
    params.build(layout, cfg, 21);
  }
};

}  // namespace

TEST_CASE("recall and ndcg hand cases") {
  std::vector<NodeId> ranked{1, 2, 3, 4};
  CHECK(recall_at_m(ranked, {1, 3}, 2) == doctest::Approx(0.5));
  CHECK(recall_at_m(ranked, {1, 3}, 4) == doctest::Approx(1.0));
  // targets {a}, ranked [b, a, c], M=3 -> 1/log2(3) = 0.6309
  std::vector<NodeId> bac{2, 1, 3};
  CHECK(ndcg_at_m(bac, {1}, 3) == doctest::Approx(0.6309).epsilon(1e-4 / 0.6309));
  // perfect ranking
  CHECK(ndcg_at_m(ranked, {1, 2}, 4) == doctest::Approx(1.0));
  CHECK(recall_at_m(ranked, {1, 2}, 4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(recall_at_m(ranked, {}, 2), graph::GraphError);
  CHECK_THROWS_AS(ndcg_at_m(ranked, {}, 2), graph::GraphError);
}

TEST_CASE("metrics match the brute-force oracle on 1000 random cases") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    int pool = 5 + static_cast<int>(rng.uniform(40));
    std::vector<NodeId> ranked;
    for (int i = 1; i <= pool; ++i) ranked.push_back(static_cast<NodeId>(i));
    rng.shuffle(ranked);
    ranked.resize(1 + rng.uniform(pool));
    std::set<NodeId> target_set;
    int n_targets = 1 + static_cast<int>(rng.uniform(std::min(8, pool)));
    while (static_cast<int>(target_set.size()) < n_targets)
      target_set.insert(static_cast<NodeId>(1 + rng.uniform(pool)));
    std::vector<NodeId> targets(target_set.begin(), target_set.end());
    int m = 1 + static_cast<int>(rng.uniform(25));
    CHECK(std::abs(recall_at_m(ranked, targets, m) -
                   oracles::recall_oracle(ranked, target_set, m)) < 1e-12);
    CHECK(std::abs(ndcg_at_m(ranked, targets, m) -
                   oracles::ndcg_oracle(ranked, target_set, m)) < 1e-12);
  }
}

TEST_CASE("accuracy and f1") {
  std::vector<std::int32_t> preds{1, 0, 1, 1};
  std::vector<std::int32_t> labels{1, 0, 0, 1};
  CHECK(accuracy(preds, labels) == doctest::Approx(0.75));
  // tp=2 fp=1 fn=0 -> p=2/3 r=1 -> f1 = 0.8
  CHECK(f1_binary(preds, labels, 1) == doctest::Approx(0.8));
  std::vector<std::int32_t> all_right{1, 0, 1, 1};
  CHECK(accuracy(all_right, all_right) == doctest::Approx(1.0));
  CHECK(f1_binary(all_right, all_right, 1) == doctest::Approx(1.0));
  CHECK(f1_macro(all_right, all_right, 2) == doctest::Approx(1.0));
}

TEST_CASE("eval report serializes losslessly") {
  EvalReport report;
  report.task = "link_ui";
  report.metrics["recall@20"] = 0.123456789;
  report.metrics["ndcg@100"] = 0.5;
  report.per_seed["0"] = report.metrics;
  report.config_hash = "cafe";
  report.n_eval_nodes = 42;
  std::string text = report.to_json();
  EvalReport back = EvalReport::from_json(text);
  CHECK(back.task == report.task);
  CHECK(back.metrics == report.metrics);
  CHECK(back.per_seed == report.per_seed);
  CHECK(back.config_hash == report.config_hash);
  CHECK(back.n_eval_nodes == 42);
  CHECK(back.to_json() == text);
}

TEST_CASE("predict_node: averaging, normalization, determinism, tie break") {
  EvalFixture f;
  nn::Model<double> model(f.params);
  prompts::TaskSpec task{"t0", 2, "bio", "does the member possess the skill coding: "};
  PredictOptions opt;
  opt.n_g = 4;
  opt.seed = 5;
  std::vector<double> probs;
  std::int32_t pred = predict_node(model, f.g, f.builder, 1, 0, task, f.phi, opt,
                                   &probs);
  CHECK(pred >= 0);
  CHECK(pred < 2);
  double total = 0.0;
  for (double p : probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  // deterministic under the seed
  CHECK(predict_node(model, f.g, f.builder, 1, 0, task, f.phi, opt) == pred);
  // N_g = 1 reduces to a single-prompt prediction
  PredictOptions one = opt;
  one.n_g = 1;
  std::vector<double> single;
  predict_node(model, f.g, f.builder, 1, 0, task, f.phi, one, &single);
  CHECK(single.size() == probs.size());
  // exact ties break toward the lowest class index
  for (auto& e : f.params.entries)
    std::fill(e.tensor->data.begin(), e.tensor->data.end(), 0.0);
  CHECK(predict_node(model, f.g, f.builder, 1, 0, task, f.phi, opt) == 0);
}

TEST_CASE("predict_links: exclusions, cap, sort oracle") {
  EvalFixture f;
  nn::Model<double> model(f.params);
  PredictOptions opt;
  opt.n_g = 2;
  opt.seed = 9;
  std::vector<NodeId> shown{4};
  std::vector<double> avg;
  auto ranked = predict_links(model, f.g, f.builder, 1,
                              graph::RelationType::member_job, shown, 20, f.phi,
                              opt, &avg);
  // pool = jobs {4, 5} minus shown {4} -> just 5; M larger than the pool
  CHECK(ranked == std::vector<NodeId>{5});
  REQUIRE(avg.size() == 2);

  // full-sort oracle over the averaged probabilities on a bigger graph
  graph::HetGraph big = testutil::random_graph(3, 10, 30, 0.25, 0.1);
  auto big_layout = vocab::VocabLayout::build(f.tok, big, {});
  nn::ParameterStore<double> big_params;
  nn::TransformerConfig cfg = f.params.cfg;
  big_params.build(big_layout, cfg, 4);
  nn::Model<double> big_model(big_params);
  prompts::PromptBuilder big_builder(big, f.tok, big_layout);
  auto obs = graph::neighbors(big, 1, graph::RelationType::member_job);
  std::vector<NodeId> big_shown(obs.begin(), obs.end());
  std::vector<double> big_avg;
  auto top = predict_links(big_model, big, big_builder, 1,
                           graph::RelationType::member_job, big_shown, 7, f.phi,
                           opt, &big_avg);
  REQUIRE(top.size() == 7);
  std::vector<std::pair<double, NodeId>> oracle;
  for (std::size_t i = 0; i < big_avg.size(); ++i) {
    NodeId id = static_cast<NodeId>(big.n_members + 1 + i);
    if (std::binary_search(big_shown.begin(), big_shown.end(), id)) continue;
    oracle.emplace_back(-big_avg[i], id);
  }
  std::sort(oracle.begin(), oracle.end());
  for (int i = 0; i < 7; ++i) CHECK(top[i] == oracle[i].second);
  // shown entities and the node itself never appear
  for (NodeId id : top) {
    CHECK(!std::binary_search(big_shown.begin(), big_shown.end(), id));
    CHECK(id != 1);
  }
}

TEST_CASE("export_embeddings: row per node, exact values") {
  EvalFixture f;
  std::string path =
      (std::filesystem::temp_directory_path() / "plm_emb_test.tsv").string();
  export_embeddings(f.params, f.g, path);
  std::ifstream in(path);
  std::string line;
  std::int64_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      std::size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    REQUIRE(cols.size() == 2 + static_cast<std::size_t>(f.params.cfg.dim));
    NodeId id = static_cast<NodeId>(std::stoul(cols[0]));
    CHECK(cols[1] == (f.g.type_of(id) == EntityType::member ? "member" : "job"));
    for (std::int64_t c = 0; c < f.params.cfg.dim; ++c) {
      double v = std::stod(cols[2 + c]);
      CHECK(v == f.params.node_embed.row(id - 1)[c]);
    }
    ++rows;
  }
  CHECK(rows == f.g.node_count());
  std::filesystem::remove(path);
}

TEST_CASE("tied-head algebra: exported rows reproduce link scores") {
  EvalFixture f;
  REQUIRE(f.params.cfg.tie_heads);
  nn::Model<double> model(f.params);
  Rng rng(6);
  std::vector<double> h(f.params.cfg.dim);
  for (auto& x : h) x = rng.normal();
  auto scores = model.link_logits(h.data(), EntityType::job);
  for (int j = 0; j < 2; ++j) {
    double dot = 0.0;
    for (std::int64_t c = 0; c < f.params.cfg.dim; ++c)
      dot += f.params.node_embed.row(3 + j)[c] * h[c];
    CHECK(scores[j] == doctest::Approx(dot));
  }
}
