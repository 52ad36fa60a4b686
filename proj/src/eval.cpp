#include "plm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace plm::eval {

using graph::EntityType;
using graph::NodeId;
using nlohmann::json;

double recall_at_m(std::span<const NodeId> ranked,
                   const std::vector<NodeId>& targets, int m) {
  if (targets.empty()) throw graph::GraphError("recall of empty target set");
  std::int64_t hits = 0;
  std::int64_t limit = std::min<std::int64_t>(m, ranked.size());
  for (std::int64_t r = 0; r < limit; ++r)
    if (std::find(targets.begin(), targets.end(), ranked[r]) != targets.end())
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double ndcg_at_m(std::span<const NodeId> ranked,
                 const std::vector<NodeId>& targets, int m) {
  if (targets.empty()) throw graph::GraphError("ndcg of empty target set");
  double dcg = 0.0;
  std::int64_t limit = std::min<std::int64_t>(m, ranked.size());
  for (std::int64_t r = 0; r < limit; ++r)
    if (std::find(targets.begin(), targets.end(), ranked[r]) != targets.end())
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double ideal = 0.0;
  std::int64_t ideal_hits = std::min<std::int64_t>(targets.size(), m);
  for (std::int64_t r = 0; r < ideal_hits; ++r)
    ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

double accuracy(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw graph::GraphError("accuracy needs matching nonempty vectors");
  std::int64_t ok = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    ok += predictions[i] == labels[i];
  return static_cast<double>(ok) / static_cast<double>(predictions.size());
}

double f1_binary(std::span<const std::int32_t> predictions,
                 std::span<const std::int32_t> labels, std::int32_t positive) {
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    bool p = predictions[i] == positive, l = labels[i] == positive;
    tp += p && l;
    fp += p && !l;
    fn += !p && l;
  }
  if (tp == 0) return 0.0;
  double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double f1_macro(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> labels, std::int32_t n_classes) {
  double total = 0.0;
  for (std::int32_t c = 0; c < n_classes; ++c)
    total += f1_binary(predictions, labels, c);
  return total / static_cast<double>(n_classes);
}

// -------------------------------------------------------------------- report

std::string EvalReport::to_json() const {
  json j;
  j["task"] = task;
  j["metrics"] = metrics;
  j["per_seed"] = per_seed;
  j["config_hash"] = config_hash;
  j["n_eval_nodes"] = n_eval_nodes;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j = json::parse(text);
  EvalReport r;
  r.task = j.at("task").get<std::string>();
  r.metrics = j.at("metrics").get<std::map<std::string, double>>();
  r.per_seed =
      j.at("per_seed").get<std::map<std::string, std::map<std::string, double>>>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.n_eval_nodes = j.at("n_eval_nodes").get<std::int64_t>();
  return r;
}

// ---------------------------------------------------------------- prediction

template <typename T>
std::int32_t predict_node(nn::Model<T>& model, const graph::HetGraph& g,
                          const prompts::PromptBuilder& builder, NodeId k,
                          std::size_t task_index, const prompts::TaskSpec& task,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt, std::vector<T>* avg_out) {
  std::vector<T> avg;
  for (int s = 0; s < opt.n_g; ++s) {
    auto ego = graph::sample_ego_graph(
        g, k, opt.ego_depth, opt.ego_fanout,
        derive_seed(opt.seed, k, static_cast<std::uint64_t>(s), "predict_ego"));
    prompts::PromptInstance inst = builder.node_task_prompt(ego, k, task);
    prompts::BiasMatrix bias = prompts::attention_bias_matrix(
        inst, g, phi, model.params().cfg.bias_on_completion_keys);
    std::vector<T> probs = model.class_probs(inst, &bias, task_index);
    if (avg.empty()) avg.assign(probs.size(), T(0));
    for (std::size_t i = 0; i < probs.size(); ++i)
      avg[i] += probs[i] / static_cast<T>(opt.n_g);
  }
  std::int32_t best = 0;
  for (std::size_t i = 1; i < avg.size(); ++i)
    if (avg[i] > avg[best]) best = static_cast<std::int32_t>(i);
  if (avg_out) *avg_out = std::move(avg);
  return best;
}

template <typename T>
std::vector<NodeId> predict_links(nn::Model<T>& model, const graph::HetGraph& g,
                                  const prompts::PromptBuilder& builder,
                                  NodeId k, graph::RelationType rel,
                                  std::span<const NodeId> shown, int top_m,
                                  const graph::MetapathSet& phi,
                                  const PredictOptions& opt,
                                  std::vector<T>* avg_out) {
  EntityType target = rel == graph::RelationType::member_job
                          ? EntityType::job
                          : EntityType::member;
  std::vector<T> avg;
  for (int s = 0; s < opt.n_g; ++s) {
    auto ego = graph::sample_ego_graph(
        g, k, opt.ego_depth, opt.ego_fanout,
        derive_seed(opt.seed, k, static_cast<std::uint64_t>(s), "predict_ego"));
    prompts::PromptInstance inst = builder.link_task_prompt(ego, k, rel, shown);
    prompts::BiasMatrix bias = prompts::attention_bias_matrix(
        inst, g, phi, model.params().cfg.bias_on_completion_keys);
    std::vector<T> probs = model.entity_probs(inst, &bias, target);
    if (avg.empty()) avg.assign(probs.size(), T(0));
    for (std::size_t i = 0; i < probs.size(); ++i)
      avg[i] += probs[i] / static_cast<T>(opt.n_g);
  }

  NodeId base = target == EntityType::member
                    ? 1
                    : static_cast<NodeId>(g.n_members + 1);
  std::vector<NodeId> order;
  order.reserve(avg.size());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    NodeId id = base + static_cast<NodeId>(i);
    if (id == k) continue;
    if (std::binary_search(shown.begin(), shown.end(), id)) continue;
    order.push_back(id);
  }
  std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    T pa = avg[a - base], pb = avg[b - base];
    if (pa != pb) return pa > pb;
    return a < b;
  });
  if (static_cast<int>(order.size()) > top_m) order.resize(top_m);
  if (avg_out) *avg_out = std::move(avg);
  return order;
}

// ---------------------------------------------------------------- protocols

template <typename T>
EvalReport evaluate_links(nn::Model<T>& model, const graph::HetGraph& train_view,
                          const prompts::PromptBuilder& builder,
                          const synth::LinkSplit& split, bool use_test,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt) {
  EvalReport report;
  report.task = split.rel == graph::RelationType::member_job ? "link_ui"
                                                             : "link_uu";
  const int ranked_depth = 100;
  double r20 = 0.0, r40 = 0.0, n100 = 0.0;
  std::int64_t n = 0;
  for (const auto& nl : split.eval_nodes) {
    const auto& targets = use_test ? nl.test : nl.valid;
    if (targets.empty()) continue;
    auto ranked = predict_links<T>(model, train_view, builder, nl.node,
                                   split.rel, nl.train, ranked_depth, phi, opt);
    r20 += recall_at_m(ranked, targets, 20);
    r40 += recall_at_m(ranked, targets, 40);
    n100 += ndcg_at_m(ranked, targets, 100);
    ++n;
  }
  if (n == 0) throw graph::GraphError("no evaluation nodes for the link task");
  report.metrics["recall@20"] = r20 / static_cast<double>(n);
  report.metrics["recall@40"] = r40 / static_cast<double>(n);
  report.metrics["ndcg@100"] = n100 / static_cast<double>(n);
  report.per_seed[std::to_string(opt.seed)] = report.metrics;
  report.n_eval_nodes = n;
  return report;
}

template <typename T>
EvalReport evaluate_nodes(nn::Model<T>& model, const graph::HetGraph& g,
                          const prompts::PromptBuilder& builder,
                          const synth::NodeSplit& split, bool use_test,
                          std::size_t task_index, const prompts::TaskSpec& task,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt) {
  const auto& nodes = use_test ? split.test : split.valid;
  if (nodes.empty()) throw graph::GraphError("empty node evaluation split");
  std::vector<std::int32_t> preds, labels;
  for (NodeId k : nodes) {
    auto label = g.label(k, task.name);
    if (!label) continue;
    preds.push_back(
        predict_node<T>(model, g, builder, k, task_index, task, phi, opt));
    labels.push_back(*label);
  }
  EvalReport report;
  report.task = "node_" + task.name;
  report.metrics["accuracy"] = accuracy(preds, labels);
  report.metrics["f1"] = task.n_classes == 2
                             ? f1_binary(preds, labels, 1)
                             : f1_macro(preds, labels, task.n_classes);
  report.per_seed[std::to_string(opt.seed)] = report.metrics;
  report.n_eval_nodes = static_cast<std::int64_t>(preds.size());
  return report;
}

// ------------------------------------------------------------------- export

template <typename T>
void export_embeddings(const nn::ParameterStore<T>& params,
                       const graph::HetGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw graph::GraphError("cannot write embeddings: " + path);
  const char* fmt = sizeof(T) == 4 ? "%.9g" : "%.17g";
  char buf[64];
  for (NodeId id = 1; static_cast<std::int64_t>(id) <= g.node_count(); ++id) {
    out << id << '\t'
        << (g.type_of(id) == EntityType::member ? "member" : "job");
    const T* row = params.node_embed.row(id - 1);
    for (std::int64_t c = 0; c < params.cfg.dim; ++c) {
      std::snprintf(buf, sizeof(buf), fmt, static_cast<double>(row[c]));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw graph::GraphError("write failure on embeddings: " + path);
}

// ------------------------------------------------------------ instantiation

#define PLM_EVAL_INSTANTIATE(T)                                                \
  template std::int32_t predict_node<T>(                                      \
      nn::Model<T>&, const graph::HetGraph&, const prompts::PromptBuilder&,   \
      NodeId, std::size_t, const prompts::TaskSpec&,                          \
      const graph::MetapathSet&, const PredictOptions&, std::vector<T>*);     \
  template std::vector<NodeId> predict_links<T>(                              \
      nn::Model<T>&, const graph::HetGraph&, const prompts::PromptBuilder&,   \
      NodeId, graph::RelationType, std::span<const NodeId>, int,              \
      const graph::MetapathSet&, const PredictOptions&, std::vector<T>*);     \
  template EvalReport evaluate_links<T>(                                      \
      nn::Model<T>&, const graph::HetGraph&, const prompts::PromptBuilder&,   \
      const synth::LinkSplit&, bool, const graph::MetapathSet&,               \
      const PredictOptions&);                                                 \
  template EvalReport evaluate_nodes<T>(                                      \
      nn::Model<T>&, const graph::HetGraph&, const prompts::PromptBuilder&,   \
      const synth::NodeSplit&, bool, std::size_t, const prompts::TaskSpec&,   \
      const graph::MetapathSet&, const PredictOptions&);                      \
  template void export_embeddings<T>(const nn::ParameterStore<T>&,            \
                                     const graph::HetGraph&, const std::string&);

PLM_EVAL_INSTANTIATE(float)
PLM_EVAL_INSTANTIATE(double)

#undef PLM_EVAL_INSTANTIATE

}  // namespace plm::eval
