#pragma once
// Evaluation: ranking metrics, ego-graph-averaged prediction, report
// assembly and embedding export.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plm/model.hpp"
#include "plm/synth.hpp"
#include "plm/train.hpp"

namespace plm::eval {

// |top-M intersect targets| / |targets|. Throws on empty targets.
double recall_at_m(std::span<const graph::NodeId> ranked,
                   const std::vector<graph::NodeId>& targets, int m);

// Binary gains: DCG = sum over hit ranks r <= M of 1/log2(r+1), normalized by
// the ideal DCG of min(|targets|, M) hits.
double ndcg_at_m(std::span<const graph::NodeId> ranked,
                 const std::vector<graph::NodeId>& targets, int m);

double accuracy(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> labels);
double f1_binary(std::span<const std::int32_t> predictions,
                 std::span<const std::int32_t> labels, std::int32_t positive);
double f1_macro(std::span<const std::int32_t> predictions,
                std::span<const std::int32_t> labels, std::int32_t n_classes);

struct EvalReport {
  std::string task;
  std::map<std::string, double> metrics;
  std::map<std::string, std::map<std::string, double>> per_seed;
  std::string config_hash;
  std::int64_t n_eval_nodes = 0;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

struct PredictOptions {
  int n_g = 4;
  int ego_depth = 2;
  int ego_fanout = 5;
  std::uint64_t seed = 0;
};

// Averages the class-head softmax over n_g independently sampled ego-graph
// prompts; ties break toward the lowest class index.
template <typename T>
std::int32_t predict_node(nn::Model<T>& model, const graph::HetGraph& g,
                          const prompts::PromptBuilder& builder,
                          graph::NodeId k, std::size_t task_index,
                          const prompts::TaskSpec& task,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt,
                          std::vector<T>* avg_probs = nullptr);

// Averages the link-head softmax over n_g prompts, excludes the node itself
// and the shown entities, returns the top-M ids (ties toward ascending id).
template <typename T>
std::vector<graph::NodeId> predict_links(
    nn::Model<T>& model, const graph::HetGraph& g,
    const prompts::PromptBuilder& builder, graph::NodeId k,
    graph::RelationType rel, std::span<const graph::NodeId> shown, int top_m,
    const graph::MetapathSet& phi, const PredictOptions& opt,
    std::vector<T>* avg_probs = nullptr);

// Link-task protocol: per evaluation node, prompt with the training links
// shown, rank the rest, score against the chosen target split.
template <typename T>
EvalReport evaluate_links(nn::Model<T>& model, const graph::HetGraph& train_view,
                          const prompts::PromptBuilder& builder,
                          const synth::LinkSplit& split, bool use_test,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt);

// Node-task protocol over the validation or test node split.
template <typename T>
EvalReport evaluate_nodes(nn::Model<T>& model, const graph::HetGraph& g,
                          const prompts::PromptBuilder& builder,
                          const synth::NodeSplit& split, bool use_test,
                          std::size_t task_index, const prompts::TaskSpec& task,
                          const graph::MetapathSet& phi,
                          const PredictOptions& opt);

// One row per node: id, type, then the K feature-embedding values.
template <typename T>
void export_embeddings(const nn::ParameterStore<T>& params,
                       const graph::HetGraph& g, const std::string& path);

}  // namespace plm::eval
