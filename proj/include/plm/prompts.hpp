#pragma once
// Prompt/completion assembly: token sequences with per-token node
// association, segment tags, loss-space restriction and the proximity bias
// matrix consumed by the attention layers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plm/hetgraph.hpp"
#include "plm/vocab.hpp"

namespace plm::prompts {

enum class SegmentTag : std::uint8_t {
  instruction,
  ego_graph,
  intermediate_relation,
  feature,
  question,
  completion,
};

enum class LossSpace : std::uint8_t { text_only, member_only, job_only };

struct PromptInstance {
  std::vector<vocab::TokenId> tokens;
  std::vector<graph::NodeId> node_assoc;  // 0 = not associated with a node
  std::vector<std::int16_t> embed_hop;    // positional row for node tokens, -1 else
  std::vector<SegmentTag> segments;
  std::int64_t completion_begin = 0;  // == tokens.size() for task prompts
  std::optional<LossSpace> loss_space;
  graph::NodeId center = 0;
  graph::EgoGraph ego;

  std::int64_t size() const { return static_cast<std::int64_t>(tokens.size()); }
  std::int64_t completion_len() const { return size() - completion_begin; }
  std::span<const vocab::TokenId> targets() const {
    return {tokens.data() + completion_begin,
            static_cast<std::size_t>(completion_len())};
  }
};

// Token range a loss space restricts the softmax to.
struct TokenRange {
  vocab::TokenId begin = 0;
  std::int64_t count = 0;
};
TokenRange loss_space_range(LossSpace space, const vocab::VocabLayout& layout);

// psi bits per (generating position, key position); zero everywhere the key
// is not a node token. Rows cover the completion suffix, columns the whole
// sequence. Completion-less task prompts get one row for the final position
// (the head's readout), associated with the center node.
struct BiasMatrix {
  std::int64_t row_begin = 0;
  std::int64_t n_rows = 0;
  std::int64_t n_cols = 0;
  std::uint8_t psi_size = 0;
  std::vector<std::uint16_t> psi;

  std::uint16_t at(std::int64_t row, std::int64_t col) const {
    return psi[row * n_cols + col];
  }
};

BiasMatrix attention_bias_matrix(const PromptInstance& instance,
                                 const graph::HetGraph& g,
                                 const graph::MetapathSet& phi_set,
                                 bool include_completion_keys = true);

struct TaskSpec {
  std::string name;
  std::int32_t n_classes = 0;
  std::string feature;   // node feature included in the prompt ("bio")
  std::string question;  // question text ending the prompt
};

struct PromptOptions {
  int n_end = 3;
  int n_mid = 3;
  double mask_ratio = 0.5;
  std::int64_t max_tokens = 256;
};

class PromptBuilder {
 public:
  PromptBuilder(const graph::HetGraph& g, const vocab::Tokenizer& tok,
                const vocab::VocabLayout& layout, PromptOptions opt = {})
      : g_(g), tok_(tok), layout_(layout), opt_(opt) {}

  // Feature modeling: completion is the node's own feature text. nullopt when
  // the feature is missing or empty.
  std::optional<PromptInstance> feature_prompt(const graph::EgoGraph& ego,
                                               graph::NodeId k,
                                               std::string_view feature) const;

  // One-hop structural modeling: completion is a shuffled sample of k's
  // phi-neighbors outside the ego graph. nullopt when none are eligible.
  std::optional<PromptInstance> first_order_prompt(const graph::EgoGraph& ego,
                                                   graph::NodeId k,
                                                   const graph::Metapath& phi,
                                                   std::uint64_t seed) const;

  // Two-hop structural modeling via triple approximation. nullopt when triple
  // sampling fails or yields no end nodes.
  std::optional<PromptInstance> higher_order_prompt(const graph::EgoGraph& ego,
                                                    graph::NodeId k,
                                                    const graph::Metapath& phi,
                                                    std::uint64_t seed) const;

  // Node-level task prompt; no completion, the head reads the last hidden
  // state. A missing feature degrades to a prompt without the feature segment.
  PromptInstance node_task_prompt(const graph::EgoGraph& ego, graph::NodeId k,
                                  const TaskSpec& task) const;

  struct ObservedSplit {
    std::vector<graph::NodeId> shown;    // sorted
    std::vector<graph::NodeId> heldout;  // sorted, disjoint from shown
  };
  // Random shown/heldout partition of the observed neighbor list (the caller
  // passes the training-split links). nullopt when fewer than two neighbors.
  // The caller bans the heldout from ego sampling before building the prompt.
  static std::optional<ObservedSplit> split_observed(
      std::span<const graph::NodeId> observed, double mask_ratio,
      std::uint64_t seed);

  // Link-level task prompt listing the shown neighbors; no completion, the
  // head reads the last hidden state.
  PromptInstance link_task_prompt(const graph::EgoGraph& ego, graph::NodeId k,
                                  graph::RelationType rel,
                                  std::span<const graph::NodeId> shown) const;

  const PromptOptions& options() const { return opt_; }
  const vocab::VocabLayout& layout() const { return layout_; }

 private:
  struct Assembler;
  const graph::HetGraph& g_;
  const vocab::Tokenizer& tok_;
  const vocab::VocabLayout& layout_;
  PromptOptions opt_;
};

// Human-readable JSON rendering for the debug dump CLI.
std::string debug_dump(const PromptInstance& instance,
                       const vocab::Tokenizer& tok,
                       const vocab::VocabLayout& layout,
                       std::string_view kind);

}  // namespace plm::prompts
