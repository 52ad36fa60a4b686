#pragma once
// Decoder-only causal transformer over the extended vocabulary with
// proximity-aware attention bias, restricted-softmax LM losses and the two
// task heads. Instantiated for float (training) and double (gradient checks).

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plm/prompts.hpp"
#include "plm/tensor.hpp"
#include "plm/vocab.hpp"

namespace plm::nn {

struct TransformerConfig {
  int layers = 2;
  int heads = 2;
  std::int64_t dim = 64;
  std::int64_t ffn_dim = 256;
  std::int64_t context = 256;
  int max_hop = 2;    // D; positional table has max_hop+1 rows
  int psi_size = 7;   // M+1
  bool bias_per_layer = true;  // false: one global b shared by all layers
  bool bias_on_completion_keys = true;
  bool tie_heads = true;

  void validate() const;
};

enum class ParamKind : std::uint8_t {
  backbone,
  node_embed,    // Z
  entity_embed,  // E
  pos_embed,     // P
  attn_bias,     // b
  class_head,    // C^n
  link_head,     // untied node head
};

const char* param_kind_name(ParamKind k);

// Non-copyable: `entries` points into the member tensors.
template <typename T>
struct ParameterStore {
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  TransformerConfig cfg;
  vocab::VocabLayout layout;

  Tensor<T> text_embed;
  struct Layer {
    Tensor<T> ln1_g, ln1_b;
    Tensor<T> qkv_w, qkv_b;
    Tensor<T> attn_out_w, attn_out_b;
    Tensor<T> ln2_g, ln2_b;
    Tensor<T> fc_w, fc_b;
    Tensor<T> proj_w, proj_b;
  };
  std::vector<Layer> layers;
  Tensor<T> lnf_g, lnf_b;
  Tensor<T> node_embed;     // Z [N, d]
  Tensor<T> entity_embed;   // E [2, d]
  Tensor<T> pos_embed;      // P [max_hop+1, d]
  Tensor<T> attn_bias;      // b [L or 1, psi_size]
  std::vector<Tensor<T>> class_embed;  // aligned with layout.tasks
  Tensor<T> node_head;      // untied head table; unused when tie_heads

  struct Entry {
    std::string name;
    ParamKind kind;
    Tensor<T>* tensor;
    bool frozen = false;
  };
  std::vector<Entry> entries;

  // Allocates all tensors, registers them in a fixed enumeration order and
  // draws the initial values (sigma 0.02, ln gains 1, biases and b zero).
  void build(const vocab::VocabLayout& layout, const TransformerConfig& cfg,
             std::uint64_t seed);
  void register_entries();  // rebuilds the entry table (after load)

  Entry* find(std::string_view name);
  void set_frozen(ParamKind kind, bool frozen);
  void freeze_all_except(const std::vector<ParamKind>& trainable);
  void zero_grads();
  // The table backing node-token LM predictions and the link heads.
  Tensor<T>& node_table() {
    return cfg.tie_heads ? node_embed : node_head;
  }
};

// Per-instance forward artifacts. Tensors live on the tape that produced them.
template <typename T>
struct ForwardResult {
  Tensor<T>* hidden = nullptr;  // [T, d], post final norm
  // Pre-softmax post-bias attention scores per layer, [H, T, T]; only kept
  // when requested.
  std::vector<std::vector<T>> scores;
};

template <typename T>
class Model {
 public:
  explicit Model(ParameterStore<T>& params) : p_(params) {}

  ForwardResult<T> forward(Tape<T>& tape, const prompts::PromptInstance& inst,
                           const prompts::BiasMatrix* bias,
                           bool keep_scores = false);

  // Mean negative restricted log-likelihood over the completion positions.
  Tensor<T>* lm_loss(Tape<T>& tape, const prompts::PromptInstance& inst,
                     const prompts::BiasMatrix* bias);

  // Categorical cross-entropy of the class head on the last hidden state.
  Tensor<T>* node_task_loss(Tape<T>& tape, const prompts::PromptInstance& inst,
                            const prompts::BiasMatrix* bias,
                            std::size_t task_index, std::int32_t label);

  // Multi-hot link objective: mean negative restricted log-softmax of the
  // held-out neighbors.
  Tensor<T>* link_task_loss(Tape<T>& tape, const prompts::PromptInstance& inst,
                            const prompts::BiasMatrix* bias,
                            graph::EntityType target_entity,
                            const std::vector<graph::NodeId>& heldout);

  // Forward-only heads used at prediction time.
  std::vector<T> class_probs(const prompts::PromptInstance& inst,
                             const prompts::BiasMatrix* bias,
                             std::size_t task_index);
  std::vector<T> entity_probs(const prompts::PromptInstance& inst,
                              const prompts::BiasMatrix* bias,
                              graph::EntityType target_entity);

  // Raw head scores for a given hidden state (Eq-style C . h).
  std::vector<T> node_class_logits(const T* h_last, std::size_t task_index) const;
  std::vector<T> link_logits(const T* h_last, graph::EntityType target) const;

  ParameterStore<T>& params() { return p_; }

 private:
  ParameterStore<T>& p_;
};

// Restricted log-softmax over a token range of a full-vocabulary logits row:
// probabilities outside the range are exactly zero, inside they renormalize.
// Returns log-probabilities aligned with [range.begin, range.begin+count).
template <typename T>
std::vector<T> restricted_log_softmax(std::span<const T> logits,
                                      prompts::TokenRange range);

// ----------------------------------------------------------- gradient check

template <typename T>
struct GradCheckEntry {
  std::string name;
  ParamKind kind;
  T max_rel_err = T(0);
  T analytic = T(0);
  T numeric = T(0);
  std::int64_t coord = -1;
};

template <typename T>
struct GradCheckReport {
  std::vector<GradCheckEntry<T>> tensors;
  T max_rel_err = T(0);
};

// Central-difference check of d(loss)/d(theta) against the tape gradients for
// a random subsample of coordinates per tensor (always including the largest
// analytic entries).
template <typename T>
GradCheckReport<T> gradient_check(
    ParameterStore<T>& params,
    const std::function<Tensor<T>*(Tape<T>&)>& loss_fn, T epsilon,
    int coords_per_tensor, std::uint64_t seed);

// Self-contained fixture exercising every parameter class: a hand-built
// five-node graph plus one instance of each objective.
template <typename T>
struct GradCheckFixture {
  graph::HetGraph g;
  vocab::ByteTokenizer tokenizer;
  vocab::VocabLayout layout;
  graph::MetapathSet phi;
  ParameterStore<T> params;
  std::vector<prompts::PromptInstance> lm_instances;
  std::vector<prompts::BiasMatrix> lm_biases;
  prompts::PromptInstance node_instance;
  prompts::BiasMatrix node_bias;
  prompts::PromptInstance link_instance;
  prompts::BiasMatrix link_bias;
  std::vector<graph::NodeId> link_heldout;

  explicit GradCheckFixture(const TransformerConfig& cfg, std::uint64_t seed = 7);
  Tensor<T>* composite_loss(Tape<T>& tape);
};

}  // namespace plm::nn
