#pragma once
// Training orchestration: stage-0 text pretraining, warmup epochs over the
// feature/structural objectives, interleaved task epochs, the Adam optimizer
// with freeze masks, and binary checkpoints.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "plm/model.hpp"
#include "plm/synth.hpp"

namespace plm::train {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MetapathPolicy { per_node, per_epoch };

struct TrainConfig {
  int warmup_epochs = 10;
  int total_epochs = 100;  // warmup + interleaved
  int stage0_epochs = 5;
  double lr = 1e-3;
  double grad_clip = 1.0;
  int batch_size = 8;
  std::uint64_t seed = 0;
  std::string metapaths = std::string(graph::kDefaultMetapaths);
  MetapathPolicy policy = MetapathPolicy::per_node;
  bool freeze_backbone = true;
  int ego_depth = 2;
  int ego_fanout = 5;
  prompts::PromptOptions prompt_opt;

  void validate(const graph::MetapathSet& phi) const;
};

// ------------------------------------------------------------------- adam

template <typename T>
class Adam {
 public:
  Adam(nn::ParameterStore<T>& params, T lr, T grad_clip, T beta1 = T(0.9),
       T beta2 = T(0.999), T eps = T(1e-8));

  // Scales the accumulated gradients by `scale` (1/batch), clips the global
  // norm over unfrozen tensors, applies the update and clears the gradients.
  // Throws naming the tensor when a non-finite gradient shows up.
  void step(T scale);

  std::int64_t steps() const { return t_; }

 private:
  nn::ParameterStore<T>& params_;
  T lr_, clip_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// ------------------------------------------------------------- checkpoints

inline constexpr char kCheckpointMagic[8] = {'P', 'L', 'M', '4',
                                             'J', 'O', 'B', '1'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  int version = kCheckpointVersion;
  std::string config_hash;
  std::string dtype;  // "f32" | "f64"
  std::int64_t epoch = 0;
  std::uint64_t rng_state = 0;
};

template <typename T>
void save_checkpoint(const nn::ParameterStore<T>& params,
                     const CheckpointMeta& meta, const std::string& path);

// Reads the manifest, rebuilds the parameter store from it and fills the
// tensors; save -> load is the identity on every tensor and the rng state.
template <typename T>
CheckpointMeta load_checkpoint(nn::ParameterStore<T>& params,
                               const std::string& path);

// Manifest-only peek used by the CLI to pick the scalar type.
std::string checkpoint_dtype(const std::string& path);

// -------------------------------------------------------------- schedules

struct EpochStats {
  std::int64_t epoch = 0;
  std::string phase;  // stage0 | warmup | interleaved
  double feature_loss = 0.0;
  double structural_loss = 0.0;
  double task_loss = 0.0;
  std::int64_t feature_count = 0;
  std::int64_t structural_count = 0;
  std::int64_t task_count = 0;
  std::int64_t skipped = 0;
  std::int64_t steps = 0;

  std::string to_json() const;
};

struct LinkTask {
  graph::RelationType rel = graph::RelationType::member_job;
  // Observed training links per source member (split-filtered for evaluation
  // nodes, full adjacency otherwise).
  std::vector<std::vector<graph::NodeId>> observed;  // indexed by member id-1
};

struct NodeTask {
  std::size_t task_index = 0;
  prompts::TaskSpec spec;
  std::vector<graph::NodeId> train_nodes;
};

using TaskBinding = std::variant<std::monostate, LinkTask, NodeTask>;

template <typename T>
class Trainer {
 public:
  Trainer(const graph::HetGraph& g, nn::ParameterStore<T>& params,
          const TrainConfig& cfg);

  // Plain causal LM pass over the node feature texts; trains the backbone.
  EpochStats stage0_epoch(std::int64_t epoch);
  // One feature + one one-hop + one two-hop structural instance per node.
  EpochStats warmup_epoch(std::int64_t epoch);
  // Adds the task objective, cycling feature -> structural -> task batches.
  EpochStats interleaved_epoch(std::int64_t epoch, const TaskBinding& task);

  // Applies the phase's freeze policy (stage0: backbone only; warmup: the hot
  // embeddings and b; interleaved: hot set plus task heads).
  void apply_freeze_policy(std::string_view phase);

  const graph::MetapathSet& metapaths() const { return phi_; }
  const prompts::PromptBuilder& builder() const { return builder_; }

 private:
  struct Pending;
  EpochStats run_epoch(std::int64_t epoch, std::string_view phase,
                       const TaskBinding& task);
  void train_batch(std::vector<Pending>& batch, EpochStats& stats,
                   double& loss_acc, std::int64_t& count);

  const graph::HetGraph& g_;
  nn::ParameterStore<T>& params_;
  TrainConfig cfg_;
  graph::MetapathSet phi_;
  std::vector<const graph::Metapath*> one_hop_, two_hop_;
  vocab::ByteTokenizer tokenizer_;
  prompts::PromptBuilder builder_;
  nn::Model<T> model_;
  Adam<T> adam_;
};

// Plain SVG polyline of per-epoch losses, one series per objective.
void write_loss_svg(const std::vector<EpochStats>& stats, const std::string& path);

}  // namespace plm::train
