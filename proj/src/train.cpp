#include "plm/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace plm::train {

using graph::EntityType;
using graph::NodeId;
using nlohmann::json;

void TrainConfig::validate(const graph::MetapathSet& phi) const {
  if (warmup_epochs > total_epochs)
    throw TrainError("warmup epochs exceed total epochs");
  if (phi.m() == 0) throw TrainError("metapath set is empty");
  bool one_hop = false;
  for (const auto& p : phi.paths) one_hop |= p.length() == 1;
  if (!one_hop) throw TrainError("metapath set needs at least one one-hop path");
  if (batch_size < 1 || lr <= 0.0) throw TrainError("bad optimizer settings");
}

// ---------------------------------------------------------------------- adam

template <typename T>
Adam<T>::Adam(nn::ParameterStore<T>& params, T lr, T grad_clip, T beta1, T beta2,
              T eps)
    : params_(params), lr_(lr), clip_(grad_clip), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  for (auto& e : params_.entries) {
    m_.emplace_back(e.tensor->numel(), T(0));
    v_.emplace_back(e.tensor->numel(), T(0));
  }
}

template <typename T>
void Adam<T>::step(T scale) {
  if (m_.size() != params_.entries.size())
    throw TrainError("optimizer state out of sync with parameter store");
  // Scale, validate and measure the unfrozen gradients.
  T sq_norm = T(0);
  for (std::size_t i = 0; i < params_.entries.size(); ++i) {
    auto& e = params_.entries[i];
    if (e.frozen) continue;
    T* g = e.tensor->grad.data();
    std::int64_t n = e.tensor->numel();
    kernels::scale(g, scale, n);
    for (std::int64_t c = 0; c < n; ++c)
      if (!std::isfinite(g[c]))
        throw TrainError("non-finite gradient in tensor " + e.name);
    sq_norm += kernels::dot(g, g, n);
  }
  T coef = T(1);
  if (clip_ > T(0)) {
    T norm = std::sqrt(sq_norm);
    if (norm > clip_) coef = clip_ / norm;
  }
  ++t_;
  T bc1 = T(1) / (T(1) - std::pow(beta1_, static_cast<T>(t_)));
  T bc2 = T(1) / (T(1) - std::pow(beta2_, static_cast<T>(t_)));
  for (std::size_t i = 0; i < params_.entries.size(); ++i) {
    auto& e = params_.entries[i];
    if (e.frozen) {
      e.tensor->zero_grad();
      continue;
    }
    std::int64_t n = e.tensor->numel();
    if (coef != T(1)) kernels::scale(e.tensor->grad.data(), coef, n);
    kernels::adam(e.tensor->data.data(), e.tensor->grad.data(), m_[i].data(),
                  v_[i].data(), n, lr_, beta1_, beta2_, eps_, bc1, bc2);
    e.tensor->zero_grad();
  }
}

template class Adam<float>;
template class Adam<double>;

// --------------------------------------------------------------- checkpoints

namespace {

template <typename T>
void write_le(std::ostream& out, const T* data, std::size_t n) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(n * sizeof(T));
  for (std::size_t i = 0; i < n; ++i) {
    U bits = std::bit_cast<U>(data[i]);
    for (std::size_t b = 0; b < sizeof(T); ++b)
      buf[i * sizeof(T) + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

template <typename T>
void read_le(std::istream& in, T* data, std::size_t n) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<unsigned char> buf(n * sizeof(T));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw TrainError("checkpoint payload truncated");
  for (std::size_t i = 0; i < n; ++i) {
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      bits |= static_cast<U>(buf[i * sizeof(T) + b]) << (8 * b);
    data[i] = std::bit_cast<T>(bits);
  }
}

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

json read_manifest(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw TrainError("not a recognized checkpoint (bad magic)");
  unsigned char len_bytes[4];
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  if (in.gcount() != 4) throw TrainError("checkpoint header truncated");
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(len_bytes[b]) << (8 * b);
  std::string header(len, '\0');
  in.read(header.data(), len);
  if (static_cast<std::uint32_t>(in.gcount()) != len)
    throw TrainError("checkpoint header truncated");
  json manifest = json::parse(header, nullptr, false);
  if (manifest.is_discarded()) throw TrainError("checkpoint manifest is not JSON");
  if (manifest.value("version", -1) != kCheckpointVersion)
    throw TrainError("unsupported checkpoint version");
  return manifest;
}

}  // namespace

template <typename T>
void save_checkpoint(const nn::ParameterStore<T>& params,
                     const CheckpointMeta& meta, const std::string& path) {
  json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["dtype"] = dtype_name<T>();
  manifest["config_hash"] = meta.config_hash;
  manifest["epoch"] = meta.epoch;
  manifest["rng_state"] = std::to_string(meta.rng_state);
  const auto& c = params.cfg;
  manifest["model"] = {
      {"layers", c.layers},         {"heads", c.heads},
      {"dim", c.dim},               {"ffn_dim", c.ffn_dim},
      {"context", c.context},       {"max_hop", c.max_hop},
      {"psi_size", c.psi_size},     {"bias_per_layer", c.bias_per_layer},
      {"bias_on_completion_keys", c.bias_on_completion_keys},
      {"tie_heads", c.tie_heads}};
  json tasks = json::array();
  for (const auto& t : params.layout.tasks)
    tasks.push_back({{"name", t.name}, {"n_classes", t.n_classes}});
  manifest["vocab"] = {{"v_text", params.layout.v_text},
                       {"n_members", params.layout.n_members},
                       {"n_jobs", params.layout.n_jobs},
                       {"tasks", tasks}};
  json tensors = json::array();
  for (const auto& e : params.entries)
    tensors.push_back({{"name", e.name},
                       {"shape", e.tensor->shape},
                       {"dtype", dtype_name<T>()}});
  manifest["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainError("cannot write checkpoint: " + path);
  std::string header = manifest.dump();
  out.write(kCheckpointMagic, 8);
  unsigned char len_bytes[4];
  for (int b = 0; b < 4; ++b)
    len_bytes[b] = static_cast<unsigned char>(header.size() >> (8 * b));
  out.write(reinterpret_cast<const char*>(len_bytes), 4);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& e : params.entries)
    write_le(out, e.tensor->data.data(), e.tensor->data.size());
  if (!out) throw TrainError("write failure on checkpoint: " + path);
}

template <typename T>
CheckpointMeta load_checkpoint(nn::ParameterStore<T>& params,
                               const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainError("cannot open checkpoint: " + path);
  json manifest = read_manifest(in);
  if (manifest.value("dtype", "") != dtype_name<T>())
    throw TrainError("checkpoint dtype " + manifest.value("dtype", std::string()) +
                     " does not match the requested precision");

  nn::TransformerConfig cfg;
  const json& m = manifest.at("model");
  cfg.layers = m.at("layers").get<int>();
  cfg.heads = m.at("heads").get<int>();
  cfg.dim = m.at("dim").get<std::int64_t>();
  cfg.ffn_dim = m.at("ffn_dim").get<std::int64_t>();
  cfg.context = m.at("context").get<std::int64_t>();
  cfg.max_hop = m.at("max_hop").get<int>();
  cfg.psi_size = m.at("psi_size").get<int>();
  cfg.bias_per_layer = m.at("bias_per_layer").get<bool>();
  cfg.bias_on_completion_keys = m.at("bias_on_completion_keys").get<bool>();
  cfg.tie_heads = m.at("tie_heads").get<bool>();

  vocab::VocabLayout layout;
  const json& v = manifest.at("vocab");
  layout.v_text = v.at("v_text").get<vocab::TokenId>();
  layout.n_members = v.at("n_members").get<std::int64_t>();
  layout.n_jobs = v.at("n_jobs").get<std::int64_t>();
  for (const auto& t : v.at("tasks"))
    layout.tasks.push_back(
        {t.at("name").get<std::string>(), t.at("n_classes").get<std::int32_t>()});

  params.build(layout, cfg, 0);
  const json& tensors = manifest.at("tensors");
  if (tensors.size() != params.entries.size())
    throw TrainError("checkpoint tensor directory does not match the model");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    auto& e = params.entries[i];
    const json& t = tensors[i];
    if (t.at("name").get<std::string>() != e.name)
      throw TrainError("checkpoint tensor order mismatch at " + e.name);
    std::vector<std::int64_t> shape = t.at("shape").get<std::vector<std::int64_t>>();
    if (shape != e.tensor->shape)
      throw TrainError("checkpoint shape mismatch for " + e.name);
    read_le(in, e.tensor->data.data(), e.tensor->data.size());
  }

  CheckpointMeta meta;
  meta.version = kCheckpointVersion;
  meta.config_hash = manifest.value("config_hash", "");
  meta.dtype = manifest.value("dtype", "");
  meta.epoch = manifest.value("epoch", 0);
  meta.rng_state = std::stoull(manifest.value("rng_state", "0"));
  return meta;
}

std::string checkpoint_dtype(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainError("cannot open checkpoint: " + path);
  return read_manifest(in).value("dtype", "");
}

template void save_checkpoint<float>(const nn::ParameterStore<float>&,
                                     const CheckpointMeta&, const std::string&);
template void save_checkpoint<double>(const nn::ParameterStore<double>&,
                                      const CheckpointMeta&, const std::string&);
template CheckpointMeta load_checkpoint<float>(nn::ParameterStore<float>&,
                                               const std::string&);
template CheckpointMeta load_checkpoint<double>(nn::ParameterStore<double>&,
                                                const std::string&);

// ------------------------------------------------------------------ trainer

std::string EpochStats::to_json() const {
  json j;
  j["epoch"] = epoch;
  j["phase"] = phase;
  j["feature_loss"] = feature_loss;
  j["structural_loss"] = structural_loss;
  j["task_loss"] = task_loss;
  j["feature_count"] = feature_count;
  j["structural_count"] = structural_count;
  j["task_count"] = task_count;
  j["skipped"] = skipped;
  j["steps"] = steps;
  return j.dump();
}

template <typename T>
struct Trainer<T>::Pending {
  enum class Kind { lm, node, link } kind = Kind::lm;
  prompts::PromptInstance inst;
  std::int32_t label = -1;
  std::size_t task_index = 0;
  std::vector<NodeId> heldout;
  EntityType target_entity = EntityType::job;
};

template <typename T>
Trainer<T>::Trainer(const graph::HetGraph& g, nn::ParameterStore<T>& params,
                    const TrainConfig& cfg)
    : g_(g), params_(params), cfg_(cfg),
      phi_(graph::MetapathSet::parse_list(cfg.metapaths)),
      builder_(g, tokenizer_, params.layout, cfg.prompt_opt),
      model_(params),
      adam_(params, static_cast<T>(cfg.lr), static_cast<T>(cfg.grad_clip)) {
  cfg_.validate(phi_);
  if (params_.cfg.psi_size != phi_.psi_size())
    throw TrainError("model psi size does not match the metapath set");
  for (const auto& p : phi_.paths)
    (p.length() == 1 ? one_hop_ : two_hop_).push_back(&p);
}

template <typename T>
void Trainer<T>::apply_freeze_policy(std::string_view phase) {
  using nn::ParamKind;
  std::vector<ParamKind> trainable;
  if (phase == "stage0") {
    trainable = {ParamKind::backbone};
  } else {
    trainable = {ParamKind::node_embed, ParamKind::entity_embed,
                 ParamKind::pos_embed, ParamKind::attn_bias};
    if (!cfg_.freeze_backbone) trainable.push_back(ParamKind::backbone);
    if (phase == "interleaved") {
      trainable.push_back(ParamKind::class_head);
      trainable.push_back(ParamKind::link_head);
    }
  }
  params_.freeze_all_except(trainable);
}

template <typename T>
void Trainer<T>::train_batch(std::vector<Pending>& batch, EpochStats& stats,
                             double& loss_acc, std::int64_t& count) {
  if (batch.empty()) return;
  for (const Pending& p : batch) {
    prompts::BiasMatrix bias = prompts::attention_bias_matrix(
        p.inst, g_, phi_, params_.cfg.bias_on_completion_keys);
    nn::Tape<T> tape;
    nn::Tensor<T>* loss = nullptr;
    switch (p.kind) {
      case Pending::Kind::lm:
        loss = model_.lm_loss(tape, p.inst, &bias);
        break;
      case Pending::Kind::node:
        loss = model_.node_task_loss(tape, p.inst, &bias, p.task_index, p.label);
        break;
      case Pending::Kind::link:
        loss = model_.link_task_loss(tape, p.inst, &bias, p.target_entity,
                                     p.heldout);
        break;
    }
    double value = static_cast<double>(loss->data[0]);
    if (!std::isfinite(value))
      throw TrainError("non-finite loss at epoch " + std::to_string(stats.epoch));
    tape.backward(loss);
    loss_acc += value;
    ++count;
  }
  adam_.step(T(1) / static_cast<T>(batch.size()));
  ++stats.steps;
  batch.clear();
}

template <typename T>
EpochStats Trainer<T>::stage0_epoch(std::int64_t epoch) {
  EpochStats stats;
  stats.epoch = epoch;
  stats.phase = "stage0";

  std::vector<std::string> corpus;
  for (NodeId id = 1; static_cast<std::int64_t>(id) <= g_.node_count(); ++id)
    for (const auto& [name, text] : g_.features[id - 1])
      if (!text.empty()) corpus.push_back(text);
  if (corpus.empty()) throw TrainError("stage-0 corpus is empty");
  Rng order_rng(derive_seed(cfg_.seed, 0, epoch, "stage0_order"));
  order_rng.shuffle(corpus);

  double loss_acc = 0.0;
  std::vector<Pending> batch;
  for (const std::string& text : corpus) {
    Pending p;
    p.kind = Pending::Kind::lm;
    prompts::PromptInstance& inst = p.inst;
    inst.tokens.push_back(vocab::ByteTokenizer::kBos);
    for (vocab::TokenId t : tokenizer_.tokenize(text)) inst.tokens.push_back(t);
    if (inst.size() > params_.cfg.context)
      inst.tokens.resize(params_.cfg.context);
    inst.node_assoc.assign(inst.tokens.size(), 0);
    inst.embed_hop.assign(inst.tokens.size(), -1);
    inst.segments.assign(inst.tokens.size(), prompts::SegmentTag::completion);
    inst.segments[0] = prompts::SegmentTag::instruction;
    inst.completion_begin = 1;
    inst.loss_space = prompts::LossSpace::text_only;
    batch.push_back(std::move(p));
    if (static_cast<int>(batch.size()) == cfg_.batch_size)
      train_batch(batch, stats, loss_acc, stats.feature_count);
  }
  train_batch(batch, stats, loss_acc, stats.feature_count);
  if (stats.feature_count > 0)
    stats.feature_loss = loss_acc / static_cast<double>(stats.feature_count);
  return stats;
}

template <typename T>
EpochStats Trainer<T>::warmup_epoch(std::int64_t epoch) {
  return run_epoch(epoch, "warmup", std::monostate{});
}

template <typename T>
EpochStats Trainer<T>::interleaved_epoch(std::int64_t epoch,
                                         const TaskBinding& task) {
  if (std::holds_alternative<std::monostate>(task))
    throw TrainError("interleaved epoch needs a task binding");
  return run_epoch(epoch, "interleaved", task);
}

template <typename T>
EpochStats Trainer<T>::run_epoch(std::int64_t epoch, std::string_view phase,
                                 const TaskBinding& task) {
  EpochStats stats;
  stats.epoch = epoch;
  stats.phase = std::string(phase);

  std::vector<NodeId> order(static_cast<std::size_t>(g_.node_count()));
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<NodeId>(i + 1);
  Rng order_rng(derive_seed(cfg_.seed, 0, epoch, "node_order"));
  order_rng.shuffle(order);

  // Per-epoch metapath picks (config-selectable policy).
  const graph::Metapath* epoch_one = nullptr;
  const graph::Metapath* epoch_two = nullptr;
  if (cfg_.policy == MetapathPolicy::per_epoch) {
    Rng phi_rng(derive_seed(cfg_.seed, 1, epoch, "phi_epoch"));
    if (!one_hop_.empty()) epoch_one = one_hop_[phi_rng.uniform(one_hop_.size())];
    if (!two_hop_.empty()) epoch_two = two_hop_[phi_rng.uniform(two_hop_.size())];
  }
  auto pick = [&](const std::vector<const graph::Metapath*>& pool,
                  const graph::Metapath* epoch_pick, NodeId k,
                  std::string_view tag) -> const graph::Metapath* {
    EntityType t = g_.type_of(k);
    if (cfg_.policy == MetapathPolicy::per_epoch) {
      if (epoch_pick && epoch_pick->compatible_with(t)) return epoch_pick;
      return nullptr;
    }
    std::vector<const graph::Metapath*> compat;
    for (const auto* p : pool)
      if (p->compatible_with(t)) compat.push_back(p);
    if (compat.empty()) return nullptr;
    Rng rng(derive_seed(cfg_.seed, k, epoch, tag));
    return compat[rng.uniform(compat.size())];
  };

  std::vector<Pending> feature_q, structural_q;
  for (NodeId k : order) {
    // Feature modeling instance.
    {
      auto ego = graph::sample_ego_graph(g_, k, cfg_.ego_depth, cfg_.ego_fanout,
                                         derive_seed(cfg_.seed, k, epoch, "ego_f"));
      const char* feat = g_.type_of(k) == EntityType::member ? "bio" : "jd";
      auto inst = builder_.feature_prompt(ego, k, feat);
      if (inst) {
        Pending p;
        p.kind = Pending::Kind::lm;
        p.inst = std::move(*inst);
        feature_q.push_back(std::move(p));
      } else {
        ++stats.skipped;
      }
    }
    // One one-hop and one two-hop structural instance.
    if (const graph::Metapath* phi1 = pick(one_hop_, epoch_one, k, "pick1")) {
      auto ego = graph::sample_ego_graph(g_, k, cfg_.ego_depth, cfg_.ego_fanout,
                                         derive_seed(cfg_.seed, k, epoch, "ego_1"));
      auto inst = builder_.first_order_prompt(
          ego, k, *phi1, derive_seed(cfg_.seed, k, epoch, "first"));
      if (inst) {
        Pending p;
        p.kind = Pending::Kind::lm;
        p.inst = std::move(*inst);
        structural_q.push_back(std::move(p));
      } else {
        ++stats.skipped;
      }
    } else {
      ++stats.skipped;
    }
    if (const graph::Metapath* phi2 = pick(two_hop_, epoch_two, k, "pick2")) {
      auto ego = graph::sample_ego_graph(g_, k, cfg_.ego_depth, cfg_.ego_fanout,
                                         derive_seed(cfg_.seed, k, epoch, "ego_2"));
      auto inst = builder_.higher_order_prompt(
          ego, k, *phi2, derive_seed(cfg_.seed, k, epoch, "second"));
      if (inst) {
        Pending p;
        p.kind = Pending::Kind::lm;
        p.inst = std::move(*inst);
        structural_q.push_back(std::move(p));
      } else {
        ++stats.skipped;
      }
    } else {
      ++stats.skipped;
    }
  }

  // Eligible task nodes, in epoch order.
  std::vector<NodeId> task_nodes;
  for (NodeId k : order) {
    if (const auto* link = std::get_if<LinkTask>(&task)) {
      if (g_.type_of(k) == EntityType::member &&
          link->observed[k - 1].size() >= 2)
        task_nodes.push_back(k);
    } else if (const auto* node = std::get_if<NodeTask>(&task)) {
      if (std::binary_search(node->train_nodes.begin(), node->train_nodes.end(),
                             k) &&
          g_.label(k, node->spec.name))
        task_nodes.push_back(k);
    }
  }

  // One task instance per eligible node per pass; nodes are recycled with
  // fresh masks and egos while the LM streams drain, so every
  // feature -> structural -> task cycle really carries a task batch.
  std::size_t task_cursor = 0;
  std::uint64_t task_draw = 0;
  auto next_task = [&]() -> Pending {
    NodeId k = task_nodes[task_cursor];
    if (++task_cursor == task_nodes.size()) {
      task_cursor = 0;
      ++task_draw;
    }
    std::uint64_t s =
        derive_seed(cfg_.seed, k, epoch * 1024 + task_draw, "task");
    Pending p;
    if (const auto* link = std::get_if<LinkTask>(&task)) {
      auto split = prompts::PromptBuilder::split_observed(
          link->observed[k - 1], cfg_.prompt_opt.mask_ratio, s);
      auto ego = graph::sample_ego_graph(g_, k, cfg_.ego_depth, cfg_.ego_fanout,
                                         derive_seed(s, k, 0, "ego_t"),
                                         split->heldout);
      p.kind = Pending::Kind::link;
      p.inst = builder_.link_task_prompt(ego, k, link->rel, split->shown);
      p.heldout = std::move(split->heldout);
      p.target_entity = link->rel == graph::RelationType::member_job
                            ? EntityType::job
                            : EntityType::member;
    } else {
      const auto* node = std::get_if<NodeTask>(&task);
      auto ego = graph::sample_ego_graph(g_, k, cfg_.ego_depth, cfg_.ego_fanout,
                                         derive_seed(s, k, 0, "ego_t"));
      p.kind = Pending::Kind::node;
      p.inst = builder_.node_task_prompt(ego, k, node->spec);
      p.label = *g_.label(k, node->spec.name);
      p.task_index = node->task_index;
    }
    return p;
  };

  // Cycle feature -> structural -> task batches (1:1:1) until the LM streams
  // drain.
  double f_loss = 0.0, s_loss = 0.0, t_loss = 0.0;
  std::size_t fi = 0, si = 0;
  std::vector<Pending> batch;
  auto take = [&](std::vector<Pending>& q, std::size_t& i, double& acc,
                  std::int64_t& count) {
    if (i >= q.size()) return;
    std::size_t end = std::min(q.size(), i + static_cast<std::size_t>(cfg_.batch_size));
    for (; i < end; ++i) batch.push_back(std::move(q[i]));
    train_batch(batch, stats, acc, count);
  };
  auto take_task = [&]() {
    if (task_nodes.empty()) return;
    for (int i = 0; i < cfg_.batch_size; ++i) batch.push_back(next_task());
    train_batch(batch, stats, t_loss, stats.task_count);
  };
  bool any_lm = !feature_q.empty() || !structural_q.empty();
  while (fi < feature_q.size() || si < structural_q.size()) {
    take(feature_q, fi, f_loss, stats.feature_count);
    take(structural_q, si, s_loss, stats.structural_count);
    take_task();
  }
  if (!any_lm) take_task();  // degenerate graphs still train the task head
  if (stats.feature_count)
    stats.feature_loss = f_loss / static_cast<double>(stats.feature_count);
  if (stats.structural_count)
    stats.structural_loss = s_loss / static_cast<double>(stats.structural_count);
  if (stats.task_count)
    stats.task_loss = t_loss / static_cast<double>(stats.task_count);
  return stats;
}

template class Trainer<float>;
template class Trainer<double>;

// ----------------------------------------------------------------- loss svg

void write_loss_svg(const std::vector<EpochStats>& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TrainError("cannot write svg: " + path);
  const int w = 720, h = 400, pad = 40;
  double max_loss = 1e-9;
  for (const auto& s : stats)
    max_loss = std::max({max_loss, s.feature_loss, s.structural_loss, s.task_loss});
  auto x_of = [&](std::size_t i) {
    return pad + (w - 2 * pad) * static_cast<double>(i) /
                     std::max<std::size_t>(1, stats.size() - 1);
  };
  auto y_of = [&](double v) { return h - pad - (h - 2 * pad) * v / max_loss; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
      << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad
      << "\" y2=\"" << h - pad << "\" stroke=\"black\"/>\n";
  struct Series {
    const char* color;
    const char* name;
    double (*get)(const EpochStats&);
  };
  const Series series[] = {
      {"#c0392b", "feature", [](const EpochStats& s) { return s.feature_loss; }},
      {"#2980b9", "structural", [](const EpochStats& s) { return s.structural_loss; }},
      {"#27ae60", "task", [](const EpochStats& s) { return s.task_loss; }},
  };
  int label_y = pad;
  for (const auto& ser : series) {
    std::string points;
    bool any = false;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      double v = ser.get(stats[i]);
      if (v <= 0.0) continue;
      any = true;
      points += std::to_string(x_of(i)) + "," + std::to_string(y_of(v)) + " ";
    }
    if (!any) continue;
    out << "<polyline fill=\"none\" stroke=\"" << ser.color
        << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
    out << "<text x=\"" << w - pad - 90 << "\" y=\"" << label_y
        << "\" fill=\"" << ser.color << "\" font-size=\"12\">" << ser.name
        << "</text>\n";
    label_y += 14;
  }
  out << "</svg>\n";
}

}  // namespace plm::train
