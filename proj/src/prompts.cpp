#include "plm/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "json.hpp"

namespace plm::prompts {

using graph::EntityType;
using graph::NodeId;
using graph::RelationType;
using vocab::TokenId;

// ----------------------------------------------------------------- templates
// All fixed instruction/question strings live here so they can be audited in
// one place.

namespace text {

constexpr std::string_view instruction = "Given an ego-network in a job marketplace: ";
constexpr std::string_view ego_to_question = ", ";

// Feature modeling: "the <feature> of the center <entity> <node> is: "
constexpr std::string_view feature_q_head = "the ";
constexpr std::string_view feature_q_mid = " of the center ";
constexpr std::string_view feature_q_tail = " is: ";

// One-hop relation questions, keyed by metapath abbreviation. The node token
// of the center is spliced between head and tail.
struct RelationQuestion {
  std::string_view head;
  std::string_view tail;
};
inline RelationQuestion one_hop_question(std::string_view abbrev) {
  if (abbrev == "UU") return {"the center member ", " follows these members: "};
  if (abbrev == "UI") return {"the center member ", " is interested in these jobs: "};
  if (abbrev == "IU") return {"the center job ", " interests these members: "};
  throw graph::GraphError("no one-hop question for metapath " + std::string(abbrev));
}

// Final-relation questions of the two-hop prompts, following the listed
// intermediates.
inline std::string_view two_hop_question(std::string_view abbrev) {
  if (abbrev == "UIU")
    return " the following users are also interested in some of these jobs: ";
  if (abbrev == "UUI")
    return " the followed members are interested in the following jobs: ";
  if (abbrev == "IUI")
    return " these members are also interested in the following jobs: ";
  if (abbrev == "IUU")
    return " these members follow the following members: ";
  throw graph::GraphError("no two-hop question for metapath " + std::string(abbrev));
}

// Link task: shown-neighbor segment and closing question per relation.
struct LinkText {
  std::string_view shown_head;
  std::string_view shown_tail;
  std::string_view question;
};
inline LinkText link_text(RelationType rel) {
  if (rel == RelationType::member_member)
    return {"The center ", " currently follows: ",
            " The member may be interested following in these members: "};
  return {"The center ", " is currently interested in: ",
          " The member may be interested in these jobs: "};
}

inline std::string feature_phrase(std::string_view key) {
  if (key == "bio") return "biography";
  if (key == "jd") return "job description";
  return std::string(key);
}

inline std::string_view entity_word(EntityType t) {
  return t == EntityType::member ? "member" : "job";
}

}  // namespace text

TokenRange loss_space_range(LossSpace space, const vocab::VocabLayout& layout) {
  switch (space) {
    case LossSpace::text_only:
      return {0, layout.v_text};
    case LossSpace::member_only:
      return {layout.member_begin(), layout.n_members};
    case LossSpace::job_only:
      return {layout.job_begin(), layout.n_jobs};
  }
  return {};
}

// ----------------------------------------------------------------- assembler

struct PromptBuilder::Assembler {
  const PromptBuilder& b;
  PromptInstance out;

  explicit Assembler(const PromptBuilder& builder, const graph::EgoGraph& ego,
                     NodeId center)
      : b(builder) {
    out.center = center;
    out.ego = ego;
  }

  void text(std::string_view s, SegmentTag tag, NodeId assoc = 0) {
    for (TokenId t : b.tok_.tokenize(s)) {
      out.tokens.push_back(t);
      out.node_assoc.push_back(assoc);
      out.embed_hop.push_back(-1);
      out.segments.push_back(tag);
    }
  }

  void node(NodeId id, int hop, SegmentTag tag) {
    out.tokens.push_back(b.layout_.node_token(id));
    out.node_assoc.push_back(id);
    out.embed_hop.push_back(static_cast<std::int16_t>(hop));
    out.segments.push_back(tag);
  }

  // Ego nodes in canonical order: ascending hop, members before jobs,
  // ascending id.
  void ego_segment() {
    std::vector<std::pair<NodeId, int>> order = out.ego.nodes;
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& bn) {
      if (a.second != bn.second) return a.second < bn.second;
      bool aj = b.g_.type_of(a.first) == EntityType::job;
      bool bj = b.g_.type_of(bn.first) == EntityType::job;
      if (aj != bj) return !aj;
      return a.first < bn.first;
    });
    for (const auto& [id, hop] : order) node(id, hop, SegmentTag::ego_graph);
  }

  void begin_completion(LossSpace space) {
    out.completion_begin = out.size();
    out.loss_space = space;
  }

  void completion_text(std::string_view s, NodeId assoc) {
    if (out.completion_begin == 0 && out.size() > 0)
      throw graph::GraphError("completion before prompt");
    text(s, SegmentTag::completion, assoc);
  }

  void completion_node(NodeId id, int hop) {
    node(id, hop, SegmentTag::completion);
  }

  bool fits() const { return out.size() <= b.opt_.max_tokens; }

  PromptInstance take() { return std::move(out); }
};

// ------------------------------------------------------------------ builders

std::optional<PromptInstance> PromptBuilder::feature_prompt(
    const graph::EgoGraph& ego, NodeId k, std::string_view feature) const {
  const std::string* value = g_.feature(k, feature);
  if (!value || value->empty()) return std::nullopt;

  Assembler a(*this, ego, k);
  a.text(text::instruction, SegmentTag::instruction);
  a.ego_segment();
  a.text(text::ego_to_question, SegmentTag::question);
  a.text(text::feature_q_head, SegmentTag::question);
  a.text(text::feature_phrase(feature), SegmentTag::question);
  a.text(text::feature_q_mid, SegmentTag::question);
  a.text(text::entity_word(g_.type_of(k)), SegmentTag::question);
  a.text(" ", SegmentTag::question);
  a.node(k, 0, SegmentTag::question);
  a.text(text::feature_q_tail, SegmentTag::question);

  a.begin_completion(LossSpace::text_only);
  // Truncate the completion rather than overflow the context window.
  std::string body = *value;
  std::int64_t room = opt_.max_tokens - a.out.size();
  if (room <= 0) return std::nullopt;
  if (static_cast<std::int64_t>(body.size()) > room) body.resize(room);
  a.completion_text(body, k);
  return a.take();
}

namespace {

LossSpace space_for(EntityType t) {
  return t == EntityType::member ? LossSpace::member_only : LossSpace::job_only;
}

}  // namespace

std::optional<PromptInstance> PromptBuilder::first_order_prompt(
    const graph::EgoGraph& ego, NodeId k, const graph::Metapath& phi,
    std::uint64_t seed) const {
  if (phi.length() != 1)
    throw graph::GraphError("first_order_prompt needs a one-hop metapath");
  if (!phi.compatible_with(g_.type_of(k)))
    throw graph::GraphError("metapath " + phi.abbrev + " incompatible with node " +
                            std::to_string(k));

  std::vector<NodeId> eligible;
  for (NodeId nb : graph::hop_neighbors(g_, k, phi.entities[0], phi.entities[1]))
    if (!ego.contains(nb)) eligible.push_back(nb);
  if (eligible.empty()) return std::nullopt;

  Rng rng(seed);
  auto ends = rng.sample_without_replacement(std::move(eligible),
                                             static_cast<std::size_t>(opt_.n_end));

  Assembler a(*this, ego, k);
  a.text(text::instruction, SegmentTag::instruction);
  a.ego_segment();
  a.text(text::ego_to_question, SegmentTag::question);
  auto q = text::one_hop_question(phi.abbrev);
  a.text(q.head, SegmentTag::question);
  a.node(k, 0, SegmentTag::question);
  a.text(q.tail, SegmentTag::question);

  a.begin_completion(space_for(phi.target()));
  for (NodeId end : ends) a.completion_node(end, 1);
  if (!a.fits()) return std::nullopt;
  return a.take();
}

std::optional<PromptInstance> PromptBuilder::higher_order_prompt(
    const graph::EgoGraph& ego, NodeId k, const graph::Metapath& phi,
    std::uint64_t seed) const {
  if (phi.length() != 2)
    throw graph::GraphError("higher_order_prompt needs a two-hop metapath");
  if (phi.abbrev != "UIU" && phi.abbrev != "UUI" && phi.abbrev != "IUI" &&
      phi.abbrev != "IUU")
    throw graph::GraphError("unsupported two-hop metapath " + phi.abbrev);
  if (!phi.compatible_with(g_.type_of(k)))
    throw graph::GraphError("metapath " + phi.abbrev + " incompatible with node " +
                            std::to_string(k));

  auto triple = graph::sample_metapath_triple(g_, k, phi, opt_.n_mid, opt_.n_end,
                                              ego, seed);
  if (!triple || triple->ends.empty()) return std::nullopt;

  Assembler a(*this, ego, k);
  a.text(text::instruction, SegmentTag::instruction);
  a.ego_segment();
  a.text(text::ego_to_question, SegmentTag::question);

  // Intermediate relation segment: first-hop question plus sampled
  // intermediates as node tokens.
  std::string hop1(phi.abbrev.substr(0, 2));
  auto q1 = text::one_hop_question(hop1);
  a.text(q1.head, SegmentTag::intermediate_relation);
  a.node(k, 0, SegmentTag::intermediate_relation);
  a.text(q1.tail, SegmentTag::intermediate_relation);
  for (NodeId mid : triple->intermediates)
    a.node(mid, 1, SegmentTag::intermediate_relation);

  a.text(text::two_hop_question(phi.abbrev), SegmentTag::question);

  a.begin_completion(space_for(phi.target()));
  for (NodeId end : triple->ends) a.completion_node(end, 2);
  if (!a.fits()) return std::nullopt;
  return a.take();
}

PromptInstance PromptBuilder::node_task_prompt(const graph::EgoGraph& ego,
                                               NodeId k,
                                               const TaskSpec& task) const {
  Assembler a(*this, ego, k);
  a.text(text::instruction, SegmentTag::instruction);
  a.ego_segment();
  a.text(text::ego_to_question, SegmentTag::question);

  const std::string* value =
      task.feature.empty() ? nullptr : g_.feature(k, task.feature);
  if (value && !value->empty()) {
    a.text(text::feature_q_head, SegmentTag::feature);
    a.text(text::feature_phrase(task.feature), SegmentTag::feature);
    a.text(text::feature_q_mid, SegmentTag::feature);
    a.text(text::entity_word(g_.type_of(k)), SegmentTag::feature);
    a.text(" ", SegmentTag::feature);
    a.node(k, 0, SegmentTag::feature);
    a.text(text::feature_q_tail, SegmentTag::feature);
    std::string body = *value;
    std::int64_t room = opt_.max_tokens - a.out.size() -
                        static_cast<std::int64_t>(task.question.size()) - 2;
    if (room < 0) room = 0;
    if (static_cast<std::int64_t>(body.size()) > room) body.resize(room);
    a.text(body, SegmentTag::feature, k);
    a.text(" ", SegmentTag::feature);
  }
  a.text(task.question, SegmentTag::question);
  a.out.completion_begin = a.out.size();
  return a.take();
}

std::optional<PromptBuilder::ObservedSplit> PromptBuilder::split_observed(
    std::span<const NodeId> observed, double mask_ratio, std::uint64_t seed) {
  if (observed.size() < 2) return std::nullopt;
  std::vector<NodeId> pool(observed.begin(), observed.end());
  Rng rng(seed);
  rng.shuffle(pool);
  std::size_t n_held = static_cast<std::size_t>(
      std::llround(static_cast<double>(pool.size()) * mask_ratio));
  n_held = std::clamp<std::size_t>(n_held, 1, pool.size() - 1);
  ObservedSplit split;
  split.heldout.assign(pool.begin(), pool.begin() + n_held);
  split.shown.assign(pool.begin() + n_held, pool.end());
  std::sort(split.heldout.begin(), split.heldout.end());
  std::sort(split.shown.begin(), split.shown.end());
  return split;
}

PromptInstance PromptBuilder::link_task_prompt(
    const graph::EgoGraph& ego, NodeId k, RelationType rel,
    std::span<const NodeId> shown) const {
  Assembler a(*this, ego, k);
  a.text(text::instruction, SegmentTag::instruction);
  a.ego_segment();
  a.text(text::ego_to_question, SegmentTag::question);
  auto lt = text::link_text(rel);
  a.text(lt.shown_head, SegmentTag::intermediate_relation);
  a.node(k, 0, SegmentTag::intermediate_relation);
  a.text(lt.shown_tail, SegmentTag::intermediate_relation);
  for (NodeId s : shown) a.node(s, 1, SegmentTag::intermediate_relation);
  a.text(lt.question, SegmentTag::question);
  a.out.completion_begin = a.out.size();
  return a.take();
}

// ---------------------------------------------------------------- bias matrix

BiasMatrix attention_bias_matrix(const PromptInstance& instance,
                                 const graph::HetGraph& g,
                                 const graph::MetapathSet& phi_set,
                                 bool include_completion_keys) {
  BiasMatrix m;
  m.row_begin = instance.completion_begin;
  m.n_rows = instance.completion_len();
  m.n_cols = instance.size();
  m.psi_size = static_cast<std::uint8_t>(phi_set.psi_size());
  // Task prompts carry no completion; their generating position is the final
  // one (the head reads it), associated with the center node like the
  // feature-modeling completions are.
  bool head_readout = m.n_rows == 0 && instance.size() > 0 && instance.center != 0;
  if (head_readout) {
    m.row_begin = instance.size() - 1;
    m.n_rows = 1;
  }
  m.psi.assign(static_cast<std::size_t>(m.n_rows * m.n_cols), 0);
  if (m.n_rows == 0) return m;

  std::unordered_map<std::uint64_t, std::uint16_t> memo;
  auto psi_of = [&](NodeId j, NodeId j2) {
    std::uint64_t key = (static_cast<std::uint64_t>(j) << 32) | j2;
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::uint16_t bits = graph::compute_proximity(g, j, j2, phi_set).bits;
    memo.emplace(key, bits);
    return bits;
  };

  for (std::int64_t r = 0; r < m.n_rows; ++r) {
    std::int64_t t = m.row_begin + r;
    NodeId j = head_readout ? instance.center : instance.node_assoc[t];
    if (j == 0) continue;
    for (std::int64_t c = 0; c < m.n_cols; ++c) {
      if (instance.node_assoc[c] == 0) continue;
      if (instance.segments[c] == SegmentTag::completion &&
          !include_completion_keys)
        continue;
      // Keys must be node tokens; text tokens associated with a node (the
      // feature-modeling completion) carry no bias. Node tokens are exactly
      // the positions with a positional-row annotation.
      if (instance.embed_hop[c] < 0) continue;
      m.psi[r * m.n_cols + c] = psi_of(j, instance.node_assoc[c]);
    }
  }
  return m;
}

std::string debug_dump(const PromptInstance& instance,
                       const vocab::Tokenizer& tok,
                       const vocab::VocabLayout& layout,
                       std::string_view kind) {
  static const char* seg_names[] = {"instruction", "ego_graph",
                                    "intermediate_relation", "feature",
                                    "question", "completion"};
  nlohmann::json j;
  j["kind"] = std::string(kind);
  j["center"] = instance.center;
  j["n_tokens"] = instance.size();
  j["completion_begin"] = instance.completion_begin;
  if (instance.loss_space) {
    static const char* space_names[] = {"text", "member", "job"};
    j["loss_space"] = space_names[static_cast<int>(*instance.loss_space)];
  }
  nlohmann::json toks = nlohmann::json::array();
  for (std::int64_t i = 0; i < instance.size(); ++i) {
    nlohmann::json t;
    vocab::TokenId id = instance.tokens[i];
    t["id"] = id;
    if (layout.is_node(id)) {
      graph::NodeId n = layout.node_of(id);
      t["repr"] = "<node_" + std::to_string(n) + ">";
    } else {
      t["repr"] = tok.token_repr(id);
    }
    if (instance.node_assoc[i] != 0) t["node"] = instance.node_assoc[i];
    if (instance.embed_hop[i] >= 0) t["hop"] = instance.embed_hop[i];
    t["segment"] = seg_names[static_cast<int>(instance.segments[i])];
    toks.push_back(std::move(t));
  }
  j["tokens"] = std::move(toks);
  nlohmann::json targets = nlohmann::json::array();
  for (vocab::TokenId t : instance.targets()) targets.push_back(t);
  j["targets"] = std::move(targets);
  return j.dump();
}

}  // namespace plm::prompts
