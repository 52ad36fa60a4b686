#pragma once
// Unified vocabulary: text tokens, one token per graph node, and per-task
// class tokens (bookkeeping only; class embeddings live in the task heads).

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plm/hetgraph.hpp"

namespace plm::vocab {

using TokenId = std::int32_t;

struct VocabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pluggable text tokenizer. The shipped implementation is byte-level: one
// token per byte plus a BOS marker, total on any input.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<TokenId> tokenize(std::string_view text) const = 0;
  // Inverse of tokenize on its image; throws on ids outside the text range.
  virtual std::string detokenize(std::span<const TokenId> tokens) const = 0;
  virtual TokenId vocab_size() const = 0;  // V_text
  virtual std::string token_repr(TokenId id) const = 0;
};

class ByteTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kBos = 256;
  static constexpr TokenId kVocabSize = 257;

  std::vector<TokenId> tokenize(std::string_view text) const override;
  std::string detokenize(std::span<const TokenId> tokens) const override;
  TokenId vocab_size() const override { return kVocabSize; }
  std::string token_repr(TokenId id) const override;
};

struct TaskClasses {
  std::string name;
  std::int32_t n_classes = 0;
};

// [0, v_text) text | [v_text, v_text+N) nodes | class ranges per task.
struct VocabLayout {
  TokenId v_text = 0;
  std::int64_t n_members = 0;
  std::int64_t n_jobs = 0;
  std::vector<TaskClasses> tasks;

  static VocabLayout build(const Tokenizer& tok, const graph::HetGraph& g,
                           std::vector<TaskClasses> tasks);

  std::int64_t n_nodes() const { return n_members + n_jobs; }
  TokenId node_begin() const { return v_text; }
  TokenId node_end() const { return static_cast<TokenId>(v_text + n_nodes()); }
  TokenId member_begin() const { return v_text; }
  TokenId member_end() const { return static_cast<TokenId>(v_text + n_members); }
  TokenId job_begin() const { return member_end(); }
  TokenId job_end() const { return node_end(); }
  TokenId class_begin(std::size_t task_index) const;
  TokenId v_total() const;

  bool is_text(TokenId t) const { return t >= 0 && t < v_text; }
  bool is_node(TokenId t) const { return t >= node_begin() && t < node_end(); }

  TokenId node_token(graph::NodeId id) const;
  graph::NodeId node_of(TokenId t) const;

  std::size_t task_index(std::string_view task) const;  // throws on unknown
};

// View over the embedding tables backing composed node inputs. Rows are
// contiguous length-k slices owned by the parameter store.
template <typename T>
struct EmbeddingTablesView {
  const T* node;    // Z, one row per node (id order)
  const T* entity;  // E, row 0 = member, row 1 = job
  const T* pos;     // P, rows 0..max_hop
  std::int64_t k = 0;
  std::int64_t n_members = 0;
  std::int64_t n_nodes = 0;
  int max_hop = 0;
};

// z_i + e_type(i) + p_dist(i, center). Throws when i is not in the ego graph
// or its hop exceeds the positional table.
template <typename T>
std::vector<T> compose_node_embedding(const EmbeddingTablesView<T>& tables,
                                      graph::NodeId i,
                                      const graph::EgoGraph& ego) {
  int hop = ego.hop(i);  // throws when absent
  if (hop > tables.max_hop)
    throw VocabError("hop " + std::to_string(hop) +
                     " exceeds positional table for node " + std::to_string(i));
  if (i < 1 || static_cast<std::int64_t>(i) > tables.n_nodes)
    throw VocabError("node " + std::to_string(i) + " outside embedding table");
  const T* z = tables.node + static_cast<std::int64_t>(i - 1) * tables.k;
  const T* e = tables.entity +
               (static_cast<std::int64_t>(i) <= tables.n_members ? 0 : tables.k);
  const T* p = tables.pos + static_cast<std::int64_t>(hop) * tables.k;
  std::vector<T> out(tables.k);
  for (std::int64_t c = 0; c < tables.k; ++c) out[c] = z[c] + e[c] + p[c];
  return out;
}

}  // namespace plm::vocab
