#include "plm/vocab.hpp"

#include <cstdio>

namespace plm::vocab {

std::vector<TokenId> ByteTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (unsigned char c : text) out.push_back(static_cast<TokenId>(c));
  return out;
}

std::string ByteTokenizer::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) {
    if (t < 0 || t >= kVocabSize)
      throw VocabError("token " + std::to_string(t) + " is not a text token");
    if (t == kBos) continue;  // marker, not produced by tokenize
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

std::string ByteTokenizer::token_repr(TokenId id) const {
  if (id == kBos) return "<bos>";
  if (id >= 0 && id < 256) {
    unsigned char c = static_cast<unsigned char>(id);
    if (c >= 0x20 && c < 0x7f) return std::string(1, static_cast<char>(c));
    char buf[8];
    std::snprintf(buf, sizeof(buf), "\\x%02x", c);
    return buf;
  }
  return "<invalid>";
}

VocabLayout VocabLayout::build(const Tokenizer& tok, const graph::HetGraph& g,
                               std::vector<TaskClasses> tasks) {
  VocabLayout layout;
  layout.v_text = tok.vocab_size();
  layout.n_members = g.n_members;
  layout.n_jobs = g.n_jobs;
  layout.tasks = std::move(tasks);
  return layout;
}

TokenId VocabLayout::class_begin(std::size_t task_index) const {
  TokenId begin = node_end();
  for (std::size_t i = 0; i < task_index; ++i) begin += tasks[i].n_classes;
  return begin;
}

TokenId VocabLayout::v_total() const {
  TokenId total = node_end();
  for (const auto& t : tasks) total += t.n_classes;
  return total;
}

TokenId VocabLayout::node_token(graph::NodeId id) const {
  if (id < 1 || static_cast<std::int64_t>(id) > n_nodes())
    throw VocabError("unknown node id " + std::to_string(id));
  return static_cast<TokenId>(v_text + id - 1);
}

graph::NodeId VocabLayout::node_of(TokenId t) const {
  if (!is_node(t))
    throw VocabError("token " + std::to_string(t) + " is not a node token");
  return static_cast<graph::NodeId>(t - v_text + 1);
}

std::size_t VocabLayout::task_index(std::string_view task) const {
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].name == task) return i;
  throw VocabError("unknown task \"" + std::string(task) + "\"");
}

}  // namespace plm::vocab
