#include "plm/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "plm/rng.hpp"

namespace plm::nn {

using graph::EntityType;
using graph::NodeId;
using prompts::BiasMatrix;
using prompts::PromptInstance;
using vocab::TokenId;

void TransformerConfig::validate() const {
  if (dim % heads != 0)
    throw TensorError("model dim must be divisible by head count");
  if (layers < 1 || heads < 1 || dim < heads)
    throw TensorError("degenerate transformer config");
  if (psi_size < 1 || psi_size > 16) throw TensorError("psi size out of range");
}

const char* param_kind_name(ParamKind k) {
  switch (k) {
    case ParamKind::backbone: return "backbone";
    case ParamKind::node_embed: return "node_embed";
    case ParamKind::entity_embed: return "entity_embed";
    case ParamKind::pos_embed: return "pos_embed";
    case ParamKind::attn_bias: return "attn_bias";
    case ParamKind::class_head: return "class_head";
    case ParamKind::link_head: return "link_head";
  }
  return "?";
}

// ------------------------------------------------------------ parameter store

template <typename T>
void ParameterStore<T>::register_entries() {
  entries.clear();
  auto put = [this](std::string name, ParamKind kind, Tensor<T>& t) {
    t.ensure_grad();
    entries.push_back(Entry{std::move(name), kind, &t, false});
  };
  put("text_embed", ParamKind::backbone, text_embed);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::string p = "layer" + std::to_string(i) + ".";
    Layer& l = layers[i];
    put(p + "ln1_g", ParamKind::backbone, l.ln1_g);
    put(p + "ln1_b", ParamKind::backbone, l.ln1_b);
    put(p + "qkv_w", ParamKind::backbone, l.qkv_w);
    put(p + "qkv_b", ParamKind::backbone, l.qkv_b);
    put(p + "attn_out_w", ParamKind::backbone, l.attn_out_w);
    put(p + "attn_out_b", ParamKind::backbone, l.attn_out_b);
    put(p + "ln2_g", ParamKind::backbone, l.ln2_g);
    put(p + "ln2_b", ParamKind::backbone, l.ln2_b);
    put(p + "fc_w", ParamKind::backbone, l.fc_w);
    put(p + "fc_b", ParamKind::backbone, l.fc_b);
    put(p + "proj_w", ParamKind::backbone, l.proj_w);
    put(p + "proj_b", ParamKind::backbone, l.proj_b);
  }
  put("lnf_g", ParamKind::backbone, lnf_g);
  put("lnf_b", ParamKind::backbone, lnf_b);
  put("node_embed", ParamKind::node_embed, node_embed);
  put("entity_embed", ParamKind::entity_embed, entity_embed);
  put("pos_embed", ParamKind::pos_embed, pos_embed);
  put("attn_bias", ParamKind::attn_bias, attn_bias);
  for (std::size_t t = 0; t < class_embed.size(); ++t)
    put("class_embed." + layout.tasks[t].name, ParamKind::class_head,
        class_embed[t]);
  if (!cfg.tie_heads) put("node_head", ParamKind::link_head, node_head);
}

template <typename T>
void ParameterStore<T>::build(const vocab::VocabLayout& lay,
                              const TransformerConfig& c, std::uint64_t seed) {
  c.validate();
  cfg = c;
  layout = lay;
  std::int64_t d = cfg.dim, f = cfg.ffn_dim;

  text_embed.resize({layout.v_text, d});
  layers.assign(static_cast<std::size_t>(cfg.layers), Layer{});
  for (auto& l : layers) {
    l.ln1_g.resize({d});
    l.ln1_b.resize({d});
    l.qkv_w.resize({d, 3 * d});
    l.qkv_b.resize({3 * d});
    l.attn_out_w.resize({d, d});
    l.attn_out_b.resize({d});
    l.ln2_g.resize({d});
    l.ln2_b.resize({d});
    l.fc_w.resize({d, f});
    l.fc_b.resize({f});
    l.proj_w.resize({f, d});
    l.proj_b.resize({d});
  }
  lnf_g.resize({d});
  lnf_b.resize({d});
  node_embed.resize({layout.n_nodes(), d});
  entity_embed.resize({2, d});
  pos_embed.resize({cfg.max_hop + 1, d});
  attn_bias.resize({cfg.bias_per_layer ? cfg.layers : 1, cfg.psi_size});
  class_embed.clear();
  for (const auto& task : layout.tasks) {
    class_embed.emplace_back();
    class_embed.back().resize({task.n_classes, d});
  }
  if (!cfg.tie_heads) node_head.resize({layout.n_nodes(), d});

  register_entries();

  Rng rng(derive_seed(seed, 0, 0, "param_init"));
  for (Entry& e : entries) {
    bool is_gain = e.name.ends_with("ln1_g") || e.name.ends_with("ln2_g") ||
                   e.name == "lnf_g";
    bool is_zero = e.name.ends_with("_b") || e.kind == ParamKind::attn_bias;
    for (T& v : e.tensor->data) {
      if (is_gain)
        v = T(1);
      else if (is_zero)
        v = T(0);
      else
        v = static_cast<T>(rng.normal(0.0, 0.02));
    }
  }
}

template <typename T>
typename ParameterStore<T>::Entry* ParameterStore<T>::find(std::string_view name) {
  for (Entry& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

template <typename T>
void ParameterStore<T>::set_frozen(ParamKind kind, bool frozen) {
  for (Entry& e : entries)
    if (e.kind == kind) e.frozen = frozen;
}

template <typename T>
void ParameterStore<T>::freeze_all_except(const std::vector<ParamKind>& trainable) {
  for (Entry& e : entries)
    e.frozen = std::find(trainable.begin(), trainable.end(), e.kind) ==
               trainable.end();
}

template <typename T>
void ParameterStore<T>::zero_grads() {
  for (Entry& e : entries) e.tensor->zero_grad();
}

// ----------------------------------------------------------------- tape ops

namespace {

// Input embeddings: text rows from the text table, node tokens composed as
// z + e_type + p_hop per the per-token hop annotation.
template <typename T>
Tensor<T>* embed_instance(Tape<T>& tape, ParameterStore<T>& p,
                          const PromptInstance& inst) {
  std::int64_t n = inst.size(), d = p.cfg.dim;
  Tensor<T>* x = tape.make({n, d});
  for (std::int64_t r = 0; r < n; ++r) {
    TokenId id = inst.tokens[r];
    T* xr = x->row(r);
    if (p.layout.is_text(id)) {
      const T* src = p.text_embed.row(id);
      std::copy(src, src + d, xr);
    } else if (p.layout.is_node(id)) {
      NodeId node = p.layout.node_of(id);
      int hop = inst.embed_hop[r];
      if (hop < 0 || hop > p.cfg.max_hop)
        throw TensorError("node token without valid hop annotation");
      int ent = p.layout.node_of(id) <= static_cast<NodeId>(p.layout.n_members)
                    ? 0
                    : 1;
      const T* z = p.node_embed.row(node - 1);
      const T* e = p.entity_embed.row(ent);
      const T* ph = p.pos_embed.row(hop);
      for (std::int64_t c = 0; c < d; ++c) xr[c] = z[c] + e[c] + ph[c];
    } else {
      throw TensorError("class tokens are head parameters, not inputs");
    }
  }
  tape.record([&p, x, &inst, n, d] {
    for (std::int64_t r = 0; r < n; ++r) {
      TokenId id = inst.tokens[r];
      const T* gxr = x->grow(r);
      if (p.layout.is_text(id)) {
        kernels::axpy(p.text_embed.grow(id), gxr, T(1), d);
      } else {
        NodeId node = p.layout.node_of(id);
        int hop = inst.embed_hop[r];
        int ent = node <= static_cast<NodeId>(p.layout.n_members) ? 0 : 1;
        kernels::axpy(p.node_embed.grow(node - 1), gxr, T(1), d);
        kernels::axpy(p.entity_embed.grow(ent), gxr, T(1), d);
        kernels::axpy(p.pos_embed.grow(hop), gxr, T(1), d);
      }
    }
  });
  return x;
}

template <typename T>
struct AttentionState {
  std::vector<T> q, k, v;  // [H, T, dh] repacked
  std::vector<T> probs;    // [H, T, T], causal rows
};

// Fused causal multi-head attention with the proximity bias added to the
// pre-softmax scores of completion rows attending to node-token keys.
template <typename T>
Tensor<T>* causal_attention(Tape<T>& tape, Tensor<T>* qkv, int heads,
                            const BiasMatrix* bias, Tensor<T>* b_tensor,
                            std::int64_t b_row, std::vector<T>* scores_out) {
  std::int64_t n = qkv->rows();
  std::int64_t d3 = qkv->cols();
  std::int64_t d = d3 / 3;
  std::int64_t dh = d / heads;
  T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const T* b_vec = b_tensor->row(b_row);

  auto st = std::make_shared<AttentionState<T>>();
  st->q.resize(heads * n * dh);
  st->k.resize(heads * n * dh);
  st->v.resize(heads * n * dh);
  st->probs.assign(heads * n * n, T(0));
  for (std::int64_t t = 0; t < n; ++t) {
    const T* src = qkv->row(t);
    for (int h = 0; h < heads; ++h) {
      std::copy(src + h * dh, src + (h + 1) * dh, &st->q[(h * n + t) * dh]);
      std::copy(src + d + h * dh, src + d + (h + 1) * dh,
                &st->k[(h * n + t) * dh]);
      std::copy(src + 2 * d + h * dh, src + 2 * d + (h + 1) * dh,
                &st->v[(h * n + t) * dh]);
    }
  }

  auto bias_at = [bias, b_vec](std::int64_t t, std::int64_t c) -> T {
    std::uint16_t bits = bias->at(t - bias->row_begin, c);
    if (!bits) return T(0);
    T s = T(0);
    for (int i = 0; bits; ++i, bits >>= 1)
      if (bits & 1u) s += b_vec[i];
    return s;
  };
  bool any_bias = bias && bias->n_rows > 0;

  if (scores_out) scores_out->assign(heads * n * n, T(0));
  Tensor<T>* out = tape.make({n, d});
  for (int h = 0; h < heads; ++h) {
    const T* qh = &st->q[h * n * dh];
    const T* kh = &st->k[h * n * dh];
    const T* vh = &st->v[h * n * dh];
    T* ph = &st->probs[h * n * n];
    for (std::int64_t t = 0; t < n; ++t) {
      T* row = ph + t * n;
      kernels::matmul_nt(row, qh + t * dh, kh, 1, dh, t + 1);
      kernels::scale(row, scale, t + 1);
      if (any_bias && t >= bias->row_begin)
        for (std::int64_t c = 0; c <= t; ++c) row[c] += bias_at(t, c);
      if (scores_out)
        std::copy(row, row + t + 1, scores_out->data() + h * n * n + t * n);
      kernels::softmax(row, t + 1);
    }
    // out_h = probs * V; masked suffix entries are zero and skipped.
    std::vector<T> oh(n * dh, T(0));
    kernels::matmul(oh.data(), ph, vh, n, n, dh);
    for (std::int64_t t = 0; t < n; ++t)
      std::copy(&oh[t * dh], &oh[(t + 1) * dh], out->row(t) + h * dh);
  }

  tape.record([&, st, qkv, out, b_tensor, bias, heads, n, d, dh, scale, b_row,
               any_bias] {
    std::vector<T> doh(n * dh), dph(n * n), dsh(n * n);
    std::vector<T> dqh(n * dh), dkh(n * dh), dvh(n * dh);
    T* db = b_tensor->grow(b_row);
    for (int h = 0; h < heads; ++h) {
      const T* qh = &st->q[h * n * dh];
      const T* kh = &st->k[h * n * dh];
      const T* vh = &st->v[h * n * dh];
      const T* ph = &st->probs[h * n * n];
      for (std::int64_t t = 0; t < n; ++t)
        std::copy(out->grow(t) + h * dh, out->grow(t) + (h + 1) * dh,
                  &doh[t * dh]);
      std::fill(dph.begin(), dph.end(), T(0));
      std::fill(dvh.begin(), dvh.end(), T(0));
      std::fill(dqh.begin(), dqh.end(), T(0));
      std::fill(dkh.begin(), dkh.end(), T(0));
      // dP = dO V^T ; dV = P^T dO
      kernels::matmul_nt(dph.data(), doh.data(), vh, n, dh, n);
      kernels::matmul_tn(dvh.data(), ph, doh.data(), n, n, dh);
      // softmax backward per causal row
      for (std::int64_t t = 0; t < n; ++t) {
        const T* prow = ph + t * n;
        const T* dprow = dph.data() + t * n;
        T inner = kernels::dot(prow, dprow, t + 1);
        T* dsrow = dsh.data() + t * n;
        for (std::int64_t c = 0; c <= t; ++c)
          dsrow[c] = prow[c] * (dprow[c] - inner);
        std::fill(dsrow + t + 1, dsrow + n, T(0));
        if (any_bias && t >= bias->row_begin) {
          for (std::int64_t c = 0; c <= t; ++c) {
            std::uint16_t bits = bias->at(t - bias->row_begin, c);
            for (int i = 0; bits; ++i, bits >>= 1)
              if (bits & 1u) db[i] += dsrow[c];
          }
        }
      }
      // dQ = (dS*scale) K ; dK = (dS*scale)^T Q
      kernels::scale(dsh.data(), scale, n * n);
      kernels::matmul(dqh.data(), dsh.data(), kh, n, n, dh);
      kernels::matmul_tn(dkh.data(), dsh.data(), qh, n, n, dh);
      for (std::int64_t t = 0; t < n; ++t) {
        T* dst = qkv->grow(t);
        kernels::axpy(dst + h * dh, &dqh[t * dh], T(1), dh);
        kernels::axpy(dst + d + h * dh, &dkh[t * dh], T(1), dh);
        kernels::axpy(dst + 2 * d + h * dh, &dvh[t * dh], T(1), dh);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T>* gather_rows(Tape<T>& tape, Tensor<T>* x,
                       std::vector<std::int64_t> idx) {
  std::int64_t d = x->cols();
  Tensor<T>* y = tape.make({static_cast<std::int64_t>(idx.size()), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const T* src = x->row(idx[r]);
    std::copy(src, src + d, y->row(static_cast<std::int64_t>(r)));
  }
  tape.record([x, y, idx = std::move(idx), d] {
    for (std::size_t r = 0; r < idx.size(); ++r)
      kernels::axpy(x->grow(idx[r]), y->grow(static_cast<std::int64_t>(r)),
                    T(1), d);
  });
  return y;
}

// logits[r, c] = <h[r], table[row_begin + c]>; gradients flow into both the
// hidden rows and the table slice (which is how head tying works).
template <typename T>
Tensor<T>* rows_times_table(Tape<T>& tape, Tensor<T>* h, Tensor<T>* table,
                            std::int64_t row_begin, std::int64_t n_rows) {
  std::int64_t r = h->rows(), d = h->cols();
  Tensor<T>* logits = tape.make({r, n_rows});
  kernels::matmul_nt(logits->data.data(), h->data.data(), table->row(row_begin),
                     r, d, n_rows);
  tape.record([h, table, logits, row_begin, n_rows, r, d] {
    kernels::matmul(h->grad.data(), logits->grad.data(), table->row(row_begin),
                    r, n_rows, d);
    // dTable[c,:] += sum_r dlogits[r,c] * h[r,:]
    kernels::matmul_tn(table->grow(row_begin), logits->grad.data(),
                       h->data.data(), n_rows, r, d);
  });
  return logits;
}

// Mean over rows of the mean negative log-softmax of each row's target set.
template <typename T>
Tensor<T>* ce_mean(Tape<T>& tape, Tensor<T>* logits,
                   std::vector<std::vector<std::int64_t>> targets) {
  std::int64_t r = logits->rows(), c = logits->cols();
  if (static_cast<std::int64_t>(targets.size()) != r)
    throw TensorError("ce_mean target rows mismatch");
  auto probs = std::make_shared<std::vector<T>>(logits->data);
  Tensor<T>* loss = tape.make({1});
  T acc = T(0);
  for (std::int64_t i = 0; i < r; ++i) {
    T* row = probs->data() + i * c;
    kernels::softmax(row, c);
    if (targets[i].empty()) throw TensorError("ce_mean row without targets");
    T row_loss = T(0);
    for (std::int64_t t : targets[i]) {
      if (t < 0 || t >= c) throw TensorError("ce_mean target out of range");
      row_loss -= std::log(row[t]);
    }
    acc += row_loss / static_cast<T>(targets[i].size());
  }
  loss->data[0] = acc / static_cast<T>(r);
  tape.record([logits, loss, probs, targets = std::move(targets), r, c] {
    T g = loss->grad[0] / static_cast<T>(r);
    for (std::int64_t i = 0; i < r; ++i) {
      const T* prow = probs->data() + i * c;
      T* drow = logits->grow(i);
      kernels::axpy(drow, prow, g, c);
      T w = g / static_cast<T>(targets[i].size());
      for (std::int64_t t : targets[i]) drow[t] -= w;
    }
  });
  return loss;
}

}  // namespace

// ------------------------------------------------------------------- model

template <typename T>
ForwardResult<T> Model<T>::forward(Tape<T>& tape, const PromptInstance& inst,
                                   const BiasMatrix* bias, bool keep_scores) {
  const TransformerConfig& cfg = p_.cfg;
  if (inst.size() > cfg.context)
    throw TensorError("prompt of " + std::to_string(inst.size()) +
                      " tokens exceeds context " + std::to_string(cfg.context));
  if (inst.size() == 0) throw TensorError("empty prompt");
  if (bias && bias->psi_size != cfg.psi_size)
    throw TensorError("bias matrix psi size mismatch");

  ForwardResult<T> result;
  if (keep_scores) result.scores.resize(cfg.layers);

  Tensor<T>* x = embed_instance(tape, p_, inst);
  for (int l = 0; l < cfg.layers; ++l) {
    auto& lay = p_.layers[l];
    Tensor<T>* h1 = layer_norm(tape, x, &lay.ln1_g, &lay.ln1_b);
    Tensor<T>* qkv = add_row_bias(tape, matmul(tape, h1, &lay.qkv_w), &lay.qkv_b);
    std::int64_t b_row = cfg.bias_per_layer ? l : 0;
    Tensor<T>* att =
        causal_attention(tape, qkv, cfg.heads, bias, &p_.attn_bias, b_row,
                         keep_scores ? &result.scores[l] : nullptr);
    Tensor<T>* proj =
        add_row_bias(tape, matmul(tape, att, &lay.attn_out_w), &lay.attn_out_b);
    x = add(tape, x, proj);
    Tensor<T>* h2 = layer_norm(tape, x, &lay.ln2_g, &lay.ln2_b);
    Tensor<T>* fc = add_row_bias(tape, matmul(tape, h2, &lay.fc_w), &lay.fc_b);
    Tensor<T>* act = gelu(tape, fc);
    Tensor<T>* ffn =
        add_row_bias(tape, matmul(tape, act, &lay.proj_w), &lay.proj_b);
    x = add(tape, x, ffn);
  }
  result.hidden = layer_norm(tape, x, &p_.lnf_g, &p_.lnf_b);
  return result;
}

template <typename T>
Tensor<T>* Model<T>::lm_loss(Tape<T>& tape, const PromptInstance& inst,
                             const BiasMatrix* bias) {
  if (inst.completion_len() <= 0) throw TensorError("instance has no targets");
  if (!inst.loss_space) throw TensorError("instance has no loss space");
  if (inst.completion_begin < 1)
    throw TensorError("completion must follow a nonempty prompt");

  ForwardResult<T> fw = forward(tape, inst, bias);
  prompts::TokenRange range = prompts::loss_space_range(*inst.loss_space, p_.layout);

  std::vector<std::int64_t> rows;
  std::vector<std::vector<std::int64_t>> targets;
  for (std::int64_t pos = inst.completion_begin; pos < inst.size(); ++pos) {
    rows.push_back(pos - 1);
    TokenId t = inst.tokens[pos];
    if (t < range.begin || t >= range.begin + range.count)
      throw TensorError("target token outside the restricted space");
    targets.push_back({t - range.begin});
  }

  Tensor<T>* table = inst.loss_space == prompts::LossSpace::text_only
                         ? &p_.text_embed
                         : &p_.node_table();
  std::int64_t row_begin =
      inst.loss_space == prompts::LossSpace::text_only
          ? 0
          : (inst.loss_space == prompts::LossSpace::member_only
                 ? 0
                 : p_.layout.n_members);
  Tensor<T>* h = gather_rows(tape, fw.hidden, std::move(rows));
  Tensor<T>* logits = rows_times_table(tape, h, table, row_begin, range.count);
  return ce_mean(tape, logits, std::move(targets));
}

template <typename T>
Tensor<T>* Model<T>::node_task_loss(Tape<T>& tape, const PromptInstance& inst,
                                    const BiasMatrix* bias,
                                    std::size_t task_index, std::int32_t label) {
  if (task_index >= p_.class_embed.size()) throw TensorError("unknown task");
  ForwardResult<T> fw = forward(tape, inst, bias);
  Tensor<T>* h = gather_rows(tape, fw.hidden, {inst.size() - 1});
  Tensor<T>& table = p_.class_embed[task_index];
  if (label < 0 || label >= table.rows())
    throw TensorError("label outside class range");
  Tensor<T>* logits = rows_times_table(tape, h, &table, 0, table.rows());
  return ce_mean(tape, logits, {{label}});
}

template <typename T>
Tensor<T>* Model<T>::link_task_loss(Tape<T>& tape, const PromptInstance& inst,
                                    const BiasMatrix* bias,
                                    EntityType target_entity,
                                    const std::vector<NodeId>& heldout) {
  if (heldout.empty()) throw TensorError("link loss without held-out nodes");
  ForwardResult<T> fw = forward(tape, inst, bias);
  Tensor<T>* h = gather_rows(tape, fw.hidden, {inst.size() - 1});
  bool member = target_entity == EntityType::member;
  std::int64_t row_begin = member ? 0 : p_.layout.n_members;
  std::int64_t count = member ? p_.layout.n_members : p_.layout.n_jobs;
  std::vector<std::int64_t> local;
  for (NodeId id : heldout) {
    std::int64_t idx = static_cast<std::int64_t>(id) - 1 - row_begin;
    if (idx < 0 || idx >= count)
      throw TensorError("held-out node outside the target entity range");
    local.push_back(idx);
  }
  Tensor<T>* logits = rows_times_table(tape, h, &p_.node_table(), row_begin, count);
  return ce_mean(tape, logits, {std::move(local)});
}

template <typename T>
std::vector<T> Model<T>::class_probs(const PromptInstance& inst,
                                     const BiasMatrix* bias,
                                     std::size_t task_index) {
  Tape<T> tape;
  ForwardResult<T> fw = forward(tape, inst, bias);
  std::vector<T> probs =
      node_class_logits(fw.hidden->row(inst.size() - 1), task_index);
  kernels::softmax(probs.data(), probs.size());
  return probs;
}

template <typename T>
std::vector<T> Model<T>::entity_probs(const PromptInstance& inst,
                                      const BiasMatrix* bias,
                                      EntityType target_entity) {
  Tape<T> tape;
  ForwardResult<T> fw = forward(tape, inst, bias);
  std::vector<T> probs = link_logits(fw.hidden->row(inst.size() - 1), target_entity);
  kernels::softmax(probs.data(), probs.size());
  return probs;
}

template <typename T>
std::vector<T> Model<T>::node_class_logits(const T* h_last,
                                           std::size_t task_index) const {
  const Tensor<T>& table = p_.class_embed.at(task_index);
  std::vector<T> scores(table.rows());
  for (std::int64_t i = 0; i < table.rows(); ++i)
    scores[i] = kernels::dot(table.row(i), h_last, p_.cfg.dim);
  return scores;
}

template <typename T>
std::vector<T> Model<T>::link_logits(const T* h_last, EntityType target) const {
  const Tensor<T>& table = p_.cfg.tie_heads
                               ? p_.node_embed
                               : p_.node_head;
  bool member = target == EntityType::member;
  std::int64_t begin = member ? 0 : p_.layout.n_members;
  std::int64_t count = member ? p_.layout.n_members : p_.layout.n_jobs;
  std::vector<T> scores(count);
  for (std::int64_t i = 0; i < count; ++i)
    scores[i] = kernels::dot(table.row(begin + i), h_last, p_.cfg.dim);
  return scores;
}

template <typename T>
std::vector<T> restricted_log_softmax(std::span<const T> logits,
                                      prompts::TokenRange range) {
  if (range.count <= 0) throw TensorError("empty restricted token range");
  if (range.begin < 0 ||
      range.begin + range.count > static_cast<std::int64_t>(logits.size()))
    throw TensorError("restricted range outside the logits row");
  const T* base = logits.data() + range.begin;
  T mx = base[0];
  for (std::int64_t i = 1; i < range.count; ++i) mx = std::max(mx, base[i]);
  T total = T(0);
  for (std::int64_t i = 0; i < range.count; ++i)
    total += std::exp(base[i] - mx);
  T logz = mx + std::log(total);
  std::vector<T> out(range.count);
  for (std::int64_t i = 0; i < range.count; ++i) out[i] = base[i] - logz;
  return out;
}

// ----------------------------------------------------------- gradient check

template <typename T>
GradCheckReport<T> gradient_check(
    ParameterStore<T>& params,
    const std::function<Tensor<T>*(Tape<T>&)>& loss_fn, T epsilon,
    int coords_per_tensor, std::uint64_t seed) {
  params.zero_grads();
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    Tensor<T>* loss = loss_fn(tape);
    tape.backward(loss);
    for (auto& e : params.entries) analytic.push_back(e.tensor->grad);
  }
  auto eval = [&]() {
    Tape<T> tape;
    return loss_fn(tape)->data[0];
  };

  Rng rng(seed);
  GradCheckReport<T> report;
  for (std::size_t ei = 0; ei < params.entries.size(); ++ei) {
    auto& e = params.entries[ei];
    std::int64_t n = e.tensor->numel();
    // Largest analytic entries first, then random coordinates.
    std::vector<std::int64_t> coords;
    std::vector<std::int64_t> order(n);
    for (std::int64_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
      return std::abs(analytic[ei][a]) > std::abs(analytic[ei][b]);
    });
    for (std::int64_t i = 0; i < std::min<std::int64_t>(coords_per_tensor / 2, n); ++i)
      coords.push_back(order[i]);
    while (static_cast<int>(coords.size()) < coords_per_tensor && n > 0)
      coords.push_back(static_cast<std::int64_t>(rng.uniform(n)));

    GradCheckEntry<T> entry;
    entry.name = e.name;
    entry.kind = e.kind;
    for (std::int64_t c : coords) {
      T saved = e.tensor->data[c];
      e.tensor->data[c] = saved + epsilon;
      T fp = eval();
      e.tensor->data[c] = saved - epsilon;
      T fm = eval();
      e.tensor->data[c] = saved;
      T fd = (fp - fm) / (T(2) * epsilon);
      T a = analytic[ei][c];
      T rel = std::abs(a - fd) / (std::max(std::abs(a), std::abs(fd)) + T(1e-8));
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.analytic = a;
        entry.numeric = fd;
        entry.coord = c;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

// ----------------------------------------------------------------- fixture

template <typename T>
GradCheckFixture<T>::GradCheckFixture(const TransformerConfig& cfg,
                                      std::uint64_t seed) {
  g = graph::parse_graph(R"({"kind":"node","id":1,"type":"member","features":{"bio":"ab cd"},"labels":{"t0":1}}
{"kind":"node","id":2,"type":"member","features":{"bio":"cd ef"},"labels":{"t0":0}}
{"kind":"node","id":3,"type":"member","features":{"bio":"ef gh"},"labels":{"t0":1}}
{"kind":"node","id":4,"type":"job","features":{"jd":"xy"},"labels":{}}
{"kind":"node","id":5,"type":"job","features":{"jd":"zw"},"labels":{}}
{"kind":"edge","rel":"ui","src":1,"dst":4}
{"kind":"edge","rel":"ui","src":1,"dst":5}
{"kind":"edge","rel":"ui","src":2,"dst":4}
{"kind":"edge","rel":"ui","src":3,"dst":5}
{"kind":"edge","rel":"uu","src":1,"dst":2}
{"kind":"edge","rel":"uu","src":2,"dst":1}
{"kind":"edge","rel":"uu","src":2,"dst":3}
)");
  layout = vocab::VocabLayout::build(tokenizer, g, {{"t0", 2}});
  phi = graph::MetapathSet::parse_list(graph::kDefaultMetapaths);

  TransformerConfig c = cfg;
  c.psi_size = phi.psi_size();
  params.build(layout, c, seed);
  // Nudge b away from zero so its gradient path is exercised from a generic
  // point.
  {
    Rng rng(derive_seed(seed, 1, 0, "bias_init"));
    for (T& v : params.attn_bias.data) v = static_cast<T>(rng.normal(0.0, 0.05));
  }

  prompts::PromptOptions opt;
  opt.n_end = 2;
  opt.n_mid = 2;
  prompts::PromptBuilder builder(g, tokenizer, layout, opt);

  // Deterministic seed search so every objective materializes.
  auto find_ego = [&](NodeId k, int fanout, std::uint64_t s) {
    return graph::sample_ego_graph(g, k, 2, fanout, s);
  };
  for (std::uint64_t s = 0; s < 64; ++s) {
    auto ego = find_ego(1, 1, derive_seed(seed, s, 0, "ego_f"));
    auto feat = builder.feature_prompt(ego, 1, "bio");
    auto ego2 = find_ego(2, 1, derive_seed(seed, s, 0, "ego_1"));
    auto first = builder.first_order_prompt(ego2, 2, graph::Metapath::parse("UU"),
                                            derive_seed(seed, s, 1, "first"));
    auto ego3 = find_ego(1, 1, derive_seed(seed, s, 0, "ego_2"));
    auto second = builder.higher_order_prompt(ego3, 1,
                                              graph::Metapath::parse("UIU"),
                                              derive_seed(seed, s, 2, "second"));
    if (feat && first && second) {
      lm_instances = {*feat, *first, *second};
      break;
    }
  }
  if (lm_instances.size() != 3)
    throw TensorError("gradient-check fixture failed to build LM instances");
  for (const auto& inst : lm_instances)
    lm_biases.push_back(prompts::attention_bias_matrix(inst, g, phi));

  auto ego_n = find_ego(1, 2, derive_seed(seed, 99, 0, "ego_n"));
  prompts::TaskSpec task{"t0", 2, "bio", "does the member possess the skill coding: "};
  node_instance = builder.node_task_prompt(ego_n, 1, task);
  node_bias = prompts::attention_bias_matrix(node_instance, g, phi);

  auto obs = graph::neighbors(g, 1, graph::RelationType::member_job);
  auto split = prompts::PromptBuilder::split_observed(
      obs, opt.mask_ratio, derive_seed(seed, 101, 0, "link"));
  if (!split) throw TensorError("gradient-check fixture failed to split links");
  auto ego_l = graph::sample_ego_graph(g, 1, 2, 2,
                                       derive_seed(seed, 100, 0, "ego_l"),
                                       split->heldout);
  link_instance = builder.link_task_prompt(
      ego_l, 1, graph::RelationType::member_job, split->shown);
  link_heldout = split->heldout;
  link_bias = prompts::attention_bias_matrix(link_instance, g, phi);
}

template <typename T>
Tensor<T>* GradCheckFixture<T>::composite_loss(Tape<T>& tape) {
  Model<T> model(params);
  std::vector<Tensor<T>*> losses;
  for (std::size_t i = 0; i < lm_instances.size(); ++i)
    losses.push_back(model.lm_loss(tape, lm_instances[i], &lm_biases[i]));
  losses.push_back(model.node_task_loss(tape, node_instance, &node_bias, 0, 1));
  losses.push_back(model.link_task_loss(tape, link_instance, &link_bias,
                                        EntityType::job, link_heldout));
  return sum_scalars(tape, losses);
}

// ------------------------------------------------------------ instantiation

template struct ParameterStore<float>;
template struct ParameterStore<double>;
template class Model<float>;
template class Model<double>;
template std::vector<float> restricted_log_softmax<float>(
    std::span<const float>, prompts::TokenRange);
template std::vector<double> restricted_log_softmax<double>(
    std::span<const double>, prompts::TokenRange);
template GradCheckReport<float> gradient_check<float>(
    ParameterStore<float>&, const std::function<Tensor<float>*(Tape<float>&)>&,
    float, int, std::uint64_t);
template GradCheckReport<double> gradient_check<double>(
    ParameterStore<double>&,
    const std::function<Tensor<double>*(Tape<double>&)>&, double, int,
    std::uint64_t);
template struct GradCheckFixture<float>;
template struct GradCheckFixture<double>;

}  // namespace plm::nn
