#pragma once
// Independent reference implementations the tests check the library against.
// Everything here is deliberately written from the definitions with plain
// loops, separate from the code paths under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "plm/hetgraph.hpp"
#include "plm/model.hpp"

namespace oracles {

using plm::graph::EntityType;
using plm::graph::HetGraph;
using plm::graph::NodeId;

// All directed edges of the graph as (src, dst) pairs.
inline std::vector<std::pair<NodeId, NodeId>> all_edges(const HetGraph& g) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t u = 0; u < g.ui_out.size(); ++u)
    for (NodeId v : g.ui_out[u]) edges.emplace_back(static_cast<NodeId>(u + 1), v);
  for (std::size_t u = 0; u < g.uu_out.size(); ++u)
    for (NodeId v : g.uu_out[u]) edges.emplace_back(static_cast<NodeId>(u + 1), v);
  return edges;
}

// Undirected single-source BFS over the whole graph.
inline std::vector<int> bfs_distances(const HetGraph& g, NodeId source) {
  std::vector<std::vector<NodeId>> adj(g.node_count() + 1);
  for (auto [a, b] : all_edges(g)) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> dist(g.node_count() + 1, -1);
  std::vector<NodeId> queue{source};
  dist[source] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    NodeId v = queue[head];
    for (NodeId w : adj[v])
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
  }
  return dist;
}

// All-pairs shortest paths over an explicit undirected edge list.
inline std::vector<std::vector<int>> floyd_warshall(
    int n, const std::vector<std::pair<int, int>>& edges) {
  const int inf = 1 << 20;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (auto [a, b] : edges) {
    d[a][b] = std::min(d[a][b], 1);
    d[b][a] = std::min(d[b][a], 1);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

// Recursive enumeration of every directed path matching the entity sequence.
inline bool path_exists_dfs(const HetGraph& g, NodeId at, NodeId target,
                            const std::vector<EntityType>& entities,
                            std::size_t step) {
  if (step + 1 == entities.size()) return at == target;
  EntityType from = entities[step], to = entities[step + 1];
  if (g.type_of(at) != from) return false;
  for (auto [a, b] : all_edges(g)) {
    NodeId next = 0;
    if (from == EntityType::member && to == EntityType::member) {
      if (a == at && g.type_of(b) == EntityType::member) next = b;
    } else if (from == EntityType::member && to == EntityType::job) {
      if (a == at && g.type_of(b) == EntityType::job) next = b;
    } else if (from == EntityType::job && to == EntityType::member) {
      if (b == at && g.type_of(a) == EntityType::member &&
          g.type_of(b) == EntityType::job)
        next = a;
    }
    if (next != 0 && path_exists_dfs(g, next, target, entities, step + 1))
      return true;
  }
  return false;
}

inline bool metapath_exists_oracle(const HetGraph& g, NodeId j, NodeId j2,
                                   const plm::graph::Metapath& phi) {
  if (g.type_of(j) != phi.source() || g.type_of(j2) != phi.target()) return false;
  return path_exists_dfs(g, j, j2, phi.entities, 0);
}

// ------------------------------------------------------------------ metrics

inline double recall_oracle(const std::vector<NodeId>& ranked,
                            const std::set<NodeId>& targets, int m) {
  int hits = 0;
  for (int r = 0; r < std::min<int>(m, static_cast<int>(ranked.size())); ++r)
    if (targets.count(ranked[r])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

inline double ndcg_oracle(const std::vector<NodeId>& ranked,
                          const std::set<NodeId>& targets, int m) {
  double dcg = 0.0;
  for (int r = 0; r < std::min<int>(m, static_cast<int>(ranked.size())); ++r)
    if (targets.count(ranked[r]))
      dcg += 1.0 / std::log2(r + 2.0);
  double idcg = 0.0;
  int hits = std::min<int>(m, static_cast<int>(targets.size()));
  for (int r = 0; r < hits; ++r) idcg += 1.0 / std::log2(r + 2.0);
  return dcg / idcg;
}

// -------------------------------------------------- bias-free forward (f64)
// Straight-line decoder-only forward with no attention bias, mirroring the
// architecture from the definitions: composed input embeddings, pre-LN
// blocks, causal softmax attention, tanh GELU, final norm.

struct RefForward {
  const plm::nn::ParameterStore<double>& p;

  std::vector<double> layer_norm_row(const double* x, const double* g,
                                     const double* b) const {
    std::int64_t d = p.cfg.dim;
    double mean = 0.0, var = 0.0;
    for (std::int64_t c = 0; c < d; ++c) mean += x[c];
    mean /= static_cast<double>(d);
    for (std::int64_t c = 0; c < d; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= static_cast<double>(d);
    double rstd = 1.0 / std::sqrt(var + 1e-5);
    std::vector<double> out(d);
    for (std::int64_t c = 0; c < d; ++c)
      out[c] = (x[c] - mean) * rstd * g[c] + b[c];
    return out;
  }

  // Returns the [T, d] hidden states after the final norm.
  std::vector<std::vector<double>> run(const plm::prompts::PromptInstance& inst) const {
    std::int64_t d = p.cfg.dim;
    int heads = p.cfg.heads;
    std::int64_t dh = d / heads;
    std::int64_t n = inst.size();

    std::vector<std::vector<double>> x(n, std::vector<double>(d, 0.0));
    for (std::int64_t t = 0; t < n; ++t) {
      auto id = inst.tokens[t];
      if (p.layout.is_text(id)) {
        for (std::int64_t c = 0; c < d; ++c) x[t][c] = p.text_embed.row(id)[c];
      } else {
        NodeId node = p.layout.node_of(id);
        int ent = static_cast<std::int64_t>(node) <= p.layout.n_members ? 0 : 1;
        int hop = inst.embed_hop[t];
        for (std::int64_t c = 0; c < d; ++c)
          x[t][c] = p.node_embed.row(node - 1)[c] + p.entity_embed.row(ent)[c] +
                    p.pos_embed.row(hop)[c];
      }
    }

    for (int l = 0; l < p.cfg.layers; ++l) {
      const auto& lay = p.layers[l];
      // attention
      std::vector<std::vector<double>> qkv(n, std::vector<double>(3 * d, 0.0));
      for (std::int64_t t = 0; t < n; ++t) {
        auto h1 = layer_norm_row(x[t].data(), lay.ln1_g.data.data(),
                                 lay.ln1_b.data.data());
        for (std::int64_t o = 0; o < 3 * d; ++o) {
          double acc = lay.qkv_b.data[o];
          for (std::int64_t c = 0; c < d; ++c)
            acc += h1[c] * lay.qkv_w.data[c * 3 * d + o];
          qkv[t][o] = acc;
        }
      }
      std::vector<std::vector<double>> att(n, std::vector<double>(d, 0.0));
      for (int h = 0; h < heads; ++h) {
        for (std::int64_t t = 0; t < n; ++t) {
          std::vector<double> scores(t + 1);
          for (std::int64_t s = 0; s <= t; ++s) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < dh; ++c)
              acc += qkv[t][h * dh + c] * qkv[s][d + h * dh + c];
            scores[s] = acc / std::sqrt(static_cast<double>(dh));
          }
          double mx = *std::max_element(scores.begin(), scores.end());
          double total = 0.0;
          for (double& v : scores) {
            v = std::exp(v - mx);
            total += v;
          }
          for (double& v : scores) v /= total;
          for (std::int64_t s = 0; s <= t; ++s)
            for (std::int64_t c = 0; c < dh; ++c)
              att[t][h * dh + c] += scores[s] * qkv[s][2 * d + h * dh + c];
        }
      }
      for (std::int64_t t = 0; t < n; ++t) {
        std::vector<double> proj(d, 0.0);
        for (std::int64_t o = 0; o < d; ++o) {
          double acc = lay.attn_out_b.data[o];
          for (std::int64_t c = 0; c < d; ++c)
            acc += att[t][c] * lay.attn_out_w.data[c * d + o];
          proj[o] = acc;
        }
        for (std::int64_t c = 0; c < d; ++c) x[t][c] += proj[c];
      }
      // ffn
      for (std::int64_t t = 0; t < n; ++t) {
        auto h2 = layer_norm_row(x[t].data(), lay.ln2_g.data.data(),
                                 lay.ln2_b.data.data());
        std::int64_t f = p.cfg.ffn_dim;
        std::vector<double> mid(f);
        for (std::int64_t o = 0; o < f; ++o) {
          double acc = lay.fc_b.data[o];
          for (std::int64_t c = 0; c < d; ++c)
            acc += h2[c] * lay.fc_w.data[c * f + o];
          double u = 0.7978845608028654 * (acc + 0.044715 * acc * acc * acc);
          mid[o] = 0.5 * acc * (1.0 + std::tanh(u));
        }
        for (std::int64_t o = 0; o < d; ++o) {
          double acc = lay.proj_b.data[o];
          for (std::int64_t c = 0; c < f; ++c)
            acc += mid[c] * lay.proj_w.data[c * d + o];
          x[t][o] += acc;
        }
      }
    }
    std::vector<std::vector<double>> out(n);
    for (std::int64_t t = 0; t < n; ++t)
      out[t] = layer_norm_row(x[t].data(), p.lnf_g.data.data(), p.lnf_b.data.data());
    return out;
  }
};

}  // namespace oracles
