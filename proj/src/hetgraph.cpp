#include "plm/hetgraph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace plm::graph {

namespace {

using nlohmann::json;

const char* type_name(EntityType t) {
  return t == EntityType::member ? "member" : "job";
}

bool sorted_contains(const std::vector<NodeId>& v, NodeId x) {
  return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace

void HetGraph::check_id(NodeId id) const {
  if (!valid_id(id))
    throw GraphError("unknown node id " + std::to_string(id));
}

const std::string* HetGraph::feature(NodeId id, std::string_view name) const {
  check_id(id);
  for (const auto& [k, v] : features[id - 1])
    if (k == name) return &v;
  return nullptr;
}

std::optional<std::int32_t> HetGraph::label(NodeId id,
                                            std::string_view task) const {
  check_id(id);
  for (const auto& [k, v] : labels[id - 1])
    if (k == task) return v;
  return std::nullopt;
}

std::int64_t HetGraph::edge_count(RelationType rel) const {
  const auto& adj = rel == RelationType::member_job ? ui_out : uu_out;
  std::int64_t n = 0;
  for (const auto& v : adj) n += static_cast<std::int64_t>(v.size());
  return n;
}

// ----------------------------------------------------------------- parsing

namespace {

struct RawEdge {
  RelationType rel;
  NodeId src;
  NodeId dst;
  std::int64_t line;
};

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         std::int64_t line) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw GraphError("line " + std::to_string(line) + ": unknown key \"" +
                       it.key() + "\"");
  }
}

NodeId require_id(const json& j, const char* key, std::int64_t line) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<std::int64_t>() < 1)
    throw GraphError("line " + std::to_string(line) + ": missing or invalid \"" +
                     std::string(key) + "\"");
  return j[key].get<NodeId>();
}

}  // namespace

HetGraph parse_graph(std::string_view text) {
  struct RawNode {
    NodeId id;
    EntityType type;
    std::vector<std::pair<std::string, std::string>> features;
    std::vector<std::pair<std::string, std::int32_t>> labels;
  };
  std::vector<RawNode> nodes;
  std::vector<RawEdge> edges;

  std::int64_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string_view::npos)
      continue;

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw GraphError("line " + std::to_string(line_no) + ": malformed JSON");
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
      throw GraphError("line " + std::to_string(line_no) + ": record without kind");

    std::string kind = j["kind"].get<std::string>();
    if (kind == "node") {
      reject_unknown_keys(j, {"kind", "id", "type", "features", "labels"}, line_no);
      RawNode n;
      n.id = require_id(j, "id", line_no);
      std::string t = j.value("type", std::string());
      if (t == "member")
        n.type = EntityType::member;
      else if (t == "job")
        n.type = EntityType::job;
      else
        throw GraphError("line " + std::to_string(line_no) + ": bad node type");
      if (j.contains("features")) {
        if (!j["features"].is_object())
          throw GraphError("line " + std::to_string(line_no) + ": features must be an object");
        for (auto it = j["features"].begin(); it != j["features"].end(); ++it)
          n.features.emplace_back(it.key(), it.value().get<std::string>());
      }
      if (j.contains("labels")) {
        if (!j["labels"].is_object())
          throw GraphError("line " + std::to_string(line_no) + ": labels must be an object");
        for (auto it = j["labels"].begin(); it != j["labels"].end(); ++it)
          n.labels.emplace_back(it.key(), it.value().get<std::int32_t>());
      }
      nodes.push_back(std::move(n));
    } else if (kind == "edge") {
      reject_unknown_keys(j, {"kind", "rel", "src", "dst"}, line_no);
      RawEdge e;
      std::string r = j.value("rel", std::string());
      if (r == "ui")
        e.rel = RelationType::member_job;
      else if (r == "uu")
        e.rel = RelationType::member_member;
      else
        throw GraphError("line " + std::to_string(line_no) + ": bad edge rel");
      e.src = require_id(j, "src", line_no);
      e.dst = require_id(j, "dst", line_no);
      e.line = line_no;
      edges.push_back(e);
    } else {
      throw GraphError("line " + std::to_string(line_no) + ": unknown kind \"" +
                       kind + "\"");
    }
  }

  // Ids must be dense with members before jobs.
  std::int64_t n_members = 0, n_jobs = 0;
  for (const auto& n : nodes) (n.type == EntityType::member ? n_members : n_jobs)++;
  std::int64_t total = n_members + n_jobs;
  std::vector<std::int8_t> seen(total + 1, 0);
  for (const auto& n : nodes) {
    if (static_cast<std::int64_t>(n.id) > total)
      throw GraphError("node id " + std::to_string(n.id) +
                       " out of dense range 1.." + std::to_string(total));
    if (seen[n.id]) throw GraphError("duplicate node id " + std::to_string(n.id));
    seen[n.id] = 1;
    EntityType expect = static_cast<std::int64_t>(n.id) <= n_members
                            ? EntityType::member
                            : EntityType::job;
    if (n.type != expect)
      throw GraphError("node id " + std::to_string(n.id) +
                       " breaks the members-then-jobs id layout");
  }

  HetGraph g;
  g.n_members = n_members;
  g.n_jobs = n_jobs;
  g.features.resize(total);
  g.labels.resize(total);
  g.ui_out.resize(n_members);
  g.ui_in.resize(n_jobs);
  g.uu_out.resize(n_members);
  g.uu_in.resize(n_members);
  for (auto& n : nodes) {
    g.features[n.id - 1] = std::move(n.features);
    g.labels[n.id - 1] = std::move(n.labels);
  }

  for (const auto& e : edges) {
    auto bad = [&](const char* what) {
      throw GraphError("line " + std::to_string(e.line) + ": " + what +
                       " (edge " + std::to_string(e.src) + "->" +
                       std::to_string(e.dst) + ")");
    };
    if (!g.valid_id(e.src)) {
      throw GraphError("line " + std::to_string(e.line) +
                       ": edge references unknown id " + std::to_string(e.src));
    }
    if (!g.valid_id(e.dst)) {
      throw GraphError("line " + std::to_string(e.line) +
                       ": edge references unknown id " + std::to_string(e.dst));
    }
    if (e.rel == RelationType::member_job) {
      if (g.type_of(e.src) != EntityType::member || g.type_of(e.dst) != EntityType::job)
        bad("ui edge endpoints must be member->job");
      g.ui_out[e.src - 1].push_back(e.dst);
      g.ui_in[e.dst - 1 - n_members].push_back(e.src);
    } else {
      if (g.type_of(e.src) != EntityType::member || g.type_of(e.dst) != EntityType::member)
        bad("uu edge endpoints must be member->member");
      g.uu_out[e.src - 1].push_back(e.dst);
      g.uu_in[e.dst - 1].push_back(e.src);
    }
  }

  auto finish = [](std::vector<std::vector<NodeId>>& adj, const char* rel) {
    for (auto& v : adj) {
      std::sort(v.begin(), v.end());
      if (std::adjacent_find(v.begin(), v.end()) != v.end())
        throw GraphError(std::string("duplicate ") + rel + " edge");
    }
  };
  finish(g.ui_out, "ui");
  finish(g.ui_in, "ui");
  finish(g.uu_out, "uu");
  finish(g.uu_in, "uu");
  return g;
}

HetGraph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GraphError("cannot open graph file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

std::string serialize_graph(const HetGraph& g) {
  std::string out;
  for (NodeId id = 1; static_cast<std::int64_t>(id) <= g.node_count(); ++id) {
    json j;
    j["kind"] = "node";
    j["id"] = id;
    j["type"] = type_name(g.type_of(id));
    json feats = json::object();
    for (const auto& [k, v] : g.features[id - 1]) feats[k] = v;
    j["features"] = feats;
    json labs = json::object();
    for (const auto& [k, v] : g.labels[id - 1]) labs[k] = v;
    j["labels"] = labs;
    out += j.dump();
    out += '\n';
  }
  auto dump_edges = [&](const std::vector<std::vector<NodeId>>& adj,
                        const char* rel, NodeId base) {
    for (std::size_t i = 0; i < adj.size(); ++i)
      for (NodeId dst : adj[i]) {
        json j;
        j["kind"] = "edge";
        j["rel"] = rel;
        j["src"] = base + static_cast<NodeId>(i) + 1;
        j["dst"] = dst;
        out += j.dump();
        out += '\n';
      }
  };
  dump_edges(g.ui_out, "ui", 0);
  dump_edges(g.uu_out, "uu", 0);
  return out;
}

void save_graph(const HetGraph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GraphError("cannot write graph file: " + path);
  out << serialize_graph(g);
}

// --------------------------------------------------------------- adjacency

std::span<const NodeId> neighbors(const HetGraph& g, NodeId k, RelationType rel) {
  g.check_id(k);
  if (g.type_of(k) != EntityType::member)
    throw GraphError("relation source must be a member, node " +
                     std::to_string(k) + " is a job");
  const auto& adj = rel == RelationType::member_job ? g.ui_out : g.uu_out;
  return adj[k - 1];
}

std::span<const NodeId> hop_neighbors(const HetGraph& g, NodeId k,
                                      EntityType from, EntityType to) {
  g.check_id(k);
  if (g.type_of(k) != from)
    throw GraphError("node " + std::to_string(k) + " is not a " + type_name(from));
  if (from == EntityType::member && to == EntityType::member)
    return g.uu_out[k - 1];
  if (from == EntityType::member && to == EntityType::job)
    return g.ui_out[k - 1];
  if (from == EntityType::job && to == EntityType::member)
    return g.ui_in[k - 1 - g.n_members];
  throw GraphError("no relation between two jobs");
}

// --------------------------------------------------------------- metapaths

Metapath Metapath::parse(std::string_view abbrev) {
  if (abbrev.size() < 2) throw GraphError("metapath too short: " + std::string(abbrev));
  Metapath p;
  p.abbrev = std::string(abbrev);
  for (char c : abbrev) {
    if (c == 'U')
      p.entities.push_back(EntityType::member);
    else if (c == 'I')
      p.entities.push_back(EntityType::job);
    else
      throw GraphError("metapath entity must be U or I: " + std::string(abbrev));
  }
  for (std::size_t i = 0; i + 1 < p.entities.size(); ++i) {
    EntityType a = p.entities[i], b = p.entities[i + 1];
    if (a == EntityType::job && b == EntityType::job)
      throw GraphError("metapath hop I->I has no relation: " + std::string(abbrev));
    p.relations.push_back(a == EntityType::member && b == EntityType::member
                              ? RelationType::member_member
                              : RelationType::member_job);
  }
  return p;
}

MetapathSet MetapathSet::parse_list(std::string_view csv) {
  MetapathSet s;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string_view::npos) comma = csv.size();
    std::string_view item = csv.substr(pos, comma - pos);
    if (!item.empty()) s.paths.push_back(Metapath::parse(item));
    pos = comma + 1;
  }
  if (s.psi_size() > 16)
    throw GraphError("metapath set too large (psi capped at 16 bits)");
  return s;
}

bool metapath_exists(const HetGraph& g, NodeId j, NodeId j2, const Metapath& phi) {
  g.check_id(j);
  g.check_id(j2);
  if (g.type_of(j) != phi.source() || g.type_of(j2) != phi.target()) return false;
  if (phi.length() == 1) {
    auto hop = hop_neighbors(g, j, phi.entities[0], phi.entities[1]);
    return std::binary_search(hop.begin(), hop.end(), j2);
  }
  if (phi.length() == 2) {
    for (NodeId mid : hop_neighbors(g, j, phi.entities[0], phi.entities[1])) {
      auto hop2 = hop_neighbors(g, mid, phi.entities[1], phi.entities[2]);
      if (std::binary_search(hop2.begin(), hop2.end(), j2)) return true;
    }
    return false;
  }
  // General directed walk for longer paths.
  std::vector<NodeId> frontier{j};
  for (int h = 0; h < phi.length(); ++h) {
    std::vector<NodeId> next;
    for (NodeId v : frontier) {
      auto hop = hop_neighbors(g, v, phi.entities[h], phi.entities[h + 1]);
      next.insert(next.end(), hop.begin(), hop.end());
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier = std::move(next);
    if (frontier.empty()) return false;
  }
  return std::binary_search(frontier.begin(), frontier.end(), j2);
}

ProximityVector compute_proximity(const HetGraph& g, NodeId j, NodeId j2,
                                  const MetapathSet& phi_set) {
  g.check_id(j);
  g.check_id(j2);
  ProximityVector psi;
  psi.size = static_cast<std::uint8_t>(phi_set.psi_size());
  if (j == j2) psi.set(0);
  for (int i = 0; i < phi_set.m(); ++i)
    if (metapath_exists(g, j, j2, phi_set.paths[i])) psi.set(i + 1);
  return psi;
}

// -------------------------------------------------------------- ego graphs

bool EgoGraph::contains(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const auto& p, NodeId v) { return p.first < v; });
  return it != nodes.end() && it->first == id;
}

int EgoGraph::hop(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const auto& p, NodeId v) { return p.first < v; });
  if (it == nodes.end() || it->first != id)
    throw GraphError("node " + std::to_string(id) + " not in ego graph");
  return it->second;
}

int shortest_distance(const EgoGraph& ego, NodeId i) { return ego.hop(i); }

namespace {

// Undirected neighbor view used only for reachability during sampling.
std::vector<NodeId> bidirectional_neighbors(const HetGraph& g, NodeId k) {
  std::vector<NodeId> out;
  if (g.type_of(k) == EntityType::member) {
    const auto& a = g.ui_out[k - 1];
    const auto& b = g.uu_out[k - 1];
    const auto& c = g.uu_in[k - 1];
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    out.insert(out.end(), c.begin(), c.end());
  } else {
    const auto& a = g.ui_in[k - 1 - g.n_members];
    out.insert(out.end(), a.begin(), a.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

EgoGraph sample_ego_graph(const HetGraph& g, NodeId k, int depth, int fanout,
                          std::uint64_t seed, std::span<const NodeId> banned) {
  g.check_id(k);
  if (depth < 1) throw GraphError("ego depth must be >= 1");
  if (fanout < 1) throw GraphError("ego fanout must be >= 1");

  Rng rng(seed);
  std::unordered_set<NodeId> excluded(banned.begin(), banned.end());
  std::unordered_set<NodeId> visited{k};
  std::vector<NodeId> frontier{k};
  std::vector<NodeId> sampled{k};

  for (int hop = 1; hop <= depth && !frontier.empty(); ++hop) {
    std::vector<NodeId> next;
    for (NodeId node : frontier) {
      std::vector<NodeId> cands;
      for (NodeId nb : bidirectional_neighbors(g, node))
        if (!visited.count(nb) && !excluded.count(nb)) cands.push_back(nb);
      auto chosen = rng.sample_without_replacement(
          std::move(cands), static_cast<std::size_t>(fanout));
      std::sort(chosen.begin(), chosen.end());
      for (NodeId c : chosen) {
        visited.insert(c);
        next.push_back(c);
        sampled.push_back(c);
      }
    }
    frontier = std::move(next);
  }

  EgoGraph ego;
  ego.center = k;
  std::sort(sampled.begin(), sampled.end());

  // Induced directed edges among the sampled nodes.
  for (NodeId src : sampled) {
    if (g.type_of(src) != EntityType::member) continue;
    for (NodeId dst : g.ui_out[src - 1])
      if (std::binary_search(sampled.begin(), sampled.end(), dst))
        ego.edges.push_back({src, dst, RelationType::member_job});
    for (NodeId dst : g.uu_out[src - 1])
      if (std::binary_search(sampled.begin(), sampled.end(), dst))
        ego.edges.push_back({src, dst, RelationType::member_member});
  }

  // Exact hop distances over the induced subgraph, undirected.
  std::vector<std::vector<std::size_t>> adj(sampled.size());
  auto index_of = [&](NodeId id) {
    return static_cast<std::size_t>(
        std::lower_bound(sampled.begin(), sampled.end(), id) - sampled.begin());
  };
  for (const auto& e : ego.edges) {
    std::size_t a = index_of(e.src), b = index_of(e.dst);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> dist(sampled.size(), -1);
  std::queue<std::size_t> q;
  std::size_t center_idx = index_of(k);
  dist[center_idx] = 0;
  q.push(center_idx);
  while (!q.empty()) {
    std::size_t v = q.front();
    q.pop();
    for (std::size_t w : adj[v])
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
  }
  ego.nodes.reserve(sampled.size());
  for (std::size_t i = 0; i < sampled.size(); ++i)
    ego.nodes.emplace_back(sampled[i], dist[i]);
  return ego;
}

std::optional<MetapathTriple> sample_metapath_triple(
    const HetGraph& g, NodeId k, const Metapath& phi, int n_mid, int n_end,
    const EgoGraph& ego, std::uint64_t seed) {
  g.check_id(k);
  if (phi.length() != 2)
    throw GraphError("triple sampling needs a two-hop metapath, got " + phi.abbrev);
  if (!phi.compatible_with(g.type_of(k)))
    throw GraphError("metapath " + phi.abbrev + " incompatible with node " +
                     std::to_string(k));

  auto mids_all = hop_neighbors(g, k, phi.entities[0], phi.entities[1]);
  if (mids_all.empty()) return std::nullopt;

  Rng rng(seed);
  auto intermediates = rng.sample_without_replacement(
      std::vector<NodeId>(mids_all.begin(), mids_all.end()),
      static_cast<std::size_t>(n_mid));

  // End candidates with repetition: nodes reachable through several
  // intermediates are proportionally more likely to be drawn.
  std::vector<NodeId> pool;
  std::unordered_set<NodeId> dropped(intermediates.begin(), intermediates.end());
  dropped.insert(k);
  for (NodeId mid : intermediates)
    for (NodeId end : hop_neighbors(g, mid, phi.entities[1], phi.entities[2]))
      if (!dropped.count(end) && !ego.contains(end)) pool.push_back(end);

  MetapathTriple triple;
  triple.center = k;
  triple.intermediates = std::move(intermediates);
  while (!pool.empty() && static_cast<int>(triple.ends.size()) < n_end) {
    NodeId pick = pool[rng.uniform(pool.size())];
    triple.ends.push_back(pick);
    pool.erase(std::remove(pool.begin(), pool.end(), pick), pool.end());
  }
  return triple;
}

}  // namespace plm::graph
