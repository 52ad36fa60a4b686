#pragma once
// Heterogeneous member/job graph: typed nodes with text features and labels,
// directed typed edges, ego-graph sampling, metapaths and proximity vectors.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "plm/rng.hpp"

namespace plm::graph {

using NodeId = std::uint32_t;  // 1-based; members first, then jobs, dense

enum class EntityType : std::uint8_t { member, job };
enum class RelationType : std::uint8_t { member_job, member_member };

struct GraphError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HetGraph {
  std::int64_t n_members = 0;
  std::int64_t n_jobs = 0;
  // Indexed by id-1.
  std::vector<std::vector<std::pair<std::string, std::string>>> features;
  std::vector<std::vector<std::pair<std::string, std::int32_t>>> labels;
  // Sorted ascending, duplicate-free. ui_out indexed by member id-1,
  // ui_in by job id-1-n_members, uu_* by member id-1.
  std::vector<std::vector<NodeId>> ui_out;
  std::vector<std::vector<NodeId>> ui_in;
  std::vector<std::vector<NodeId>> uu_out;
  std::vector<std::vector<NodeId>> uu_in;

  std::int64_t node_count() const { return n_members + n_jobs; }
  bool valid_id(NodeId id) const {
    return id >= 1 && static_cast<std::int64_t>(id) <= node_count();
  }
  EntityType type_of(NodeId id) const {
    return static_cast<std::int64_t>(id) <= n_members ? EntityType::member
                                                      : EntityType::job;
  }
  void check_id(NodeId id) const;
  const std::string* feature(NodeId id, std::string_view name) const;
  std::optional<std::int32_t> label(NodeId id, std::string_view task) const;
  std::int64_t edge_count(RelationType rel) const;
};

// JSON Lines: {"kind":"node","id":..,"type":"member"|"job","features":{..},
// "labels":{..}} and {"kind":"edge","rel":"ui"|"uu","src":..,"dst":..}.
// Unknown keys are rejected; all invariants are validated after parsing.
HetGraph load_graph(const std::string& path);
HetGraph parse_graph(std::string_view text);
void save_graph(const HetGraph& g, const std::string& path);
std::string serialize_graph(const HetGraph& g);

// Directed out-neighbors of k under relation rel. Throws on unknown node or
// when k's type does not match the relation's source type.
std::span<const NodeId> neighbors(const HetGraph& g, NodeId k, RelationType rel);

// -------------------------------------------------------------- metapaths

struct Metapath {
  std::vector<EntityType> entities;    // length l+1
  std::vector<RelationType> relations; // length l, derived from entity pairs
  std::string abbrev;                  // e.g. "UIU"

  static Metapath parse(std::string_view abbrev);
  int length() const { return static_cast<int>(relations.size()); }
  EntityType source() const { return entities.front(); }
  EntityType target() const { return entities.back(); }
  bool compatible_with(EntityType t) const { return source() == t; }
};

// Ordered non-trivial metapaths; index 0 of the proximity vector is the
// implicit self metapath, paths[i] maps to bit i+1.
struct MetapathSet {
  std::vector<Metapath> paths;

  static MetapathSet parse_list(std::string_view csv);  // "UU,UI,IU,..."
  int m() const { return static_cast<int>(paths.size()); }
  int psi_size() const { return m() + 1; }
};

// Default training set (six paths, psi has 7 entries).
inline constexpr std::string_view kDefaultMetapaths = "UU,UI,IU,UIU,UUI,IUI";

struct ProximityVector {
  std::uint16_t bits = 0;
  std::uint8_t size = 0;  // M+1

  bool bit(int i) const { return (bits >> i) & 1u; }
  void set(int i) { bits = static_cast<std::uint16_t>(bits | (1u << i)); }
};

// Directed neighbors for one metapath hop (from,to) entity pair; the (job,
// member) hop traverses member->job edges in reverse.
std::span<const NodeId> hop_neighbors(const HetGraph& g, NodeId k,
                                      EntityType from, EntityType to);

// True iff a directed path realizing phi leads from j to j2. Endpoint type
// mismatch yields false, not an error.
bool metapath_exists(const HetGraph& g, NodeId j, NodeId j2, const Metapath& phi);

ProximityVector compute_proximity(const HetGraph& g, NodeId j, NodeId j2,
                                  const MetapathSet& phi_set);

// -------------------------------------------------------------- ego graphs

struct EgoEdge {
  NodeId src;
  NodeId dst;
  RelationType rel;
};

struct EgoGraph {
  NodeId center = 0;
  std::vector<std::pair<NodeId, int>> nodes;  // (id, hop), ascending id
  std::vector<EgoEdge> edges;                 // induced directed edges

  bool contains(NodeId id) const;
  int hop(NodeId id) const;  // throws GraphError when id is absent
};

// Seeded BFS expansion from k, treating edges as bidirectional for
// reachability, keeping at most `fanout` unvisited neighbors per expanded
// node per hop. Hop distances are recomputed as exact shortest distances in
// the induced subgraph. Nodes in `banned` are never sampled.
EgoGraph sample_ego_graph(const HetGraph& g, NodeId k, int depth, int fanout,
                          std::uint64_t seed,
                          std::span<const NodeId> banned = {});

int shortest_distance(const EgoGraph& ego, NodeId i);

struct MetapathTriple {
  NodeId center;
  std::vector<NodeId> intermediates;
  std::vector<NodeId> ends;
};

// Two-hop triple sampling: intermediates uniform without replacement, end
// nodes drawn from the repetition-weighted union of the intermediates' end
// neighbors, excluding the center, every ego-graph node and the sampled
// intermediates, deduplicated. nullopt when k has no intermediates; an empty
// `ends` means the caller should skip the instance.
std::optional<MetapathTriple> sample_metapath_triple(
    const HetGraph& g, NodeId k, const Metapath& phi, int n_mid, int n_end,
    const EgoGraph& ego, std::uint64_t seed);

}  // namespace plm::graph
