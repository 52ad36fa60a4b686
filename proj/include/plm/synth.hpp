#pragma once
// Synthetic job-marketplace graphs with planted cluster structure: latent
// blocks drive member-job and member-member edges, cluster vocabularies drive
// the biography/JD texts, and node labels derive from the cluster (noisily).

#include <cstdint>
#include <string>
#include <vector>

#include "plm/hetgraph.hpp"
#include "plm/prompts.hpp"

namespace plm::synth {

struct SynthConfig {
  std::int64_t n_members = 300;
  std::int64_t n_jobs = 200;
  int n_clusters = 5;
  double p_in = 0.05;    // member-job edge probability within a cluster
  double p_out = 0.005;  // across clusters
  double p_uu = 0.08;    // co-working edges within a cluster (both directions)
  double label_noise = 0.1;
  int words_per_bio = 4;
  int words_per_jd = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  std::vector<int> member_cluster;
  std::vector<int> job_cluster;
};

struct SynthResult {
  graph::HetGraph g;
  GroundTruth truth;
};

SynthResult generate_graph(const SynthConfig& cfg);
std::string truth_json(const GroundTruth& truth);

// The two planted node tasks: "skill" (one class per cluster) and "coding"
// (binary, clusters 0/1 count as coding-related).
std::vector<prompts::TaskSpec> standard_tasks(int n_clusters);
// Task classes found in a graph's labels (max label + 1 per task name).
std::vector<vocab::TaskClasses> tasks_from_labels(const graph::HetGraph& g);

// ------------------------------------------------------------------ splits

struct LinkSplit {
  struct NodeLinks {
    graph::NodeId node;
    std::vector<graph::NodeId> train, valid, test;  // sorted
  };
  graph::RelationType rel = graph::RelationType::member_job;
  int min_degree = 5;
  std::vector<NodeLinks> eval_nodes;  // only nodes with >= min_degree links

  const NodeLinks* find(graph::NodeId node) const;
};

// Per-node random partition of out-links for nodes with >= min_degree
// targets; other nodes keep all their links for training.
LinkSplit split_links(const graph::HetGraph& g, graph::RelationType rel,
                      double r_train, double r_valid, double r_test,
                      int min_degree, std::uint64_t seed);

// Training view: the valid/test links of evaluation nodes are removed from
// the graph (both directions), so neither prompting nor ego sampling can
// traverse them.
graph::HetGraph apply_link_split(const graph::HetGraph& g, const LinkSplit& split);

struct NodeSplit {
  std::vector<graph::NodeId> train, valid, test;
};

// Disjoint partition of the labeled nodes of a task.
NodeSplit split_nodes(const graph::HetGraph& g, std::string_view task,
                      double r_train, double r_valid, double r_test,
                      std::uint64_t seed);

}  // namespace plm::synth
