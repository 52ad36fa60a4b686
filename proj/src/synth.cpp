#include "plm/synth.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace plm::synth {

using graph::HetGraph;
using graph::NodeId;
using graph::RelationType;

void SynthConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_in) || !prob(p_out) || !prob(p_uu) || !prob(label_noise))
    throw graph::GraphError("synth probabilities must lie in [0,1]");
  if (p_in <= p_out)
    throw graph::GraphError("synth requires p_in > p_out");
  if (n_clusters < 2) throw graph::GraphError("synth requires >= 2 clusters");
  if (n_members < 1 || n_jobs < 1)
    throw graph::GraphError("synth requires at least one member and one job");
}

namespace {

// Shared pool of cluster vocabularies; clusters beyond the pool get generated
// word lists. Disjoint so the planted labels are recoverable from text.
const std::vector<std::vector<std::string>>& word_pool() {
  static const std::vector<std::vector<std::string>> pool = {
      {"python", "sql", "spark", "pandas", "etl", "airflow", "dbt", "scala"},
      {"react", "css", "html", "figma", "webpack", "vue", "sass", "dom"},
      {"sales", "crm", "outreach", "pipeline", "quota", "demo", "leads", "deals"},
      {"audit", "tax", "ledger", "payroll", "gaap", "invoice", "budget", "fiscal"},
      {"nursing", "triage", "clinic", "charting", "icu", "vitals", "meds", "care"},
  };
  return pool;
}

std::vector<std::string> cluster_words(int cluster) {
  const auto& pool = word_pool();
  if (cluster < static_cast<int>(pool.size())) return pool[cluster];
  std::vector<std::string> words;
  for (int i = 0; i < 8; ++i)
    words.push_back("skill" + std::to_string(cluster) + "x" + std::to_string(i));
  return words;
}

std::string join_words(const std::vector<std::string>& pool, int count, Rng& rng) {
  auto picks = rng.sample_without_replacement(pool, static_cast<std::size_t>(count));
  std::string out;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    if (i) out += ", ";
    out += picks[i];
  }
  return out;
}

std::int32_t noisy_label(std::int32_t truth, std::int32_t n_classes, double noise,
                         Rng& rng) {
  if (n_classes < 2 || !rng.bernoulli(noise)) return truth;
  std::int32_t other = static_cast<std::int32_t>(rng.uniform(n_classes - 1));
  return other >= truth ? other + 1 : other;
}

}  // namespace

std::vector<prompts::TaskSpec> standard_tasks(int n_clusters) {
  return {
      {"skill", n_clusters, "bio",
       "The member could possess the following skills: "},
      {"coding", 2, "bio", "does the member possess the skill coding: "},
  };
}

std::vector<vocab::TaskClasses> tasks_from_labels(const graph::HetGraph& g) {
  std::vector<vocab::TaskClasses> tasks;
  for (NodeId id = 1; static_cast<std::int64_t>(id) <= g.node_count(); ++id) {
    for (const auto& [name, value] : g.labels[id - 1]) {
      auto it = std::find_if(tasks.begin(), tasks.end(),
                             [&](const auto& t) { return t.name == name; });
      if (it == tasks.end())
        tasks.push_back({name, value + 1});
      else
        it->n_classes = std::max(it->n_classes, value + 1);
    }
  }
  std::sort(tasks.begin(), tasks.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  for (auto& t : tasks) t.n_classes = std::max(t.n_classes, 2);
  return tasks;
}

SynthResult generate_graph(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0, 0, "synth"));

  SynthResult out;
  HetGraph& g = out.g;
  g.n_members = cfg.n_members;
  g.n_jobs = cfg.n_jobs;
  std::int64_t total = g.node_count();
  g.features.resize(total);
  g.labels.resize(total);
  g.ui_out.resize(cfg.n_members);
  g.ui_in.resize(cfg.n_jobs);
  g.uu_out.resize(cfg.n_members);
  g.uu_in.resize(cfg.n_members);

  auto& mc = out.truth.member_cluster;
  auto& jc = out.truth.job_cluster;
  for (std::int64_t i = 0; i < cfg.n_members; ++i)
    mc.push_back(static_cast<int>(rng.uniform(cfg.n_clusters)));
  for (std::int64_t i = 0; i < cfg.n_jobs; ++i)
    jc.push_back(static_cast<int>(rng.uniform(cfg.n_clusters)));

  for (std::int64_t u = 0; u < cfg.n_members; ++u)
    for (std::int64_t j = 0; j < cfg.n_jobs; ++j) {
      double p = mc[u] == jc[j] ? cfg.p_in : cfg.p_out;
      if (rng.bernoulli(p)) {
        NodeId member = static_cast<NodeId>(u + 1);
        NodeId job = static_cast<NodeId>(cfg.n_members + j + 1);
        g.ui_out[u].push_back(job);
        g.ui_in[j].push_back(member);
      }
    }

  // Co-working is symmetric: both directions are emitted.
  for (std::int64_t u = 0; u < cfg.n_members; ++u)
    for (std::int64_t v = u + 1; v < cfg.n_members; ++v) {
      if (mc[u] != mc[v]) continue;
      if (!rng.bernoulli(cfg.p_uu)) continue;
      NodeId a = static_cast<NodeId>(u + 1), b = static_cast<NodeId>(v + 1);
      g.uu_out[u].push_back(b);
      g.uu_in[v - 0].push_back(a);
      g.uu_out[v].push_back(a);
      g.uu_in[u].push_back(b);
    }

  for (std::int64_t u = 0; u < cfg.n_members; ++u) {
    auto words = cluster_words(mc[u]);
    std::string bio = "skills: " + join_words(words, cfg.words_per_bio, rng) + ".";
    g.features[u].emplace_back("bio", std::move(bio));
    std::int32_t skill = noisy_label(mc[u], cfg.n_clusters, cfg.label_noise, rng);
    std::int32_t coding_truth = mc[u] <= 1 ? 1 : 0;
    std::int32_t coding = noisy_label(coding_truth, 2, cfg.label_noise, rng);
    g.labels[u].emplace_back("skill", skill);
    g.labels[u].emplace_back("coding", coding);
  }
  for (std::int64_t j = 0; j < cfg.n_jobs; ++j) {
    auto words = cluster_words(jc[j]);
    std::string jd = "requirements: " + join_words(words, cfg.words_per_jd, rng) + ".";
    g.features[cfg.n_members + j].emplace_back("jd", std::move(jd));
  }

  for (auto* adj : {&g.ui_out, &g.ui_in, &g.uu_out, &g.uu_in})
    for (auto& v : *adj) std::sort(v.begin(), v.end());
  // Keep per-node key order canonical (the JSONL writer sorts keys too).
  for (auto& l : g.labels) std::sort(l.begin(), l.end());
  for (auto& f : g.features) std::sort(f.begin(), f.end());
  return out;
}

std::string truth_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["member_cluster"] = truth.member_cluster;
  j["job_cluster"] = truth.job_cluster;
  return j.dump(2);
}

// -------------------------------------------------------------------- splits

const LinkSplit::NodeLinks* LinkSplit::find(NodeId node) const {
  for (const auto& n : eval_nodes)
    if (n.node == node) return &n;
  return nullptr;
}

LinkSplit split_links(const HetGraph& g, RelationType rel, double r_train,
                      double r_valid, double r_test, int min_degree,
                      std::uint64_t seed) {
  if (std::abs(r_train + r_valid + r_test - 1.0) > 1e-9)
    throw graph::GraphError("link split ratios must sum to 1");
  LinkSplit split;
  split.rel = rel;
  split.min_degree = min_degree;
  for (std::int64_t u = 0; u < g.n_members; ++u) {
    NodeId node = static_cast<NodeId>(u + 1);
    auto links = graph::neighbors(g, node, rel);
    if (static_cast<int>(links.size()) < min_degree) continue;
    std::vector<NodeId> shuffled(links.begin(), links.end());
    Rng rng(derive_seed(seed, node, 0, "link_split"));
    rng.shuffle(shuffled);
    std::int64_t n = static_cast<std::int64_t>(shuffled.size());
    std::int64_t n_test = std::llround(r_test * static_cast<double>(n));
    std::int64_t n_valid = std::llround(r_valid * static_cast<double>(n));
    n_test = std::clamp<std::int64_t>(n_test, 1, n - 2);
    n_valid = std::clamp<std::int64_t>(n_valid, 1, n - n_test - 1);
    LinkSplit::NodeLinks nl;
    nl.node = node;
    nl.test.assign(shuffled.begin(), shuffled.begin() + n_test);
    nl.valid.assign(shuffled.begin() + n_test, shuffled.begin() + n_test + n_valid);
    nl.train.assign(shuffled.begin() + n_test + n_valid, shuffled.end());
    std::sort(nl.test.begin(), nl.test.end());
    std::sort(nl.valid.begin(), nl.valid.end());
    std::sort(nl.train.begin(), nl.train.end());
    split.eval_nodes.push_back(std::move(nl));
  }
  return split;
}

HetGraph apply_link_split(const HetGraph& g, const LinkSplit& split) {
  HetGraph view = g;
  auto& out_adj = split.rel == RelationType::member_job ? view.ui_out : view.uu_out;
  for (const auto& nl : split.eval_nodes) out_adj[nl.node - 1] = nl.train;
  // Rebuild the reverse adjacency of the affected relation.
  if (split.rel == RelationType::member_job) {
    for (auto& v : view.ui_in) v.clear();
    for (std::size_t u = 0; u < view.ui_out.size(); ++u)
      for (NodeId job : view.ui_out[u])
        view.ui_in[job - 1 - view.n_members].push_back(static_cast<NodeId>(u + 1));
    for (auto& v : view.ui_in) std::sort(v.begin(), v.end());
  } else {
    for (auto& v : view.uu_in) v.clear();
    for (std::size_t u = 0; u < view.uu_out.size(); ++u)
      for (NodeId m : view.uu_out[u])
        view.uu_in[m - 1].push_back(static_cast<NodeId>(u + 1));
    for (auto& v : view.uu_in) std::sort(v.begin(), v.end());
  }
  return view;
}

NodeSplit split_nodes(const HetGraph& g, std::string_view task, double r_train,
                      double r_valid, double r_test, std::uint64_t seed) {
  if (std::abs(r_train + r_valid + r_test - 1.0) > 1e-9)
    throw graph::GraphError("node split ratios must sum to 1");
  std::vector<NodeId> labeled;
  for (NodeId id = 1; static_cast<std::int64_t>(id) <= g.node_count(); ++id)
    if (g.label(id, task)) labeled.push_back(id);
  if (labeled.empty())
    throw graph::GraphError("task \"" + std::string(task) + "\" has no labels");
  Rng rng(derive_seed(seed, 0, 0, "node_split"));
  rng.shuffle(labeled);
  std::int64_t n = static_cast<std::int64_t>(labeled.size());
  std::int64_t n_valid = std::llround(r_valid * static_cast<double>(n));
  std::int64_t n_test = std::llround(r_test * static_cast<double>(n));
  NodeSplit s;
  s.valid.assign(labeled.begin(), labeled.begin() + n_valid);
  s.test.assign(labeled.begin() + n_valid, labeled.begin() + n_valid + n_test);
  s.train.assign(labeled.begin() + n_valid + n_test, labeled.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace plm::synth
