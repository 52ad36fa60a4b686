// Command-line front end: data generation, the training pipeline, evaluation,
// prediction, embedding export, gradient checking and prompt dumps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "plm/config.hpp"
#include "plm/eval.hpp"
#include "plm/hetgraph.hpp"
#include "plm/kernels.hpp"
#include "plm/model.hpp"
#include "plm/prompts.hpp"
#include "plm/synth.hpp"
#include "plm/train.hpp"
#include "plm/vocab.hpp"

namespace {

using namespace plm;

constexpr std::string_view kKnownKeys[] = {
    "model.dim", "model.layers", "model.heads", "model.ffn_mult",
    "model.context", "model.bias_per_layer", "model.bias_on_completion_keys",
    "model.tie_heads", "graph.depth", "graph.fanout", "metapaths",
    "train.warmup_epochs", "train.total_epochs", "train.stage0_epochs",
    "train.lr", "train.batch_size", "train.grad_clip", "train.policy",
    "train.freeze_backbone", "prompt.n_end", "prompt.n_mid",
    "prompt.mask_ratio", "task", "eval.n_g", "eval.split",
    "split.link_train", "split.link_valid", "split.link_test",
    "split.min_degree", "split.node_train", "split.node_valid",
    "split.node_test", "seed", "precision", "kernels",
    "synth.n_members", "synth.n_jobs", "synth.n_clusters", "synth.p_in",
    "synth.p_out", "synth.p_uu", "synth.noise", "synth.seed",
};

struct Cli {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string graph_path, ckpt_in, ckpt_out, out_path, log_path, plot_path;
  std::string truth_path, kind = "all", split = "test";
  std::uint32_t node = 0;
  int top_m = 20;
  int count = 0;
  int precision = 0;  // 0 = from config / checkpoint
};

Config load_config(const Cli& cli) {
  Config cfg = cli.config_path.empty() ? Config::parse("")
                                       : Config::parse_file(cli.config_path);
  for (const std::string& kv : cli.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.check_known(kKnownKeys);

  std::string backend = cfg.get_str("kernels", "auto");
  kernels::Backend want = backend == "scalar"  ? kernels::Backend::scalar
                          : backend == "simd"  ? kernels::Backend::simd
                                               : kernels::Backend::automatic;
  if (backend != "auto" && backend != "scalar" && backend != "simd")
    throw ConfigError("kernels must be auto, scalar or simd");
  if (!kernels::select(want))
    throw ConfigError("kernel backend not available on this machine: " + backend);
  return cfg;
}

nn::TransformerConfig transformer_config(const Config& cfg,
                                         const graph::MetapathSet& phi) {
  nn::TransformerConfig t;
  t.dim = cfg.get_int("model.dim", 64);
  t.layers = static_cast<int>(cfg.get_int("model.layers", 2));
  t.heads = static_cast<int>(cfg.get_int("model.heads", 2));
  t.ffn_dim = t.dim * cfg.get_int("model.ffn_mult", 4);
  t.context = cfg.get_int("model.context", 256);
  t.max_hop = static_cast<int>(cfg.get_int("graph.depth", 2));
  t.psi_size = phi.psi_size();
  t.bias_per_layer = cfg.get_bool("model.bias_per_layer", true);
  t.bias_on_completion_keys = cfg.get_bool("model.bias_on_completion_keys", true);
  t.tie_heads = cfg.get_bool("model.tie_heads", true);
  return t;
}

train::TrainConfig train_config(const Config& cfg) {
  train::TrainConfig t;
  t.warmup_epochs = static_cast<int>(cfg.get_int("train.warmup_epochs", 10));
  t.total_epochs = static_cast<int>(cfg.get_int("train.total_epochs", 100));
  t.stage0_epochs = static_cast<int>(cfg.get_int("train.stage0_epochs", 5));
  t.lr = cfg.get_real("train.lr", 1e-3);
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 8));
  t.grad_clip = cfg.get_real("train.grad_clip", 1.0);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  t.metapaths = cfg.get_str("metapaths", graph::kDefaultMetapaths);
  std::string policy = cfg.get_str("train.policy", "per_node");
  if (policy == "per_node")
    t.policy = train::MetapathPolicy::per_node;
  else if (policy == "per_epoch")
    t.policy = train::MetapathPolicy::per_epoch;
  else
    throw ConfigError("train.policy must be per_node or per_epoch");
  t.freeze_backbone = cfg.get_bool("train.freeze_backbone", true);
  t.ego_depth = static_cast<int>(cfg.get_int("graph.depth", 2));
  t.ego_fanout = static_cast<int>(cfg.get_int("graph.fanout", 5));
  t.prompt_opt.n_end = static_cast<int>(cfg.get_int("prompt.n_end", 3));
  t.prompt_opt.n_mid = static_cast<int>(cfg.get_int("prompt.n_mid", 3));
  t.prompt_opt.mask_ratio = cfg.get_real("prompt.mask_ratio", 0.5);
  t.prompt_opt.max_tokens = cfg.get_int("model.context", 256);
  return t;
}

synth::SynthConfig synth_config(const Config& cfg) {
  synth::SynthConfig s;
  s.n_members = cfg.get_int("synth.n_members", 300);
  s.n_jobs = cfg.get_int("synth.n_jobs", 200);
  s.n_clusters = static_cast<int>(cfg.get_int("synth.n_clusters", 5));
  s.p_in = cfg.get_real("synth.p_in", 0.05);
  s.p_out = cfg.get_real("synth.p_out", 0.005);
  s.p_uu = cfg.get_real("synth.p_uu", 0.08);
  s.label_noise = cfg.get_real("synth.noise", 0.1);
  s.seed = static_cast<std::uint64_t>(
      cfg.get_int("synth.seed", cfg.get_int("seed", 0)));
  return s;
}

prompts::TaskSpec task_spec_for(const vocab::VocabLayout& layout,
                                std::string_view name) {
  for (const auto& spec : synth::standard_tasks(2))
    if (spec.name == name) {
      prompts::TaskSpec s = spec;
      s.n_classes = layout.tasks[layout.task_index(name)].n_classes;
      return s;
    }
  prompts::TaskSpec s;
  s.name = std::string(name);
  s.n_classes = layout.tasks[layout.task_index(name)].n_classes;
  s.feature = "bio";
  s.question = "The member could possess the following " + s.name + ": ";
  return s;
}

struct TaskSetup {
  std::string kind;  // "", "link", "node"
  graph::RelationType rel = graph::RelationType::member_job;
  std::string node_task;
  synth::LinkSplit link_split;
  synth::NodeSplit node_split;
  graph::HetGraph train_view;  // valid/test target links removed
};

TaskSetup setup_task(const Config& cfg, const graph::HetGraph& g) {
  TaskSetup setup;
  std::string task = cfg.get_str("task", "");
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  if (task.empty()) {
    setup.train_view = g;
    return setup;
  }
  if (task == "link_ui" || task == "link_uu") {
    setup.kind = "link";
    setup.rel = task == "link_ui" ? graph::RelationType::member_job
                                  : graph::RelationType::member_member;
    setup.link_split = synth::split_links(
        g, setup.rel, cfg.get_real("split.link_train", 0.6),
        cfg.get_real("split.link_valid", 0.2),
        cfg.get_real("split.link_test", 0.2),
        static_cast<int>(cfg.get_int("split.min_degree", 5)), seed);
    setup.train_view = synth::apply_link_split(g, setup.link_split);
  } else if (task.rfind("node_", 0) == 0) {
    setup.kind = "node";
    setup.node_task = task.substr(5);
    setup.node_split = synth::split_nodes(
        g, setup.node_task, cfg.get_real("split.node_train", 0.7),
        cfg.get_real("split.node_valid", 0.15),
        cfg.get_real("split.node_test", 0.15), seed);
    setup.train_view = g;
  } else {
    throw ConfigError("unknown task: " + task);
  }
  return setup;
}

void check_layout(const vocab::VocabLayout& layout, const graph::HetGraph& g) {
  if (layout.n_members != g.n_members || layout.n_jobs != g.n_jobs)
    throw ConfigError("checkpoint vocabulary does not match the graph");
}

void append_log(const std::string& path, const train::EpochStats& stats) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  out << stats.to_json() << "\n";
}

// ----------------------------------------------------------------- commands

int cmd_gen_data(const Cli& cli) {
  Config cfg = load_config(cli);
  synth::SynthConfig scfg = synth_config(cfg);
  synth::SynthResult result = synth::generate_graph(scfg);
  graph::save_graph(result.g, cli.out_path);
  if (!cli.truth_path.empty()) {
    std::ofstream out(cli.truth_path);
    out << synth::truth_json(result.truth) << "\n";
  }
  std::printf("wrote %s: %lld members, %lld jobs, %lld ui edges, %lld uu edges\n",
              cli.out_path.c_str(), static_cast<long long>(result.g.n_members),
              static_cast<long long>(result.g.n_jobs),
              static_cast<long long>(result.g.edge_count(graph::RelationType::member_job)),
              static_cast<long long>(result.g.edge_count(graph::RelationType::member_member)));
  return 0;
}

template <typename T>
int cmd_pretrain(const Cli& cli, const Config& cfg) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  TaskSetup setup = setup_task(cfg, g);
  const graph::HetGraph& view = setup.train_view;

  graph::MetapathSet phi = graph::MetapathSet::parse_list(
      cfg.get_str("metapaths", graph::kDefaultMetapaths));
  vocab::ByteTokenizer tok;
  vocab::VocabLayout layout =
      vocab::VocabLayout::build(tok, view, synth::tasks_from_labels(view));
  nn::ParameterStore<T> params;
  train::TrainConfig tcfg = train_config(cfg);
  params.build(layout, transformer_config(cfg, phi), tcfg.seed);

  train::Trainer<T> trainer(view, params, tcfg);
  std::vector<train::EpochStats> history;
  trainer.apply_freeze_policy("stage0");
  for (int e = 1; e <= tcfg.stage0_epochs; ++e) {
    auto stats = trainer.stage0_epoch(e);
    append_log(cli.log_path, stats);
    history.push_back(stats);
    std::printf("stage0 epoch %d: text loss %.4f\n", e, stats.feature_loss);
  }
  trainer.apply_freeze_policy("warmup");
  for (int e = 1; e <= tcfg.warmup_epochs; ++e) {
    auto stats = trainer.warmup_epoch(e);
    append_log(cli.log_path, stats);
    history.push_back(stats);
    std::printf("warmup epoch %d: feature %.4f structural %.4f (skipped %lld)\n",
                e, stats.feature_loss, stats.structural_loss,
                static_cast<long long>(stats.skipped));
  }
  if (!cli.plot_path.empty()) train::write_loss_svg(history, cli.plot_path);

  train::CheckpointMeta meta;
  meta.config_hash = cfg.hash_hex();
  meta.epoch = tcfg.warmup_epochs;
  meta.rng_state = tcfg.seed;
  train::save_checkpoint(params, meta, cli.ckpt_out);
  std::printf("saved checkpoint %s\n", cli.ckpt_out.c_str());
  return 0;
}

train::TaskBinding task_binding(const TaskSetup& setup,
                                const vocab::VocabLayout& layout) {
  if (setup.kind == "link") {
    train::LinkTask task;
    task.rel = setup.rel;
    task.observed = setup.rel == graph::RelationType::member_job
                        ? setup.train_view.ui_out
                        : setup.train_view.uu_out;
    return task;
  }
  if (setup.kind == "node") {
    train::NodeTask task;
    task.task_index = layout.task_index(setup.node_task);
    task.spec = task_spec_for(layout, setup.node_task);
    task.train_nodes = setup.node_split.train;
    return task;
  }
  return std::monostate{};
}

template <typename T>
int cmd_finetune(const Cli& cli, const Config& cfg) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  TaskSetup setup = setup_task(cfg, g);
  if (setup.kind.empty())
    throw ConfigError("finetune needs a task (set task = link_ui, link_uu or node_<name>)");
  const graph::HetGraph& view = setup.train_view;

  nn::ParameterStore<T> params;
  train::CheckpointMeta meta = train::load_checkpoint(params, cli.ckpt_in);
  check_layout(params.layout, g);
  train::TrainConfig tcfg = train_config(cfg);

  train::Trainer<T> trainer(view, params, tcfg);
  train::TaskBinding binding = task_binding(setup, params.layout);
  std::vector<train::EpochStats> history;
  trainer.apply_freeze_policy("interleaved");
  int first = static_cast<int>(meta.epoch) + 1;
  int count = cli.count > 0 ? cli.count : tcfg.total_epochs - tcfg.warmup_epochs;
  for (int e = first; e < first + count; ++e) {
    auto stats = trainer.interleaved_epoch(e, binding);
    append_log(cli.log_path, stats);
    history.push_back(stats);
    std::printf(
        "interleaved epoch %d: feature %.4f structural %.4f task %.4f\n", e,
        stats.feature_loss, stats.structural_loss, stats.task_loss);
  }
  if (!cli.plot_path.empty()) train::write_loss_svg(history, cli.plot_path);

  train::CheckpointMeta out_meta;
  out_meta.config_hash = cfg.hash_hex();
  out_meta.epoch = first + count - 1;
  out_meta.rng_state = tcfg.seed;
  train::save_checkpoint(params, out_meta, cli.ckpt_out);
  std::printf("saved checkpoint %s\n", cli.ckpt_out.c_str());
  return 0;
}

template <typename T>
int cmd_evaluate(const Cli& cli, const Config& cfg) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  TaskSetup setup = setup_task(cfg, g);
  if (setup.kind.empty()) throw ConfigError("evaluate needs a task");

  nn::ParameterStore<T> params;
  train::load_checkpoint(params, cli.ckpt_in);
  check_layout(params.layout, g);
  nn::Model<T> model(params);
  vocab::ByteTokenizer tok;
  prompts::PromptOptions popt = train_config(cfg).prompt_opt;
  prompts::PromptBuilder builder(setup.train_view, tok, params.layout, popt);
  graph::MetapathSet phi = graph::MetapathSet::parse_list(
      cfg.get_str("metapaths", graph::kDefaultMetapaths));

  eval::PredictOptions popts;
  popts.n_g = static_cast<int>(cfg.get_int("eval.n_g", 4));
  popts.ego_depth = static_cast<int>(cfg.get_int("graph.depth", 2));
  popts.ego_fanout = static_cast<int>(cfg.get_int("graph.fanout", 5));
  popts.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  bool use_test = cfg.get_str("eval.split", cli.split) == "test";

  eval::EvalReport report;
  if (setup.kind == "link") {
    report = eval::evaluate_links(model, setup.train_view, builder,
                                  setup.link_split, use_test, phi, popts);
  } else {
    std::size_t idx = params.layout.task_index(setup.node_task);
    report = eval::evaluate_nodes(model, g, builder, setup.node_split, use_test,
                                  idx, task_spec_for(params.layout, setup.node_task),
                                  phi, popts);
  }
  report.config_hash = cfg.hash_hex();
  std::string text = report.to_json();
  std::printf("%s\n", text.c_str());
  if (!cli.out_path.empty()) {
    std::ofstream out(cli.out_path);
    out << text << "\n";
  }
  return 0;
}

template <typename T>
int cmd_predict(const Cli& cli, const Config& cfg) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  TaskSetup setup = setup_task(cfg, g);
  if (setup.kind.empty()) throw ConfigError("predict needs a task");
  nn::ParameterStore<T> params;
  train::load_checkpoint(params, cli.ckpt_in);
  check_layout(params.layout, g);
  nn::Model<T> model(params);
  vocab::ByteTokenizer tok;
  prompts::PromptBuilder builder(setup.train_view, tok, params.layout,
                                 train_config(cfg).prompt_opt);
  graph::MetapathSet phi = graph::MetapathSet::parse_list(
      cfg.get_str("metapaths", graph::kDefaultMetapaths));
  eval::PredictOptions popts;
  popts.n_g = static_cast<int>(cfg.get_int("eval.n_g", 4));
  popts.ego_depth = static_cast<int>(cfg.get_int("graph.depth", 2));
  popts.ego_fanout = static_cast<int>(cfg.get_int("graph.fanout", 5));
  popts.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));

  graph::NodeId k = cli.node;
  if (setup.kind == "node") {
    std::size_t idx = params.layout.task_index(setup.node_task);
    std::int32_t pred = eval::predict_node(
        model, g, builder, k, idx, task_spec_for(params.layout, setup.node_task),
        phi, popts);
    std::printf("node %u %s -> class %d\n", k, setup.node_task.c_str(), pred);
  } else {
    const auto* nl = setup.link_split.find(k);
    std::vector<graph::NodeId> shown;
    if (nl) {
      shown = nl->train;
    } else {
      auto span = graph::neighbors(setup.train_view, k, setup.rel);
      shown.assign(span.begin(), span.end());
    }
    auto ranked = eval::predict_links(model, setup.train_view, builder, k,
                                      setup.rel, shown, cli.top_m, phi, popts);
    std::printf("node %u top-%d:", k, cli.top_m);
    for (graph::NodeId id : ranked) std::printf(" %u", id);
    std::printf("\n");
  }
  return 0;
}

template <typename T>
int cmd_export(const Cli& cli) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  nn::ParameterStore<T> params;
  train::load_checkpoint(params, cli.ckpt_in);
  check_layout(params.layout, g);
  eval::export_embeddings(params, g, cli.out_path);
  std::printf("wrote %s (%lld rows)\n", cli.out_path.c_str(),
              static_cast<long long>(g.node_count()));
  return 0;
}

int cmd_grad_check(const Cli& cli, int dim, int layers, int heads, int coords,
                   double eps) {
  if (cli.precision != 0 && cli.precision != 64) {
    std::fprintf(stderr, "grad-check requires --precision 64\n");
    return 2;
  }
  nn::TransformerConfig cfg;
  cfg.layers = layers;
  cfg.heads = heads;
  cfg.dim = dim;
  cfg.ffn_dim = 2 * dim;
  nn::GradCheckFixture<double> fixture(cfg);
  auto loss_fn = [&](nn::Tape<double>& tape) {
    return fixture.composite_loss(tape);
  };
  auto report =
      nn::gradient_check<double>(fixture.params, loss_fn, eps, coords, 1234);
  for (const auto& e : report.tensors)
    std::printf("%-28s %-12s max_rel_err %.3e\n", e.name.c_str(),
                nn::param_kind_name(e.kind), e.max_rel_err);
  std::printf("max relative error: %.6e\n", report.max_rel_err);
  bool ok = report.max_rel_err < 1e-4;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_dump_prompts(const Cli& cli, const Config& cfg) {
  graph::HetGraph g = graph::load_graph(cli.graph_path);
  TaskSetup setup = setup_task(cfg, g);
  const graph::HetGraph& view = setup.train_view;
  vocab::ByteTokenizer tok;
  vocab::VocabLayout layout =
      vocab::VocabLayout::build(tok, view, synth::tasks_from_labels(view));
  train::TrainConfig tcfg = train_config(cfg);
  prompts::PromptBuilder builder(view, tok, layout, tcfg.prompt_opt);
  graph::MetapathSet phi = graph::MetapathSet::parse_list(tcfg.metapaths);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!cli.out_path.empty()) {
    file.open(cli.out_path);
    out = &file;
  }

  graph::NodeId k = cli.node;
  g.check_id(k);
  int count = cli.count > 0 ? cli.count : 1;
  for (int i = 0; i < count; ++i) {
    std::uint64_t seed = derive_seed(tcfg.seed, k, static_cast<std::uint64_t>(i), "dump");
    auto ego = graph::sample_ego_graph(view, k, tcfg.ego_depth, tcfg.ego_fanout,
                                       seed);
    auto emit = [&](const std::optional<prompts::PromptInstance>& inst,
                    std::string_view kind) {
      if (inst) *out << prompts::debug_dump(*inst, tok, layout, kind) << "\n";
    };
    bool member = g.type_of(k) == graph::EntityType::member;
    if (cli.kind == "all" || cli.kind == "feature")
      emit(builder.feature_prompt(ego, k, member ? "bio" : "jd"), "feature");
    if (cli.kind == "all" || cli.kind == "first") {
      for (const auto& p : phi.paths)
        if (p.length() == 1 && p.compatible_with(g.type_of(k)))
          emit(builder.first_order_prompt(ego, k, p, seed), "first_order_" + p.abbrev);
    }
    if (cli.kind == "all" || cli.kind == "second") {
      for (const auto& p : phi.paths)
        if (p.length() == 2 && p.compatible_with(g.type_of(k)))
          emit(builder.higher_order_prompt(ego, k, p, seed), "higher_order_" + p.abbrev);
    }
    if ((cli.kind == "all" || cli.kind == "node") && member) {
      for (const auto& t : layout.tasks)
        emit(builder.node_task_prompt(ego, k, task_spec_for(layout, t.name)),
             "node_task_" + t.name);
    }
    if ((cli.kind == "all" || cli.kind == "link") && member) {
      auto obs = graph::neighbors(view, k, graph::RelationType::member_job);
      auto split = prompts::PromptBuilder::split_observed(
          obs, tcfg.prompt_opt.mask_ratio, seed);
      if (split) {
        auto banned_ego = graph::sample_ego_graph(view, k, tcfg.ego_depth,
                                                  tcfg.ego_fanout, seed,
                                                  split->heldout);
        emit(builder.link_task_prompt(banned_ego, k,
                                      graph::RelationType::member_job,
                                      split->shown),
             "link_task_ui");
      }
    }
  }
  return 0;
}

int precision_of(const Cli& cli, const Config& cfg, const std::string& ckpt) {
  if (cli.precision) return cli.precision;
  if (!ckpt.empty()) return train::checkpoint_dtype(ckpt) == "f64" ? 64 : 32;
  return static_cast<int>(cfg.get_int("precision", 32));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-oriented causal language model for job-marketplace graphs"};
  app.require_subcommand(1);
  Cli cli;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cli.config_path, "config file (key = value)");
    sub->add_option("--set", cli.overrides, "override: key=value")->take_all();
  };

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic graph");
  add_common(gen);
  gen->add_option("--out", cli.out_path, "graph JSONL path")->required();
  gen->add_option("--truth", cli.truth_path, "ground-truth sidecar JSON");

  auto* pre = app.add_subcommand("pretrain", "stage-0 text pass + warmup epochs");
  add_common(pre);
  pre->add_option("--graph", cli.graph_path)->required();
  pre->add_option("--out", cli.ckpt_out, "checkpoint path")->required();
  pre->add_option("--log", cli.log_path, "JSONL epoch-statistics log");
  pre->add_option("--plot", cli.plot_path, "SVG loss-curve path");
  pre->add_option("--precision", cli.precision)->check(CLI::IsMember({32, 64}));

  auto* fin = app.add_subcommand("finetune", "interleaved task epochs");
  add_common(fin);
  fin->add_option("--graph", cli.graph_path)->required();
  fin->add_option("--ckpt", cli.ckpt_in, "input checkpoint")->required();
  fin->add_option("--out", cli.ckpt_out, "output checkpoint")->required();
  fin->add_option("--epochs", cli.count, "override interleaved epoch count");
  fin->add_option("--log", cli.log_path);
  fin->add_option("--plot", cli.plot_path);

  auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on the task");
  add_common(ev);
  ev->add_option("--graph", cli.graph_path)->required();
  ev->add_option("--ckpt", cli.ckpt_in)->required();
  ev->add_option("--out", cli.out_path, "report JSON path");
  ev->add_option("--split", cli.split)->check(CLI::IsMember({"valid", "test"}));

  auto* pr = app.add_subcommand("predict", "predict for one node");
  add_common(pr);
  pr->add_option("--graph", cli.graph_path)->required();
  pr->add_option("--ckpt", cli.ckpt_in)->required();
  pr->add_option("--node", cli.node)->required();
  pr->add_option("--top", cli.top_m, "ranked list length for link tasks");

  auto* ex = app.add_subcommand("export-embeddings", "write node embeddings TSV");
  add_common(ex);
  ex->add_option("--graph", cli.graph_path)->required();
  ex->add_option("--ckpt", cli.ckpt_in)->required();
  ex->add_option("--out", cli.out_path)->required();

  int gc_dim = 16, gc_layers = 2, gc_heads = 2, gc_coords = 10;
  double gc_eps = 1e-5;
  auto* gc = app.add_subcommand("grad-check",
                                "finite-difference gradient verification");
  gc->add_option("--precision", cli.precision)->check(CLI::IsMember({32, 64}));
  gc->add_option("--dim", gc_dim);
  gc->add_option("--layers", gc_layers);
  gc->add_option("--heads", gc_heads);
  gc->add_option("--coords", gc_coords, "coordinates sampled per tensor");
  gc->add_option("--eps", gc_eps);

  auto* dp = app.add_subcommand("dump-prompts", "debug-render prompt instances");
  add_common(dp);
  dp->add_option("--graph", cli.graph_path)->required();
  dp->add_option("--node", cli.node)->required();
  dp->add_option("--kind", cli.kind)
      ->check(CLI::IsMember({"all", "feature", "first", "second", "node", "link"}));
  dp->add_option("--count", cli.count, "instances per kind");
  dp->add_option("--out", cli.out_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::printf("%s", app.help().c_str());
      return 0;
    }
    std::fprintf(stderr, "%s\n", e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(cli);
    if (gc->parsed())
      return cmd_grad_check(cli, gc_dim, gc_layers, gc_heads, gc_coords, gc_eps);

    Config cfg = load_config(cli);
    if (pre->parsed()) {
      int p = cli.precision ? cli.precision
                            : static_cast<int>(cfg.get_int("precision", 32));
      return p == 64 ? cmd_pretrain<double>(cli, cfg)
                     : cmd_pretrain<float>(cli, cfg);
    }
    if (fin->parsed())
      return precision_of(cli, cfg, cli.ckpt_in) == 64
                 ? cmd_finetune<double>(cli, cfg)
                 : cmd_finetune<float>(cli, cfg);
    if (ev->parsed())
      return precision_of(cli, cfg, cli.ckpt_in) == 64
                 ? cmd_evaluate<double>(cli, cfg)
                 : cmd_evaluate<float>(cli, cfg);
    if (pr->parsed())
      return precision_of(cli, cfg, cli.ckpt_in) == 64
                 ? cmd_predict<double>(cli, cfg)
                 : cmd_predict<float>(cli, cfg);
    if (ex->parsed())
      return precision_of(cli, cfg, cli.ckpt_in) == 64 ? cmd_export<double>(cli)
                                                       : cmd_export<float>(cli);
    if (dp->parsed()) return cmd_dump_prompts(cli, cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
