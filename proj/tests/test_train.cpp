#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "plm/synth.hpp"
#include "plm/train.hpp"
#include "test_util.hpp"

using namespace plm;
using namespace plm::train;
using graph::NodeId;

namespace {

nn::TransformerConfig tiny_model(int psi_size) {
  nn::TransformerConfig cfg;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.dim = 16;
  cfg.ffn_dim = 32;
  cfg.context = 256;
  cfg.psi_size = psi_size;
  return cfg;
}

TrainConfig tiny_train(std::uint64_t seed = 0) {
  TrainConfig cfg;
  cfg.warmup_epochs = 2;
  cfg.total_epochs = 4;
  cfg.stage0_epochs = 1;
  cfg.seed = seed;
  return cfg;
}

struct TrainFixture {
  synth::SynthResult synth_result;
  graph::HetGraph& g = synth_result.g;
  vocab::ByteTokenizer tok;
  vocab::VocabLayout layout;
  graph::MetapathSet phi = graph::MetapathSet::parse_list(graph::kDefaultMetapaths);
  nn::ParameterStore<float> params;

  explicit TrainFixture(std::uint64_t seed = 0) {
    synth::SynthConfig cfg;
    cfg.n_members = 40;
    cfg.n_jobs = 25;
    cfg.p_in = 0.3;
    cfg.p_out = 0.02;
    cfg.p_uu = 0.2;
    cfg.seed = 11;
    synth_result = synth::generate_graph(cfg);
    layout = vocab::VocabLayout::build(tok, g, synth::tasks_from_labels(g));
    params.build(layout, tiny_model(phi.psi_size()), seed);
  }
};

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("adam: zero gradient is a fixed point, frozen tensors never move") {
  TrainFixture f;
  Adam<float> adam(f.params, 1e-3f, 1.0f);
  auto snapshot = f.params.node_embed.data;
  f.params.zero_grads();
  adam.step(1.0f);
  CHECK(f.params.node_embed.data == snapshot);

  f.params.set_frozen(nn::ParamKind::node_embed, true);
  std::fill(f.params.node_embed.grad.begin(), f.params.node_embed.grad.end(), 1.0f);
  adam.step(1.0f);
  CHECK(f.params.node_embed.data == snapshot);
  // and the gradient buffer is cleared either way
  for (float g : f.params.node_embed.grad) CHECK(g == 0.0f);
}

TEST_CASE("adam: scalar quadratic converges to its minimum within 500 steps") {
  TrainFixture f;
  f.params.freeze_all_except({nn::ParamKind::attn_bias});
  Adam<float> adam(f.params, 1e-3f, 1.0f);
  float* x = &f.params.attn_bias.data[0];
  *x = 0.05f;
  const float target = 0.0f;
  for (int step = 0; step < 500; ++step) {
    f.params.zero_grads();
    f.params.attn_bias.grad[0] = 2.0f * (*x - target);
    adam.step(1.0f);
  }
  CHECK(std::abs(*x - target) < 1e-3f);
}

TEST_CASE("adam aborts on non-finite gradients naming the tensor") {
  TrainFixture f;
  Adam<float> adam(f.params, 1e-3f, 1.0f);
  f.params.node_embed.grad[3] = std::numeric_limits<float>::quiet_NaN();
  try {
    adam.step(1.0f);
    FAIL("expected an abort");
  } catch (const TrainError& e) {
    CHECK(std::string(e.what()).find("node_embed") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip is bit identical") {
  TrainFixture f(7);
  std::string path = temp_path("plm_test_ckpt.bin");
  CheckpointMeta meta;
  meta.config_hash = "deadbeef";
  meta.epoch = 12;
  meta.rng_state = 998877;
  save_checkpoint(f.params, meta, path);
  CHECK(checkpoint_dtype(path) == "f32");

  nn::ParameterStore<float> loaded;
  CheckpointMeta back = load_checkpoint(loaded, path);
  CHECK(back.epoch == 12);
  CHECK(back.config_hash == "deadbeef");
  CHECK(back.rng_state == 998877);
  REQUIRE(loaded.entries.size() == f.params.entries.size());
  for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
    CHECK(loaded.entries[i].name == f.params.entries[i].name);
    CHECK(loaded.entries[i].tensor->data == f.params.entries[i].tensor->data);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects corruption") {
  TrainFixture f;
  std::string path = temp_path("plm_test_ckpt2.bin");
  save_checkpoint(f.params, CheckpointMeta{}, path);

  // truncated payload
  auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 64);
  nn::ParameterStore<float> loaded;
  CHECK_THROWS_AS(load_checkpoint(loaded, path), TrainError);

  // bad magic / version tag
  save_checkpoint(f.params, CheckpointMeta{}, path);
  {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(7);
    fs.put('9');
  }
  CHECK_THROWS_AS(load_checkpoint(loaded, path), TrainError);

  // wrong dtype request
  save_checkpoint(f.params, CheckpointMeta{}, path);
  nn::ParameterStore<double> wrong;
  CHECK_THROWS_AS(load_checkpoint(wrong, path), TrainError);
  std::filesystem::remove(path);
}

TEST_CASE("stage0: one epoch beats the uniform byte baseline") {
  TrainFixture f;
  TrainConfig cfg = tiny_train();
  Trainer<float> trainer(f.g, f.params, cfg);
  trainer.apply_freeze_policy("stage0");
  EpochStats stats = trainer.stage0_epoch(1);
  CHECK(stats.feature_count >= 60);
  CHECK(stats.feature_loss < std::log(257.0));
  CHECK(stats.feature_loss > 0.0);
}

TEST_CASE("stage0 freeze: backbone bit-identical through warmup and interleaving") {
  TrainFixture f;
  TrainConfig cfg = tiny_train();
  REQUIRE(cfg.freeze_backbone);
  Trainer<float> trainer(f.g, f.params, cfg);
  trainer.apply_freeze_policy("stage0");
  trainer.stage0_epoch(1);

  std::vector<std::vector<float>> backbone;
  for (auto& e : f.params.entries)
    if (e.kind == nn::ParamKind::backbone) backbone.push_back(e.tensor->data);
  std::vector<std::vector<float>> heads;
  for (auto& e : f.params.entries)
    if (e.kind == nn::ParamKind::class_head) heads.push_back(e.tensor->data);

  trainer.apply_freeze_policy("warmup");
  trainer.warmup_epoch(1);
  trainer.warmup_epoch(2);

  LinkTask task;
  task.rel = graph::RelationType::member_job;
  task.observed = f.g.ui_out;
  trainer.apply_freeze_policy("interleaved");
  trainer.interleaved_epoch(3, task);

  std::size_t bi = 0, hi = 0;
  for (auto& e : f.params.entries) {
    if (e.kind == nn::ParamKind::backbone)
      CHECK(e.tensor->data == backbone[bi++]);
    if (e.kind == nn::ParamKind::class_head)
      CHECK(e.tensor->data == heads[hi++]);
  }
  // the hot set did move
  bool moved = false;
  for (float v : f.params.attn_bias.data) moved |= v != 0.0f;
  CHECK(moved);
}

TEST_CASE("warmup reduces the feature loss over epochs") {
  TrainFixture f;
  TrainConfig cfg = tiny_train();
  cfg.warmup_epochs = 10;
  cfg.total_epochs = 10;
  Trainer<float> trainer(f.g, f.params, cfg);
  trainer.apply_freeze_policy("stage0");
  trainer.stage0_epoch(1);
  trainer.apply_freeze_policy("warmup");
  EpochStats first = trainer.warmup_epoch(1);
  EpochStats last;
  for (int e = 2; e <= 10; ++e) last = trainer.warmup_epoch(e);
  CHECK(first.feature_count > 0);
  CHECK(first.structural_count > 0);
  CHECK(last.feature_loss < first.feature_loss);
  CHECK(std::isfinite(last.structural_loss));
}

TEST_CASE("interleaved epoch reports all three objectives and is deterministic") {
  auto run = [](std::uint64_t seed) {
    TrainFixture f(seed);
    TrainConfig cfg = tiny_train(seed);
    Trainer<float> trainer(f.g, f.params, cfg);
    trainer.apply_freeze_policy("warmup");
    trainer.warmup_epoch(1);
    LinkTask task;
    task.rel = graph::RelationType::member_job;
    task.observed = f.g.ui_out;
    trainer.apply_freeze_policy("interleaved");
    EpochStats stats = trainer.interleaved_epoch(2, task);
    return std::pair(stats, f.params.node_embed.data);
  };
  auto [s1, z1] = run(5);
  auto [s2, z2] = run(5);
  CHECK(s1.feature_count > 0);
  CHECK(s1.structural_count > 0);
  CHECK(s1.task_count > 0);
  CHECK(s1.feature_loss == s2.feature_loss);
  CHECK(s1.task_loss == s2.task_loss);
  CHECK(z1 == z2);  // bit-identical parameters
  auto [s3, z3] = run(6);
  CHECK(z1 != z3);

  // node-task interleaving drives the class head
  TrainFixture f(1);
  TrainConfig cfg = tiny_train(1);
  Trainer<float> trainer(f.g, f.params, cfg);
  NodeTask task;
  task.task_index = f.layout.task_index("skill");
  task.spec = synth::standard_tasks(5)[0];
  auto split = synth::split_nodes(f.g, "skill", 0.7, 0.15, 0.15, 1);
  task.train_nodes = split.train;
  trainer.apply_freeze_policy("interleaved");
  EpochStats stats = trainer.interleaved_epoch(1, task);
  CHECK(stats.task_count > 0);
  CHECK(std::isfinite(stats.task_loss));
}

TEST_CASE("epoch statistics serialize to json lines") {
  EpochStats stats;
  stats.epoch = 3;
  stats.phase = "warmup";
  stats.feature_loss = 1.5;
  std::string line = stats.to_json();
  CHECK(line.find("\"epoch\":3") != std::string::npos);
  CHECK(line.find("\"phase\":\"warmup\"") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("loss svg writer emits polylines") {
  std::vector<EpochStats> history(3);
  for (int i = 0; i < 3; ++i) {
    history[i].epoch = i + 1;
    history[i].feature_loss = 3.0 - i;
    history[i].structural_loss = 2.0 - 0.5 * i;
  }
  std::string path = temp_path("plm_loss.svg");
  write_loss_svg(history, path);
  std::ifstream in(path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("polyline") != std::string::npos);
  std::filesystem::remove(path);
}
