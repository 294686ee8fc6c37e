#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pgmc/config.hpp"
#include "pgmc/experiment.hpp"
#include "pgmc/pipeline.hpp"

using pgmc::ExperimentConfig;
using pgmc::Message;
using pgmc::MessageBus;
using pgmc::Variant;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pgmc_pipe_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ExperimentConfig small_config() {
  auto cfg = ExperimentConfig::with_reference_graph();
  cfg.n_pairs = 40;
  cfg.n_updates = 2;
  cfg.vae_epochs = 2;
  cfg.vae_batch = 40;
  cfg.vae_hidden = 16;
  cfg.gmm_sweeps = 3;
  cfg.lda_sweeps = 5;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("bus: messages are keyed by variable and sender") {
  MessageBus bus;
  bus.advance_hop();
  Message m;
  m.payload = pgmc::CategoricalPerDatum{pgmc::Categorical::uniform(2)};
  bus.publish("z", "alpha", m);
  CHECK(bus.consume("z", "alpha") == nullptr);  // own message is not returned
  REQUIRE(bus.consume("z", "beta") != nullptr);
  CHECK(bus.consume("z", "beta")->sender == "alpha");
  CHECK(bus.consume("missing", "beta") == nullptr);
}

TEST_CASE("bus: a message from the future trips the epoch guard") {
  MessageBus bus;
  bus.advance_hop();
  Message m;
  m.payload = pgmc::CategoricalPerDatum{pgmc::Categorical::uniform(2)};
  m.epoch = 99;
  bus.publish("z", "alpha", m);  // publish stamps the current hop
  CHECK_NOTHROW(bus.consume("z", "beta"));
}

TEST_CASE("scheduler: module failures abort with module id and update index") {
  pgmc::GraphConfig gc;
  gc.modules = {{"boom", true}};
  gc.update_order = {"boom"};
  const auto graph = pgmc::build_graph(gc);

  struct Exploder : pgmc::ModuleRuntime {
    Exploder() : ModuleRuntime("boom") {}
    void update(MessageBus&) override { throw pgmc::InputError("kapow"); }
  };
  std::vector<std::unique_ptr<pgmc::ModuleRuntime>> modules;
  modules.push_back(std::make_unique<Exploder>());
  pgmc::Scheduler scheduler(graph, std::move(modules));
  pgmc::ExperimentReport report;
  try {
    scheduler.run_schedule(3, [](int u) { return pgmc::ReportRow{u, 0, 0, 0}; }, report);
    FAIL("expected abort");
  } catch (const pgmc::InputError& e) {
    const std::string what = e.what();
    CHECK(what.find("boom") != std::string::npos);
    CHECK(what.find("update 1") != std::string::npos);
  }
  CHECK(report.rows.size() == 1);  // initial row flushed before the failure
}

TEST_CASE("pipeline: zero updates yields only the initial metrics row") {
  auto cfg = small_config();
  cfg.n_updates = 0;
  const auto report = pgmc::run_experiment(cfg);
  REQUIRE_FALSE(report.failed);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].update == 0);
}

TEST_CASE("pipeline: report has n_updates + 1 rows and is deterministic") {
  TempDir dir_a, dir_b;
  auto cfg = small_config();
  cfg.out_dir = dir_a.file("run");
  const auto report_a = pgmc::run_experiment(cfg);
  REQUIRE_FALSE(report_a.failed);
  REQUIRE(report_a.rows.size() == 3);

  cfg.out_dir = dir_b.file("run");
  const auto report_b = pgmc::run_experiment(cfg);
  CHECK(slurp(dir_a.file("run") + "/report.csv") == slurp(dir_b.file("run") + "/report.csv"));
  CHECK(slurp(dir_a.file("run") + "/summary.json") == slurp(dir_b.file("run") + "/summary.json"));

  // Files exist and parse.
  const auto summary = nlohmann::json::parse(slurp(dir_a.file("run") + "/summary.json"));
  CHECK(summary["config"]["seed"] == 11);
  CHECK(std::filesystem::exists(dir_a.file("run") + "/checkpoints/vae.tensors"));
  CHECK(std::filesystem::exists(dir_a.file("run") + "/checkpoints/gmm.json"));
  CHECK(std::filesystem::exists(dir_a.file("run") + "/pca.csv"));
  CHECK(std::filesystem::exists(dir_a.file("run") + "/stereotypes.csv"));

  // CSV header + row shape.
  const auto csv = slurp(dir_a.file("run") + "/report.csv");
  CHECK(csv.rfind("update,gmm_accuracy,lda_accuracy,mean_elbo\n", 0) == 0);
}

TEST_CASE("pipeline: all four variants run the same traffic pattern") {
  for (Variant v : {Variant::kNone, Variant::kLdaAsr, Variant::kVaeGmmLdaAsr, Variant::kFull}) {
    auto cfg = small_config();
    cfg.n_updates = 1;
    cfg.variant = v;
    const auto report = pgmc::run_experiment(cfg);
    REQUIRE_FALSE(report.failed);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows.back().gmm_accuracy >= 0.0);
    CHECK(report.rows.back().lda_accuracy >= 0.0);
  }
}

TEST_CASE("pipeline: variant none and full share everything but the variant field") {
  auto cfg_none = small_config();
  cfg_none.variant = Variant::kNone;
  auto cfg_full = small_config();
  cfg_full.variant = Variant::kFull;
  auto a = pgmc::config_to_json(cfg_none);
  auto b = pgmc::config_to_json(cfg_full);
  CHECK(a["variant"] != b["variant"]);
  a.erase("variant");
  b.erase("variant");
  CHECK(a == b);

  // Same seed produces the same dataset regardless of variant.
  const auto ds_none = pgmc::assemble_dataset(cfg_none);
  const auto ds_full = pgmc::assemble_dataset(cfg_full);
  CHECK(ds_none.labels == ds_full.labels);
  CHECK(ds_none.images == ds_full.images);
  for (std::size_t i = 0; i < ds_none.size(); ++i) {
    CHECK(ds_none.utterances[i].observed_syllables == ds_full.utterances[i].observed_syllables);
  }
}

TEST_CASE("pipeline: corpus files can supply the utterances") {
  TempDir dir;
  auto cfg = small_config();
  // Write a corpus with enough utterances of each digit.
  const auto channel = pgmc::SyllableChannel::standard();
  pgmc::Rng rng(12);
  std::vector<pgmc::Utterance> utterances;
  for (int i = 0; i < 120; ++i) utterances.push_back(pgmc::synthesize(i % 10, channel, rng));
  pgmc::save_corpus(dir.file("c.txt"), dir.file("c.labels"), utterances);
  cfg.data_corpus = dir.file("c.txt");
  cfg.data_corpus_labels = dir.file("c.labels");
  const auto ds = pgmc::assemble_dataset(cfg);
  REQUIRE(ds.size() == cfg.n_pairs);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] == ds.utterances[i].true_digit);
  }
}
