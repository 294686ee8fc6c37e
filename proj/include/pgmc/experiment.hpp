#pragma once

// End-to-end experiment: dataset assembly, module wiring per ablation
// variant, the scheduled run, and report/checkpoint emission.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgmc/config.hpp"
#include "pgmc/dataio.hpp"
#include "pgmc/datagen.hpp"
#include "pgmc/eval.hpp"
#include "pgmc/pipeline.hpp"
#include "pgmc/report.hpp"
#include "pgmc/tensorio.hpp"

namespace pgmc {

namespace detail {

inline std::optional<EdgeSpec> edge_between(const ModuleGraph& graph, const std::string& a,
                                            const std::string& b) {
  for (const auto& e : graph.edges) {
    if ((e.module_a == a && e.module_b == b) || (e.module_a == b && e.module_b == a)) return e;
  }
  return std::nullopt;
}

inline TensorMap vae_tensors(const VaeState& s) {
  TensorMap map;
  auto put = [&](const std::string& name, const Eigen::MatrixXd& m) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
    }
    map.emplace(name, std::move(t));
  };
  auto put_vec = [&](const std::string& name, const Eigen::VectorXd& v) {
    Tensor t;
    t.shape = {static_cast<std::uint64_t>(v.size())};
    t.data.assign(v.data(), v.data() + v.size());
    map.emplace(name, std::move(t));
  };
  put("enc_hidden.w", s.enc_hidden.w);
  put_vec("enc_hidden.b", s.enc_hidden.b);
  put("enc_mean.w", s.enc_mean.w);
  put_vec("enc_mean.b", s.enc_mean.b);
  put("enc_logvar.w", s.enc_logvar.w);
  put_vec("enc_logvar.b", s.enc_logvar.b);
  put("dec_hidden.w", s.dec_hidden.w);
  put_vec("dec_hidden.b", s.dec_hidden.b);
  put("dec_logits.w", s.dec_logits.w);
  put_vec("dec_logits.b", s.dec_logits.b);
  return map;
}

inline nlohmann::json gmm_checkpoint(const GmmState& s) {
  nlohmann::json comps = nlohmann::json::array();
  for (int k = 0; k < s.components; ++k) {
    nlohmann::json cov = nlohmann::json::array();
    const auto& sigma = s.covariances[static_cast<std::size_t>(k)];
    for (Eigen::Index r = 0; r < sigma.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < sigma.cols(); ++c) row.push_back(sigma(r, c));
      cov.push_back(row);
    }
    const auto& mu = s.means[static_cast<std::size_t>(k)];
    comps.push_back({{"mean", std::vector<double>(mu.data(), mu.data() + mu.size())},
                     {"covariance", cov},
                     {"weight", s.weights(k)}});
  }
  return nlohmann::json{{"components", comps},
                        {"assignments", s.assignments},
                        {"hyper", {{"r0", s.r0},
                                   {"nu0", s.nu0},
                                   {"m0", std::vector<double>(s.m0.data(), s.m0.data() + s.m0.size())},
                                   {"weight_concentration", s.weight_concentration}}},
                        {"dim", s.dim},
                        {"k", s.components}};
}

inline nlohmann::json lda_checkpoint(const LdaState& s) {
  return nlohmann::json{{"k", s.topics},
                        {"alpha", s.alpha},
                        {"beta", s.beta},
                        {"vocabulary", s.vocabulary},
                        {"topic_word_counts", s.topic_word_counts},
                        {"topic_totals", s.topic_totals},
                        {"doc_topic_counts", s.doc_topic_counts}};
}

inline nlohmann::json asr_checkpoint(const AsrState& s) {
  return nlohmann::json{{"inventory", s.lm.inventory()},
                        {"lm_counts", s.lm.raw_counts()},
                        {"lm_delta", s.lm.smoothing()},
                        {"channel", {{"p_sub", s.channel.p_sub},
                                     {"p_ins", s.channel.p_ins},
                                     {"p_del", s.channel.p_del}}}};
}

}  // namespace detail

struct ExperimentSetup {
  PairedDataset dataset;
  ModuleGraph graph;
};

// Assembles the paired dataset for a config: IDX files when paths are given,
// otherwise locally generated images; utterances from a corpus file when
// configured, otherwise synthesized through the channel.
inline PairedDataset assemble_dataset(const ExperimentConfig& cfg) {
  Rng data_rng(derive_seed(cfg.seed, "data"));
  Eigen::MatrixXd images;
  std::vector<int> labels;
  if (!cfg.data_images.empty()) {
    auto loaded = load_mnist(cfg.data_images, cfg.data_labels);
    images = std::move(loaded.first);
    labels = std::move(loaded.second);
  } else {
    auto generated = generate_images(cfg.n_pairs, ImageJitter{}, data_rng);
    images = std::move(generated.first);
    labels = std::move(generated.second);
  }
  const SyllableChannel channel = SyllableChannel::standard(cfg.asr_p_sub, cfg.asr_p_ins,
                                                            cfg.asr_p_del);
  if (!cfg.data_corpus.empty()) {
    const auto utterances = load_corpus(cfg.data_corpus, cfg.data_corpus_labels);
    // Pair by digit: each chosen image consumes the next unused utterance of
    // its digit.
    std::vector<std::vector<std::size_t>> pools(10);
    for (std::size_t i = 0; i < utterances.size(); ++i) {
      if (utterances[i].true_digit < 0 || utterances[i].true_digit > 9) {
        throw FormatError("corpus label out of range at line " + std::to_string(i + 1));
      }
      pools[static_cast<std::size_t>(utterances[i].true_digit)].push_back(i);
    }
    PairedDataset ds = make_pairs(images, labels, cfg.n_pairs, channel, data_rng);
    std::vector<std::size_t> cursor(10, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto& pool = pools[static_cast<std::size_t>(ds.labels[i])];
      auto& cur = cursor[static_cast<std::size_t>(ds.labels[i])];
      if (cur >= pool.size()) {
        throw InputError("corpus has too few utterances for digit " +
                         std::to_string(ds.labels[i]));
      }
      ds.utterances[i] = utterances[pool[cur++]];
    }
    ds.seed = cfg.seed;
    return ds;
  }
  PairedDataset ds = make_pairs(images, labels, cfg.n_pairs, channel, data_rng);
  ds.seed = cfg.seed;
  return ds;
}

// Builds the scheduler with per-variant communication switches and runs it.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       PairedDataset* dataset_out = nullptr) {
  ExperimentReport report;
  report.config_echo = config_to_json(cfg);

  PairedDataset dataset = assemble_dataset(cfg);
  const std::size_t n = dataset.size();
  ModuleGraph graph = build_graph(cfg.graph);

  const bool comm_vae_gmm =
      cfg.variant == Variant::kVaeGmmLdaAsr || cfg.variant == Variant::kFull;
  const bool comm_lda_asr = cfg.variant != Variant::kNone;
  const bool comm_gmm_lda = cfg.variant == Variant::kFull;

  const auto z1_edge = detail::edge_between(graph, "vae", "gmm");
  const auto w_edge = detail::edge_between(graph, "lda", "asr");
  const auto gmm_relay = detail::edge_between(graph, "gmm", ModuleGraph::relay_id("z2"));
  const auto lda_relay = detail::edge_between(graph, ModuleGraph::relay_id("z2"), "lda");
  if (!z1_edge || !w_edge || !gmm_relay || !lda_relay) {
    throw ConfigError("experiment: graph does not contain the reference connections");
  }

  DegeneracyFlag combine_flag;
  DegeneracyFlag resample_flag;

  VaeConfig vae_cfg;
  vae_cfg.input_dim = static_cast<int>(dataset.images.cols());
  vae_cfg.hidden_dim = cfg.vae_hidden;
  vae_cfg.latent_dim = cfg.vae_latent;
  vae_cfg.learning_rate = cfg.vae_learning_rate;

  std::vector<std::unique_ptr<ModuleRuntime>> modules;
  modules.push_back(std::make_unique<VaeModule>(
      "vae", dataset.images, vae_cfg, cfg.vae_epochs, cfg.vae_batch, comm_vae_gmm,
      z1_edge->variable, derive_seed(cfg.seed, "vae")));
  modules.push_back(std::make_unique<GmmModule>(
      "gmm", cfg.k, cfg.vae_latent, cfg.gmm_sweeps, comm_gmm_lda, z1_edge->variable,
      gmm_relay->variable, cfg.gmm_r0, cfg.gmm_weight_concentration,
      derive_seed(cfg.seed, "gmm"), &combine_flag));
  modules.push_back(std::make_unique<LdaModule>(
      "lda", n, cfg.k, cfg.l, cfg.lda_sweeps, cfg.lda_alpha, cfg.lda_beta,
      cfg.lda_mixture_of_unigrams, comm_gmm_lda, comm_lda_asr, w_edge->variable,
      lda_relay->variable, derive_seed(cfg.seed, "lda"), &resample_flag));
  AsrState asr_state = AsrState::standard(cfg.asr_p_sub, cfg.asr_p_ins, cfg.asr_p_del,
                                          cfg.asr_lm_delta, derive_seed(cfg.seed, "asr"));
  asr_state.beam_width = cfg.asr_beam_width;
  asr_state.max_deletions = cfg.asr_max_deletions;
  modules.push_back(std::make_unique<AsrModule>("asr", dataset.utterances, std::move(asr_state),
                                                cfg.l, comm_lda_asr, w_edge->variable,
                                                derive_seed(cfg.seed, "asr-rng")));
  modules.push_back(std::make_unique<TtotModule>(ModuleGraph::relay_id("z2"), n, cfg.k,
                                                 gmm_relay->variable, lda_relay->variable));

  Scheduler scheduler(graph, std::move(modules));
  auto* vae = scheduler.module_as<VaeModule>("vae");
  auto* gmm = scheduler.module_as<GmmModule>("gmm");
  auto* lda = scheduler.module_as<LdaModule>("lda");
  auto* asr = scheduler.module_as<AsrModule>("asr");
  gmm->seed_assignments(n);

  const auto metrics = [&](int update) {
    ReportRow row;
    row.update = update;
    row.gmm_accuracy = best_map_accuracy(gmm->assignments(), dataset.labels);
    row.lda_accuracy = best_map_accuracy(lda->assignments(), dataset.labels);
    row.mean_elbo = vae->current_mean_elbo();
    return row;
  };

  try {
    scheduler.run_schedule(cfg.n_updates, metrics, report);
  } catch (const std::exception& e) {
    report.failed = true;
    report.failure = e.what();
  }

  // Final summaries.
  if (!report.rows.empty()) {
    report.final_gmm_accuracy = report.rows.back().gmm_accuracy;
    report.final_lda_accuracy = report.rows.back().lda_accuracy;
  }
  report.combine_degeneracies = combine_flag.events;
  report.resample_degeneracies = resample_flag.events;
  report.covariance_regularizations = gmm->state().regularization_events;

  // Stereotype per class: the selected words of the documents whose class
  // posterior peaks there, with the majority digit for reference.
  const auto lda_assign = lda->assignments();
  const auto& selected = lda->selected_words();
  if (!selected.empty()) {
    for (int c = 0; c < cfg.k; ++c) {
      std::vector<std::string> words;
      std::vector<std::size_t> digit_histogram(10, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (lda_assign[i] != c) continue;
        words.push_back(selected[i]);
        digit_histogram[static_cast<std::size_t>(dataset.labels[i])] += 1;
      }
      if (words.empty()) continue;
      StereotypeEntry entry;
      entry.class_index = c;
      entry.word = stereotype(words);
      entry.member_count = words.size();
      entry.majority_digit = static_cast<int>(
          std::max_element(digit_histogram.begin(), digit_histogram.end()) -
          digit_histogram.begin());
      entry.canonical = join_syllables(pronunciation_of(entry.majority_digit).syllables);
      report.stereotypes.push_back(std::move(entry));
    }
  }

  // Latent-space view of the final encoder.
  if (n >= 3) {
    report.pca = pca2(vae->latent_rows());
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    write_report_csv(report, cfg.out_dir + "/report.csv");
    write_summary_json(report, cfg.out_dir + "/summary.json");
    write_stereotypes_csv(report, cfg.out_dir + "/stereotypes.csv");
    write_pca_csv(report, cfg.out_dir + "/pca.csv", dataset.labels);
    fs::create_directories(cfg.out_dir + "/checkpoints");
    save_tensors(cfg.out_dir + "/checkpoints/vae.tensors", detail::vae_tensors(vae->state()));
    std::ofstream(cfg.out_dir + "/checkpoints/gmm.json")
        << detail::gmm_checkpoint(gmm->state()).dump(2) << '\n';
    std::ofstream(cfg.out_dir + "/checkpoints/lda.json")
        << detail::lda_checkpoint(lda->state()).dump(2) << '\n';
    std::ofstream(cfg.out_dir + "/checkpoints/asr.json")
        << detail::asr_checkpoint(asr->state()).dump(2) << '\n';
  }

  if (dataset_out) *dataset_out = std::move(dataset);
  return report;
}

}  // namespace pgmc
