// Command-line experiment runner: `run` executes a configured pipeline,
// `eval` re-prints a finished run's summary, `gen-data` writes the local
// image/corpus files the experiments consume.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgmc/config.hpp"
#include "pgmc/dataio.hpp"
#include "pgmc/datagen.hpp"
#include "pgmc/experiment.hpp"

namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int run_command(const std::string& config_path, const std::string& variant,
                const std::string& seed_list, const std::string& out_dir) {
  pgmc::ExperimentConfig base = pgmc::load_config(config_path);
  if (!variant.empty()) base.variant = pgmc::variant_from_string(variant);
  if (!out_dir.empty()) base.out_dir = out_dir;

  std::vector<std::uint64_t> seeds;
  if (!seed_list.empty()) {
    for (const auto& tok : pgmc::detail::split_list(seed_list)) {
      seeds.push_back(std::stoull(tok));
    }
  } else {
    seeds.push_back(base.seed);
  }

  std::vector<double> gmm_acc, lda_acc, pca_sum;
  bool any_failed = false;
  for (std::uint64_t seed : seeds) {
    pgmc::ExperimentConfig cfg = base;
    cfg.seed = seed;
    if (seeds.size() > 1 && !base.out_dir.empty()) {
      cfg.out_dir = base.out_dir + "/seed_" + std::to_string(seed);
    }
    std::cout << "running variant=" << pgmc::to_string(cfg.variant) << " seed=" << seed
              << " pairs=" << cfg.n_pairs << " updates=" << cfg.n_updates << std::endl;
    const pgmc::ExperimentReport report = pgmc::run_experiment(cfg);
    if (report.failed) {
      std::cerr << "run failed: " << report.failure << std::endl;
      any_failed = true;
      continue;
    }
    std::printf("  final: gmm %.1f%%  lda %.1f%%  pca [%.3f, %.3f]\n",
                report.final_gmm_accuracy, report.final_lda_accuracy,
                report.pca.variance_proportions[0], report.pca.variance_proportions[1]);
    gmm_acc.push_back(report.final_gmm_accuracy);
    lda_acc.push_back(report.final_lda_accuracy);
    pca_sum.push_back(report.pca.variance_proportions[0] + report.pca.variance_proportions[1]);
  }
  if (gmm_acc.empty()) return 1;
  if (seeds.size() > 1) {
    nlohmann::json sweep{{"seeds", seeds},
                         {"median_gmm_accuracy", median(gmm_acc)},
                         {"median_lda_accuracy", median(lda_acc)},
                         {"median_pca_sum", median(pca_sum)}};
    std::cout << "sweep medians: gmm " << median(gmm_acc) << "%  lda " << median(lda_acc)
              << "%  pca-sum " << median(pca_sum) << std::endl;
    if (!base.out_dir.empty()) {
      std::ofstream(base.out_dir + "/sweep.json") << sweep.dump(2) << '\n';
    }
  }
  return any_failed ? 1 : 0;
}

int eval_command(const std::string& report_dir) {
  const std::string summary_path = report_dir + "/summary.json";
  std::ifstream in(summary_path);
  if (!in) {
    std::cerr << "no summary at " << summary_path << std::endl;
    return 1;
  }
  nlohmann::json summary;
  in >> summary;
  std::printf("final accuracy: gmm %.1f%%  lda %.1f%%\n",
              summary["final"]["gmm_accuracy"].get<double>(),
              summary["final"]["lda_accuracy"].get<double>());
  std::printf("pca variance proportions: [%.3f, %.3f]\n",
              summary["pca_variance_proportions"][0].get<double>(),
              summary["pca_variance_proportions"][1].get<double>());
  std::printf("stereotypes:\n");
  for (const auto& s : summary["stereotypes"]) {
    std::printf("  class %2d (digit %d, %4zu members): '%s'  canonical '%s'\n",
                s["class"].get<int>(), s["majority_digit"].get<int>(),
                s["members"].get<std::size_t>(), s["stereotype"].get<std::string>().c_str(),
                s["canonical"].get<std::string>().c_str());
  }
  if (summary.value("failed", false)) {
    std::printf("run failed: %s\n", summary.value("failure", std::string()).c_str());
    return 1;
  }
  return 0;
}

int gen_data_command(const std::string& out_dir, std::size_t n, std::uint64_t seed,
                     bool with_corpus, double p_sub, double p_ins, double p_del) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  pgmc::Rng rng(pgmc::derive_seed(seed, "gen-data"));
  auto [images, labels] = pgmc::generate_images(n, pgmc::ImageJitter{}, rng);
  pgmc::save_idx_images(out_dir + "/images.idx3", images, 28, 28);
  pgmc::save_idx_labels(out_dir + "/labels.idx1", labels);
  std::cout << "wrote " << n << " images to " << out_dir << "/images.idx3" << std::endl;
  if (with_corpus) {
    const auto channel = pgmc::SyllableChannel::standard(p_sub, p_ins, p_del);
    std::vector<pgmc::Utterance> utterances;
    utterances.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      utterances.push_back(pgmc::synthesize(labels[i], channel, rng));
    }
    pgmc::save_corpus(out_dir + "/corpus.txt", out_dir + "/corpus.labels", utterances);
    std::cout << "wrote corpus to " << out_dir << "/corpus.txt" << std::endl;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"composable generative-model pipelines"};
  app.require_subcommand(1);

  std::string config_path, variant, seeds, out_dir;
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("--config", config_path, "pipeline config file")->required();
  run->add_option("--variant", variant, "override variant: none|lda_asr|vae_gmm__lda_asr|full");
  run->add_option("--seed", seeds, "override seed, or comma list for a sweep");
  run->add_option("--out", out_dir, "report output directory");

  std::string report_dir;
  auto* eval = app.add_subcommand("eval", "print the summary of a finished run");
  eval->add_option("--report", report_dir, "report directory of a finished run")->required();

  std::string gen_out = "data";
  std::size_t gen_n = 3000;
  std::uint64_t gen_seed = 7;
  bool gen_corpus = false;
  double gen_p_sub = 0.10, gen_p_ins = 0.03, gen_p_del = 0.03;
  auto* gen = app.add_subcommand("gen-data", "write local IDX image files (and optional corpus)");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--n", gen_n, "number of images");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_flag("--corpus", gen_corpus, "also write a synthesized corpus + label sidecar");
  gen->add_option("--p-sub", gen_p_sub, "corpus substitution probability");
  gen->add_option("--p-ins", gen_p_ins, "corpus insertion probability");
  gen->add_option("--p-del", gen_p_del, "corpus deletion probability");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, variant, seeds, out_dir);
    if (eval->parsed()) return eval_command(report_dir);
    if (gen->parsed()) {
      return gen_data_command(gen_out, gen_n, gen_seed, gen_corpus, gen_p_sub, gen_p_ins,
                              gen_p_del);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
