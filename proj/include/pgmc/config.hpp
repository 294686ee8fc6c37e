#pragma once

// Declarative pipeline configuration: key = value lines plus repeatable
// edge/module declarations. Defaults reproduce the reference experiment.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/graph.hpp"

namespace pgmc {

// Which module pairs communicate. Disabled links still exchange messages on
// every hop; the contents are just neutral (uniform posteriors, zero prior
// means, constant importance, frozen language model).
enum class Variant { kNone, kLdaAsr, kVaeGmmLdaAsr, kFull };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kLdaAsr: return "lda_asr";
    case Variant::kVaeGmmLdaAsr: return "vae_gmm__lda_asr";
    case Variant::kFull: return "full";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "none") return Variant::kNone;
  if (s == "lda_asr") return Variant::kLdaAsr;
  if (s == "vae_gmm__lda_asr") return Variant::kVaeGmmLdaAsr;
  if (s == "full") return Variant::kFull;
  throw ConfigError("unknown variant '" + s + "'");
}

struct ExperimentConfig {
  Variant variant = Variant::kFull;
  std::uint64_t seed = 1;
  int k = 10;
  int l = 10;
  int n_updates = 50;
  std::size_t n_pairs = 3000;
  CombineMode combine = CombineMode::kProductOfExperts;

  int vae_epochs = 200;
  int vae_batch = 500;
  int vae_hidden = 128;
  int vae_latent = 10;
  double vae_learning_rate = 1e-3;

  int gmm_sweeps = 50;
  double gmm_r0 = 1.0;
  double gmm_weight_concentration = 1.0;

  int lda_sweeps = 100;
  double lda_alpha = 1.0;
  double lda_beta = 0.1;
  bool lda_mixture_of_unigrams = false;

  double asr_p_sub = 0.10;
  double asr_p_ins = 0.03;
  double asr_p_del = 0.03;
  double asr_lm_delta = 0.1;
  int asr_beam_width = 128;
  int asr_max_deletions = 2;

  std::string data_images;
  std::string data_labels;
  std::string data_corpus;         // optional: read utterances instead of synthesizing
  std::string data_corpus_labels;  // sidecar for data_corpus
  std::string out_dir;

  GraphConfig graph;

  static ExperimentConfig with_reference_graph() {
    ExperimentConfig cfg;
    cfg.graph.modules = {{"vae", true}, {"gmm", true}, {"lda", true}, {"asr", true}};
    cfg.graph.edges = {
        {"vae", "gmm", "z1", ConnectionKind::kHeadToTail},
        {"gmm", "lda", "z2", ConnectionKind::kTailToTail},
        {"lda", "asr", "w", ConnectionKind::kHeadToHead},
    };
    cfg.graph.update_order = {"asr", "lda", "ttot_z2", "vae", "gmm", "ttot_z2", "asr"};
    return cfg;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline ConnectionKind connection_kind_from(const std::string& s, const std::string& where) {
  if (s == "head_to_tail") return ConnectionKind::kHeadToTail;
  if (s == "tail_to_tail") return ConnectionKind::kTailToTail;
  if (s == "head_to_head") return ConnectionKind::kHeadToHead;
  throw ConfigError(where + ": unknown connection kind '" + s + "'");
}

template <typename T>
T parse_number(const std::string& value, const std::string& where) {
  std::istringstream in(value);
  T out{};
  if (!(in >> out) || !(in >> std::ws).eof()) {
    throw ConfigError(where + ": cannot parse number '" + value + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& value, const std::string& where) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(where + ": cannot parse boolean '" + value + "'");
}

}  // namespace detail

// Parses config text. `source` names the file in error messages.
inline ExperimentConfig parse_config(const std::string& text,
                                     const std::string& source = "<config>") {
  ExperimentConfig cfg = ExperimentConfig::with_reference_graph();
  bool graph_cleared = false;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");

    using detail::parse_number;
    if (key == "variant") {
      cfg.variant = variant_from_string(value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(value, where);
    } else if (key == "k") {
      cfg.k = parse_number<int>(value, where);
    } else if (key == "l") {
      cfg.l = parse_number<int>(value, where);
    } else if (key == "n_updates") {
      cfg.n_updates = parse_number<int>(value, where);
    } else if (key == "n_pairs") {
      cfg.n_pairs = parse_number<std::size_t>(value, where);
    } else if (key == "combine") {
      if (value == "poe") {
        cfg.combine = CombineMode::kProductOfExperts;
      } else if (value == "unigram_rescale") {
        cfg.combine = CombineMode::kUnigramRescale;
      } else {
        throw ConfigError(where + ": combine must be poe or unigram_rescale");
      }
    } else if (key == "vae.epochs") {
      cfg.vae_epochs = parse_number<int>(value, where);
    } else if (key == "vae.batch") {
      cfg.vae_batch = parse_number<int>(value, where);
    } else if (key == "vae.hidden") {
      cfg.vae_hidden = parse_number<int>(value, where);
    } else if (key == "vae.latent") {
      cfg.vae_latent = parse_number<int>(value, where);
    } else if (key == "vae.learning_rate") {
      cfg.vae_learning_rate = parse_number<double>(value, where);
    } else if (key == "gmm.sweeps") {
      cfg.gmm_sweeps = parse_number<int>(value, where);
    } else if (key == "gmm.r0") {
      cfg.gmm_r0 = parse_number<double>(value, where);
    } else if (key == "gmm.weight_concentration") {
      cfg.gmm_weight_concentration = parse_number<double>(value, where);
    } else if (key == "lda.sweeps") {
      cfg.lda_sweeps = parse_number<int>(value, where);
    } else if (key == "lda.alpha") {
      cfg.lda_alpha = parse_number<double>(value, where);
    } else if (key == "lda.beta") {
      cfg.lda_beta = parse_number<double>(value, where);
    } else if (key == "lda.mixture_of_unigrams") {
      cfg.lda_mixture_of_unigrams = detail::parse_bool(value, where);
    } else if (key == "asr.p_sub") {
      cfg.asr_p_sub = parse_number<double>(value, where);
    } else if (key == "asr.p_ins") {
      cfg.asr_p_ins = parse_number<double>(value, where);
    } else if (key == "asr.p_del") {
      cfg.asr_p_del = parse_number<double>(value, where);
    } else if (key == "asr.lm_delta") {
      cfg.asr_lm_delta = parse_number<double>(value, where);
    } else if (key == "asr.beam_width") {
      cfg.asr_beam_width = parse_number<int>(value, where);
    } else if (key == "asr.max_deletions") {
      cfg.asr_max_deletions = parse_number<int>(value, where);
    } else if (key == "data.images") {
      cfg.data_images = value;
    } else if (key == "data.labels") {
      cfg.data_labels = value;
    } else if (key == "data.corpus") {
      cfg.data_corpus = value;
    } else if (key == "data.corpus_labels") {
      cfg.data_corpus_labels = value;
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "modules") {
      if (!graph_cleared) {
        cfg.graph.modules.clear();
        cfg.graph.edges.clear();
        graph_cleared = true;
      }
      for (const auto& id : detail::split_list(value)) cfg.graph.modules.push_back({id, true});
    } else if (key == "edge") {
      if (!graph_cleared) {
        cfg.graph.modules.clear();
        cfg.graph.edges.clear();
        graph_cleared = true;
      }
      const auto parts = detail::split_list(value);
      if (parts.size() != 4) {
        throw ConfigError(where + ": edge needs 'module_a, module_b, variable, kind'");
      }
      cfg.graph.edges.push_back(
          {parts[0], parts[1], parts[2], detail::connection_kind_from(parts[3], where)});
    } else if (key == "update_order") {
      cfg.graph.update_order = detail::split_list(value);
    } else {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

// Full resolved configuration; the report embeds this so runs can be diffed.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : cfg.graph.edges) {
    edges.push_back({{"a", e.module_a}, {"b", e.module_b}, {"variable", e.variable},
                     {"kind", to_string(e.kind)}});
  }
  nlohmann::json modules = nlohmann::json::array();
  for (const auto& m : cfg.graph.modules) modules.push_back(m.id);
  return nlohmann::json{
      {"variant", to_string(cfg.variant)},
      {"seed", cfg.seed},
      {"k", cfg.k},
      {"l", cfg.l},
      {"n_updates", cfg.n_updates},
      {"n_pairs", cfg.n_pairs},
      {"combine", cfg.combine == CombineMode::kProductOfExperts ? "poe" : "unigram_rescale"},
      {"vae",
       {{"epochs", cfg.vae_epochs},
        {"batch", cfg.vae_batch},
        {"hidden", cfg.vae_hidden},
        {"latent", cfg.vae_latent},
        {"learning_rate", cfg.vae_learning_rate}}},
      {"gmm",
       {{"sweeps", cfg.gmm_sweeps},
        {"r0", cfg.gmm_r0},
        {"weight_concentration", cfg.gmm_weight_concentration}}},
      {"lda",
       {{"sweeps", cfg.lda_sweeps},
        {"alpha", cfg.lda_alpha},
        {"beta", cfg.lda_beta},
        {"mixture_of_unigrams", cfg.lda_mixture_of_unigrams}}},
      {"asr",
       {{"p_sub", cfg.asr_p_sub},
        {"p_ins", cfg.asr_p_ins},
        {"p_del", cfg.asr_p_del},
        {"lm_delta", cfg.asr_lm_delta},
        {"beam_width", cfg.asr_beam_width},
        {"max_deletions", cfg.asr_max_deletions}}},
      {"data",
       {{"images", cfg.data_images},
        {"labels", cfg.data_labels},
        {"corpus", cfg.data_corpus},
        {"corpus_labels", cfg.data_corpus_labels}}},
      {"graph", {{"modules", modules}, {"edges", edges}, {"update_order", cfg.graph.update_order}}},
  };
}

}  // namespace pgmc
