#pragma once

// Topic model over per-observation word multisets, trained by collapsed Gibbs
// sampling with an optional per-document categorical bias received from the
// class-sharing module. The vocabulary grows online: the recognizer's output
// alphabet is open, so unseen hypothesis strings keep arriving.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

// One observation's words, each a space-joined syllable sequence.
using WordDocument = std::vector<std::string>;

struct LdaState {
  int topics = 0;
  double alpha = 1.0;
  double beta = 0.1;
  bool mixture_of_unigrams = false;
  std::uint64_t seed = 0;

  std::vector<std::string> vocabulary;          // insertion-ordered
  std::unordered_map<std::string, int> vocab_index;

  std::vector<std::vector<int>> doc_tokens;     // word ids per document
  std::vector<std::vector<int>> token_topics;   // aligned with doc_tokens
  std::vector<double> topic_word_counts;        // K x V, row-major
  std::vector<double> topic_totals;             // K
  std::vector<std::vector<double>> doc_topic_counts;  // N x K
  std::vector<int> doc_assignments;             // mixture-of-unigrams mode

  LdaState() = default;
  LdaState(int k, double a, double b) : topics(k), alpha(a), beta(b) {
    if (k <= 0) throw InputError("LdaState: topic count must be positive");
    if (!(a > 0.0) || !(b > 0.0)) throw InputError("LdaState: alpha and beta must be positive");
    topic_totals.assign(static_cast<std::size_t>(k), 0.0);
  }

  int vocab_size() const { return static_cast<int>(vocabulary.size()); }
  std::size_t doc_count() const { return doc_tokens.size(); }

  int intern(const std::string& word) {
    auto it = vocab_index.find(word);
    if (it != vocab_index.end()) return it->second;
    const int id = vocab_size();
    vocabulary.push_back(word);
    vocab_index.emplace(word, id);
    // Grow the count matrix by one column.
    std::vector<double> grown(static_cast<std::size_t>(topics) * vocabulary.size(), 0.0);
    const std::size_t old_v = vocabulary.size() - 1;
    for (int k = 0; k < topics; ++k) {
      for (std::size_t w = 0; w < old_v; ++w) {
        grown[static_cast<std::size_t>(k) * vocabulary.size() + w] =
            topic_word_counts[static_cast<std::size_t>(k) * old_v + w];
      }
    }
    topic_word_counts = std::move(grown);
    return id;
  }

  double& count(int topic, int word) {
    return topic_word_counts[static_cast<std::size_t>(topic) * vocabulary.size() +
                             static_cast<std::size_t>(word)];
  }
  double count(int topic, int word) const {
    return topic_word_counts[static_cast<std::size_t>(topic) * vocabulary.size() +
                             static_cast<std::size_t>(word)];
  }
};

// Document-level class posterior: entry k proportional to doc-topic count + alpha.
inline Categorical doc_topic_posterior(const LdaState& state, std::size_t doc) {
  if (doc >= state.doc_count()) throw InputError("doc_topic_posterior: unknown document index");
  const auto& row = state.doc_topic_counts[doc];
  std::vector<double> p(static_cast<std::size_t>(state.topics));
  double total = 0.0;
  for (int k = 0; k < state.topics; ++k) {
    p[static_cast<std::size_t>(k)] = row[static_cast<std::size_t>(k)] + state.alpha;
    total += p[static_cast<std::size_t>(k)];
  }
  for (auto& v : p) v /= total;
  return Categorical(std::move(p));
}

// Predictive probability of `word` under the document's topic mixture,
// summed over topics. Out-of-vocabulary words get the smoothing floor.
inline double word_importance(const LdaState& state, const std::string& word, std::size_t doc) {
  if (state.vocab_size() == 0) return 1.0;  // untrained: every word equally plausible
  const auto it = state.vocab_index.find(word);
  const int w = it == state.vocab_index.end() ? -1 : it->second;
  const Categorical post = doc_topic_posterior(state, doc);
  const double v_beta = static_cast<double>(state.vocab_size()) * state.beta;
  double importance = 0.0;
  for (int k = 0; k < state.topics; ++k) {
    const double cw = w >= 0 ? state.count(k, w) : 0.0;
    const double p_w_k = (cw + state.beta) / (state.topic_totals[static_cast<std::size_t>(k)] + v_beta);
    importance += p_w_k * post[static_cast<std::size_t>(k)];
  }
  return importance;
}

namespace detail {

// Unnormalized per-topic weights for one token given exclusion-adjusted
// counts; both the sweep and the public conditional go through here.
inline void token_conditional_weights(const LdaState& state, const std::vector<double>& doc_row,
                                      int word, const Categorical* bias,
                                      std::vector<double>& out) {
  const double v_beta = static_cast<double>(state.vocab_size()) * state.beta;
  for (int k = 0; k < state.topics; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    out[ks] = (doc_row[ks] + state.alpha) * (state.count(k, word) + state.beta) /
              (state.topic_totals[ks] + v_beta);
    if (bias) out[ks] *= bias->probs[ks];
  }
}

inline void rebuild_counts(LdaState& state) {
  const std::size_t k = static_cast<std::size_t>(state.topics);
  const std::size_t v = static_cast<std::size_t>(state.vocab_size());
  state.topic_word_counts.assign(k * v, 0.0);
  state.topic_totals.assign(k, 0.0);
  state.doc_topic_counts.assign(state.doc_count(), std::vector<double>(k, 0.0));
  for (std::size_t d = 0; d < state.doc_count(); ++d) {
    for (std::size_t t = 0; t < state.doc_tokens[d].size(); ++t) {
      const int topic = state.token_topics[d][t];
      state.count(topic, state.doc_tokens[d][t]) += 1.0;
      state.topic_totals[static_cast<std::size_t>(topic)] += 1.0;
      state.doc_topic_counts[d][static_cast<std::size_t>(topic)] += 1.0;
    }
  }
}

// One pass of per-token collapsed updates.
inline void sweep_tokens(LdaState& state, std::span<const Categorical> external, Rng& rng) {
  std::vector<double> p(static_cast<std::size_t>(state.topics));
  for (std::size_t d = 0; d < state.doc_count(); ++d) {
    const Categorical* bias = nullptr;
    if (!external.empty() && !detail::all_entries_equal(external[d].probs)) {
      bias = &external[d];
    }
    auto& row = state.doc_topic_counts[d];
    for (std::size_t t = 0; t < state.doc_tokens[d].size(); ++t) {
      const int w = state.doc_tokens[d][t];
      const int old_topic = state.token_topics[d][t];
      state.count(old_topic, w) -= 1.0;
      state.topic_totals[static_cast<std::size_t>(old_topic)] -= 1.0;
      row[static_cast<std::size_t>(old_topic)] -= 1.0;
      token_conditional_weights(state, row, w, bias, p);
      const int fresh = static_cast<int>(rng.categorical(p));
      state.token_topics[d][t] = fresh;
      state.count(fresh, w) += 1.0;
      state.topic_totals[static_cast<std::size_t>(fresh)] += 1.0;
      row[static_cast<std::size_t>(fresh)] += 1.0;
    }
  }
}

// One pass of per-document collapsed updates (single shared topic per document).
inline void sweep_documents(LdaState& state, std::span<const Categorical> external, Rng& rng) {
  const double v_beta = static_cast<double>(state.vocab_size()) * state.beta;
  std::vector<double> docs_in_topic(static_cast<std::size_t>(state.topics), 0.0);
  for (int z : state.doc_assignments) docs_in_topic[static_cast<std::size_t>(z)] += 1.0;
  std::vector<double> log_p(static_cast<std::size_t>(state.topics));
  for (std::size_t d = 0; d < state.doc_count(); ++d) {
    const int old_topic = state.doc_assignments[d];
    const auto& tokens = state.doc_tokens[d];
    docs_in_topic[static_cast<std::size_t>(old_topic)] -= 1.0;
    for (int w : tokens) {
      state.count(old_topic, w) -= 1.0;
      state.topic_totals[static_cast<std::size_t>(old_topic)] -= 1.0;
    }
    const Categorical* bias = nullptr;
    if (!external.empty() && !detail::all_entries_equal(external[d].probs)) {
      bias = &external[d];
    }
    for (int k = 0; k < state.topics; ++k) {
      const std::size_t ks = static_cast<std::size_t>(k);
      double lp = std::log(docs_in_topic[ks] + state.alpha);
      // Exact collapsed token block: repeated words advance their own counts.
      std::unordered_map<int, int> seen;
      int pos = 0;
      for (int w : tokens) {
        const int dup = seen[w]++;
        lp += std::log(state.count(k, w) + state.beta + static_cast<double>(dup));
        lp -= std::log(state.topic_totals[ks] + v_beta + static_cast<double>(pos));
        ++pos;
      }
      if (bias) {
        lp += bias->probs[ks] > 0.0 ? std::log(bias->probs[ks])
                                    : -std::numeric_limits<double>::infinity();
      }
      log_p[ks] = lp;
    }
    const double lse = log_sum_exp(log_p);
    std::vector<double> p(log_p.size(), 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(log_p[k] - lse);
    const int fresh = static_cast<int>(rng.categorical(p));
    state.doc_assignments[d] = fresh;
    docs_in_topic[static_cast<std::size_t>(fresh)] += 1.0;
    for (int w : tokens) {
      state.count(fresh, w) += 1.0;
      state.topic_totals[static_cast<std::size_t>(fresh)] += 1.0;
    }
    std::fill(state.token_topics[d].begin(), state.token_topics[d].end(), fresh);
    auto& row = state.doc_topic_counts[d];
    std::fill(row.begin(), row.end(), 0.0);
    row[static_cast<std::size_t>(fresh)] = static_cast<double>(tokens.size());
  }
}

}  // namespace detail

// Ingests the documents, resets all assignments, then runs `sweeps` collapsed
// Gibbs passes. `external` (when non-empty) is the per-document class
// posterior from the sibling module; a uniform row is identical to no row.
inline void gibbs_sweep(LdaState& state, const std::vector<WordDocument>& docs,
                        std::span<const Categorical> external, int sweeps, Rng& rng) {
  if (docs.empty()) throw InputError("lda gibbs_sweep: no documents");
  if (!external.empty() && external.size() != docs.size()) {
    throw DimensionError("lda gibbs_sweep: external message has wrong row count");
  }
  for (const auto& doc : docs) {
    if (doc.empty()) throw InputError("lda gibbs_sweep: empty document");
  }
  if (!external.empty()) {
    for (const auto& row : external) {
      if (static_cast<int>(row.size()) != state.topics) {
        throw DimensionError("lda gibbs_sweep: external message has wrong class count");
      }
    }
  }

  state.doc_tokens.assign(docs.size(), {});
  state.token_topics.assign(docs.size(), {});
  for (std::size_t d = 0; d < docs.size(); ++d) {
    state.doc_tokens[d].reserve(docs[d].size());
    for (const auto& word : docs[d]) state.doc_tokens[d].push_back(state.intern(word));
  }

  // Reset: fresh random assignments, counts rebuilt from scratch.
  state.doc_assignments.assign(docs.size(), 0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (state.mixture_of_unigrams) {
      const int z = static_cast<int>(rng.index(static_cast<std::size_t>(state.topics)));
      state.doc_assignments[d] = z;
      state.token_topics[d].assign(state.doc_tokens[d].size(), z);
    } else {
      state.token_topics[d].resize(state.doc_tokens[d].size());
      for (auto& z : state.token_topics[d]) {
        z = static_cast<int>(rng.index(static_cast<std::size_t>(state.topics)));
      }
    }
  }
  detail::rebuild_counts(state);

  for (int s = 0; s < sweeps; ++s) {
    if (state.mixture_of_unigrams) {
      detail::sweep_documents(state, external, rng);
    } else {
      detail::sweep_tokens(state, external, rng);
    }
  }
}

inline void gibbs_sweep(LdaState& state, const std::vector<WordDocument>& docs, int sweeps,
                        Rng& rng) {
  gibbs_sweep(state, docs, std::span<const Categorical>{}, sweeps, rng);
}

// Normalized collapsed conditional P(topic | everything else) for one token,
// excluding that token from the counts. Inspection hook for the oracle suite;
// the sweep samples from exactly these weights.
inline std::vector<double> collapsed_conditional(LdaState& state, std::size_t doc,
                                                 std::size_t token,
                                                 const Categorical* bias = nullptr) {
  if (doc >= state.doc_count() || token >= state.doc_tokens[doc].size()) {
    throw InputError("collapsed_conditional: token out of range");
  }
  const int w = state.doc_tokens[doc][token];
  const int topic = state.token_topics[doc][token];
  auto& row = state.doc_topic_counts[doc];
  state.count(topic, w) -= 1.0;
  state.topic_totals[static_cast<std::size_t>(topic)] -= 1.0;
  row[static_cast<std::size_t>(topic)] -= 1.0;
  std::vector<double> p(static_cast<std::size_t>(state.topics));
  detail::token_conditional_weights(state, row, w, bias, p);
  state.count(topic, w) += 1.0;
  state.topic_totals[static_cast<std::size_t>(topic)] += 1.0;
  row[static_cast<std::size_t>(topic)] += 1.0;
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

// Highest-count words of one topic, for the report's stereotype table context.
inline std::vector<std::string> topic_top_words(const LdaState& state, int topic, int limit) {
  std::vector<std::pair<double, int>> ranked;
  for (int w = 0; w < state.vocab_size(); ++w) {
    const double c = state.count(topic, w);
    if (c > 0.0) ranked.emplace_back(c, w);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(limit); ++i) {
    out.push_back(state.vocabulary[static_cast<std::size_t>(ranked[i].second)]);
  }
  return out;
}

}  // namespace pgmc
