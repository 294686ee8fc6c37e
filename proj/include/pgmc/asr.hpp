#pragma once

// Noisy-channel syllable recognizer standing in for an off-the-shelf speech
// recognizer. Utterances are canonical digit pronunciations passed through a
// substitution/insertion/deletion channel; the decoder searches source
// sequences against the known channel and a learnable syllable-bigram
// language model, returning an L-best list.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "pgmc/errors.hpp"
#include "pgmc/eval.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

inline const std::vector<SyllableSeq>& digit_pronunciations() {
  static const std::vector<SyllableSeq> table = {
      {"ze", "ro"}, {"i", "chi"}, {"ni"},        {"sa", "n"},   {"yo", "n"},
      {"go"},       {"ro", "ku"}, {"na", "na"},  {"ha", "chi"}, {"kyu", "u"},
  };
  return table;
}

struct Pronunciation {
  int digit = 0;
  SyllableSeq syllables;
};

inline Pronunciation pronunciation_of(int digit) {
  if (digit < 0 || digit > 9) throw InputError("pronunciation_of: digit out of range");
  return Pronunciation{digit, digit_pronunciations()[static_cast<std::size_t>(digit)]};
}

struct Utterance {
  SyllableSeq observed_syllables;
  int true_digit = -1;  // read by eval only
};

// Confusable-pair and echo tables. Substitutions land on acoustically close
// syllables; insertions echo the vowel residue of the preceding syllable.
struct SyllableChannel {
  double p_sub = 0.10;
  double p_ins = 0.03;
  double p_del = 0.03;
  std::vector<std::string> inventory;
  std::map<std::string, std::vector<std::string>> neighbors;
  std::map<std::string, std::vector<std::string>> echoes;

  static SyllableChannel standard(double p_sub = 0.10, double p_ins = 0.03,
                                  double p_del = 0.03) {
    SyllableChannel ch;
    ch.p_sub = p_sub;
    ch.p_ins = p_ins;
    ch.p_del = p_del;
    ch.inventory = {"ze", "ro", "i",  "chi", "ni",  "sa", "n", "yo", "go",
                    "ku", "na", "ha", "kyu", "u",   "a",  "e", "o"};
    ch.neighbors = {
        {"ze", {"e"}},
        {"ro", {"o", "yo"}},
        {"i", {"chi", "ni", "e"}},
        {"chi", {"i", "ni"}},
        {"ni", {"i", "n", "chi"}},
        {"sa", {"a", "ha"}},
        {"n", {"na", "ni"}},
        {"yo", {"o", "go", "ro"}},
        {"go", {"o", "yo"}},
        {"ku", {"u", "kyu"}},
        {"na", {"a", "n", "ha"}},
        {"ha", {"a", "sa", "na"}},
        {"kyu", {"ku", "u"}},
        {"u", {"ku", "o", "kyu"}},
        {"a", {"na", "ha", "sa"}},
        {"e", {"ze", "i"}},
        {"o", {"go", "yo", "ro", "u"}},
    };
    ch.echoes = {
        {"ze", {"e"}},  {"ro", {"o"}},      {"i", {"i"}},       {"chi", {"i"}},
        {"ni", {"i", "n"}}, {"sa", {"a"}},  {"n", {"n"}},       {"yo", {"o"}},
        {"go", {"o"}},  {"ku", {"u"}},      {"na", {"a", "n"}}, {"ha", {"a"}},
        {"kyu", {"u"}}, {"u", {"u"}},       {"a", {"a"}},       {"e", {"e"}},
        {"o", {"o"}},
    };
    return ch;
  }

  const std::vector<std::string>& neighbors_of(const std::string& s) const {
    static const std::vector<std::string> none;
    auto it = neighbors.find(s);
    return it == neighbors.end() ? none : it->second;
  }
  const std::vector<std::string>& echoes_of(const std::string& s) const {
    static const std::vector<std::string> none;
    auto it = echoes.find(s);
    return it == echoes.end() ? none : it->second;
  }
};

// Smoothed syllable-bigram model with word-boundary markers. Zero counts with
// positive smoothing give the uniform-per-context initial model.
class BigramLm {
 public:
  BigramLm() = default;
  BigramLm(std::vector<std::string> inventory, double delta)
      : delta_(delta), syllables_(std::move(inventory)) {
    for (std::size_t i = 0; i < syllables_.size(); ++i) {
      index_[syllables_[i]] = static_cast<int>(i);
    }
    successors_ = syllables_.size() + 1;  // + end marker
    counts_.assign((syllables_.size() + 1) * successors_, 0.0);
    row_totals_.assign(syllables_.size() + 1, 0.0);
  }

  std::size_t successor_types() const { return successors_; }
  double smoothing() const { return delta_; }

  void reset_counts() {
    std::fill(counts_.begin(), counts_.end(), 0.0);
    std::fill(row_totals_.begin(), row_totals_.end(), 0.0);
  }

  // Rebuilds bigram counts from scratch from whole words.
  void fit(const std::vector<SyllableSeq>& words) {
    if (words.empty()) throw InputError("BigramLm::fit: empty word list");
    reset_counts();
    for (const auto& w : words) {
      int prev = begin_context();
      for (const auto& s : w) {
        const int cur = syllable_id(s);
        add_count(prev, cur);
        prev = cur;
      }
      add_count(prev, end_token());
    }
  }

  double prob(int context, int next) const {
    const double total = row_totals_[static_cast<std::size_t>(context)];
    const double c = counts_[slot(context, next)];
    const double denom = total + delta_ * static_cast<double>(successors_);
    if (!(denom > 0.0)) {
      return 1.0 / static_cast<double>(successors_);  // no counts, no smoothing
    }
    return (c + delta_) / denom;
  }

  double log_prob(int context, int next) const {
    const double p = prob(context, next);
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
  }

  double word_log_prob(const SyllableSeq& word) const {
    double lp = 0.0;
    int prev = begin_context();
    for (const auto& s : word) {
      const int cur = syllable_id(s);
      lp += log_prob(prev, cur);
      prev = cur;
    }
    return lp + log_prob(prev, end_token());
  }

  int begin_context() const { return static_cast<int>(syllables_.size()); }
  int end_token() const { return static_cast<int>(syllables_.size()); }

  int syllable_id(const std::string& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) throw InputError("BigramLm: syllable '" + s + "' not in inventory");
    return it->second;
  }

  void add_count(int context, int next, double amount = 1.0) {
    counts_[slot(context, next)] += amount;
    row_totals_[static_cast<std::size_t>(context)] += amount;
  }

  const std::vector<std::string>& inventory() const { return syllables_; }
  const std::vector<double>& raw_counts() const { return counts_; }
  void set_raw_counts(std::vector<double> counts) {
    if (counts.size() != counts_.size()) throw DimensionError("BigramLm: count table size mismatch");
    counts_ = std::move(counts);
    std::fill(row_totals_.begin(), row_totals_.end(), 0.0);
    for (std::size_t ctx = 0; ctx < row_totals_.size(); ++ctx) {
      for (std::size_t nxt = 0; nxt < successors_; ++nxt) {
        row_totals_[ctx] += counts_[ctx * successors_ + nxt];
      }
    }
  }

 private:
  std::size_t slot(int context, int next) const {
    return static_cast<std::size_t>(context) * successors_ + static_cast<std::size_t>(next);
  }

  double delta_ = 0.1;
  std::vector<std::string> syllables_;
  std::unordered_map<std::string, int> index_;
  std::size_t successors_ = 0;
  std::vector<double> counts_;
  std::vector<double> row_totals_;
};

struct ScoredWord {
  SyllableSeq word;
  double score = 0.0;  // normalized over the returned list
};

struct AsrState {
  SyllableChannel channel;
  BigramLm lm;
  std::uint64_t seed = 0;
  int beam_width = 128;
  int max_deletions = 2;

  static AsrState standard(double p_sub = 0.10, double p_ins = 0.03, double p_del = 0.03,
                           double lm_delta = 0.1, std::uint64_t seed = 0) {
    AsrState st;
    st.channel = SyllableChannel::standard(p_sub, p_ins, p_del);
    st.lm = BigramLm(st.channel.inventory, lm_delta);
    st.seed = seed;
    return st;
  }
};

// Passes a digit's canonical pronunciation through the channel. The last
// surviving syllable is never deleted, so utterances stay non-empty.
inline Utterance synthesize(int digit, const SyllableChannel& channel, Rng& rng) {
  const auto canon = pronunciation_of(digit).syllables;
  Utterance utt;
  utt.true_digit = digit;
  for (std::size_t t = 0; t < canon.size(); ++t) {
    const std::string& s = canon[t];
    const bool last_chance = utt.observed_syllables.empty() && t + 1 == canon.size();
    if (!last_chance && rng.uniform() < channel.p_del) continue;
    const auto& nbr = channel.neighbors_of(s);
    if (!nbr.empty() && rng.uniform() < channel.p_sub) {
      utt.observed_syllables.push_back(nbr[rng.index(nbr.size())]);
    } else {
      utt.observed_syllables.push_back(s);
    }
    const auto& echo = channel.echoes_of(s);
    if (!echo.empty() && rng.uniform() < channel.p_ins) {
      utt.observed_syllables.push_back(echo[rng.index(echo.size())]);
    }
  }
  return utt;
}

namespace detail {

using IdSeq = std::vector<int>;

// A partial alignment: source syllables posited so far (as LM ids), the
// syllable whose one-shot echo insertion is still undecided (-1 when settled),
// and the deletion budget spent on unobserved source syllables.
struct BeamEntry {
  IdSeq source;
  int pending_echo = -1;  // id of the syllable that may still echo
  int deletions = 0;
  double log_score = 0.0;
};

inline bool id_seq_less(const IdSeq& a, const IdSeq& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace detail

// Reusable decoder: interns the channel tables once, then decodes utterances
// by beam search over source sequences scored with best-alignment channel
// likelihood times language-model probability.
class Decoder {
 public:
  explicit Decoder(const AsrState& state) : state_(&state) {
    const auto& ch = state.channel;
    const auto& lm = state.lm;
    const int n = static_cast<int>(lm.inventory().size());
    neighbors_.resize(static_cast<std::size_t>(n));
    echoes_.resize(static_cast<std::size_t>(n));
    emitters_.resize(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
      const std::string& name = lm.inventory()[static_cast<std::size_t>(s)];
      for (const auto& nb : ch.neighbors_of(name)) neighbors_[static_cast<std::size_t>(s)].push_back(lm.syllable_id(nb));
      for (const auto& e : ch.echoes_of(name)) echoes_[static_cast<std::size_t>(s)].push_back(lm.syllable_id(e));
    }
    // Reverse map: which sources can emit a given observed syllable.
    for (int s = 0; s < n; ++s) {
      emitters_[static_cast<std::size_t>(s)].push_back(s);
    }
    for (int s = 0; s < n; ++s) {
      for (int y : neighbors_[static_cast<std::size_t>(s)]) {
        emitters_[static_cast<std::size_t>(y)].push_back(s);
      }
    }
    const double neg_inf = -std::numeric_limits<double>::infinity();
    log_no_ins_ = ch.p_ins < 1.0 ? std::log(1.0 - ch.p_ins) : neg_inf;
    log_del_ = ch.p_del > 0.0 ? std::log(ch.p_del) : neg_inf;
    const double keep = 1.0 - ch.p_del;
    log_match_ = keep * (1.0 - ch.p_sub) > 0.0 ? std::log(keep * (1.0 - ch.p_sub)) : neg_inf;
  }

  std::vector<ScoredWord> decode(const Utterance& utterance, int l_best) const {
    if (utterance.observed_syllables.empty()) throw InputError("recognize: empty utterance");
    if (l_best < 1) throw InputError("recognize: L must be >= 1");
    const auto& lm = state_->lm;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    const std::size_t width = static_cast<std::size_t>(std::max(1, state_->beam_width));

    std::vector<int> obs;
    obs.reserve(utterance.observed_syllables.size());
    for (const auto& s : utterance.observed_syllables) obs.push_back(lm.syllable_id(s));

    using detail::BeamEntry;
    using detail::IdSeq;

    auto better = [](const BeamEntry& a, const BeamEntry& b) {
      if (a.log_score != b.log_score) return a.log_score > b.log_score;
      return detail::id_seq_less(a.source, b.source);
    };
    // Collapses duplicate (source, echo-state, deletions) alignments to their
    // best score, sorts, clips to the beam width.
    auto settle = [&](std::vector<BeamEntry>& layer) {
      std::map<std::tuple<IdSeq, int, int>, std::size_t> seen;
      std::vector<BeamEntry> merged;
      merged.reserve(layer.size());
      for (auto& e : layer) {
        if (e.log_score == neg_inf) continue;
        auto key = std::make_tuple(e.source, e.pending_echo, e.deletions);
        auto it = seen.find(key);
        if (it == seen.end()) {
          seen.emplace(std::move(key), merged.size());
          merged.push_back(std::move(e));
        } else if (e.log_score > merged[it->second].log_score) {
          merged[it->second] = std::move(e);
        }
      }
      std::sort(merged.begin(), merged.end(), better);
      if (merged.size() > width) merged.resize(width);
      layer = std::move(merged);
    };

    // Deletion arcs consume no observation; expand them within the layer,
    // pruning between rounds. A deleted syllable emits nothing and never
    // echoes, and it leaves an earlier syllable's echo window open.
    auto close_deletions = [&](std::vector<BeamEntry>& layer) {
      if (log_del_ == neg_inf || state_->max_deletions <= 0) return;
      settle(layer);
      std::vector<BeamEntry> frontier = layer;
      for (int round = 0; round < state_->max_deletions && !frontier.empty(); ++round) {
        std::vector<BeamEntry> fresh;
        for (const auto& entry : frontier) {
          if (entry.deletions >= state_->max_deletions) continue;
          const int context = entry.source.empty() ? lm.begin_context() : entry.source.back();
          for (int s = 0; s < static_cast<int>(lm.inventory().size()); ++s) {
            const double lp = entry.log_score + log_del_ + lm.log_prob(context, s);
            if (lp == neg_inf) continue;
            BeamEntry next = entry;
            next.source.push_back(s);
            next.deletions += 1;
            next.log_score = lp;
            fresh.push_back(std::move(next));
          }
        }
        // Prune the new states against each other before the next round.
        std::sort(fresh.begin(), fresh.end(), better);
        if (fresh.size() > width) fresh.resize(width);
        layer.insert(layer.end(), fresh.begin(), fresh.end());
        frontier = std::move(fresh);
      }
      settle(layer);
    };

    std::vector<BeamEntry> layer;
    layer.push_back(BeamEntry{});
    std::map<IdSeq, double> complete;

    for (std::size_t t = 0; t <= obs.size(); ++t) {
      close_deletions(layer);
      settle(layer);
      if (t == obs.size()) {
        for (const auto& entry : layer) {
          if (entry.source.empty()) continue;
          const double total = entry.log_score +
                               (entry.pending_echo >= 0 ? log_no_ins_ : 0.0) +
                               lm.log_prob(entry.source.back(), lm.end_token());
          if (total == neg_inf) continue;
          auto it = complete.find(entry.source);
          if (it == complete.end()) {
            complete.emplace(entry.source, total);
          } else if (total > it->second) {
            it->second = total;
          }
        }
        break;
      }
      std::vector<BeamEntry> next_layer;
      next_layer.reserve(layer.size() * 4);
      for (const auto& entry : layer) {
        const int context = entry.source.empty() ? lm.begin_context() : entry.source.back();
        // Observation t as the one-shot echo of the pending syllable.
        if (entry.pending_echo >= 0) {
          const double lp = entry.log_score + echo_log_prob(entry.pending_echo, obs[t]);
          if (lp != neg_inf) {
            BeamEntry next = entry;
            next.pending_echo = -1;
            next.log_score = lp;
            next_layer.push_back(std::move(next));
          }
        }
        const double resolve = entry.pending_echo >= 0 ? log_no_ins_ : 0.0;
        // Observation t emitted by a source syllable (match or confusion).
        for (int s : emitters_[static_cast<std::size_t>(obs[t])]) {
          const double lp = entry.log_score + resolve + emit_log_prob(s, obs[t]) +
                            lm.log_prob(context, s);
          if (lp == neg_inf) continue;
          BeamEntry next = entry;
          next.source.push_back(s);
          next.pending_echo = s;
          next.log_score = lp;
          next_layer.push_back(std::move(next));
        }
      }
      layer = std::move(next_layer);
      if (layer.empty()) break;
    }

    if (complete.empty()) throw InputError("recognize: no decodable path for utterance");

    std::vector<std::pair<IdSeq, double>> ranked(complete.begin(), complete.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return detail::id_seq_less(a.first, b.first);
    });
    if (ranked.size() > static_cast<std::size_t>(l_best)) {
      ranked.resize(static_cast<std::size_t>(l_best));
    }
    std::vector<ScoredWord> out;
    out.reserve(ranked.size());
    const double mx = ranked.front().second;
    double total = 0.0;
    for (const auto& [_, lp] : ranked) total += std::exp(lp - mx);
    for (const auto& [seq, lp] : ranked) {
      ScoredWord sw;
      for (int id : seq) sw.word.push_back(lm.inventory()[static_cast<std::size_t>(id)]);
      sw.score = std::exp(lp - mx) / total;
      out.push_back(std::move(sw));
    }
    return out;
  }

 private:
  double emit_log_prob(int source, int observed) const {
    if (source == observed) return log_match_;
    const auto& nbr = neighbors_[static_cast<std::size_t>(source)];
    for (int n : nbr) {
      if (n == observed) {
        const double p = (1.0 - state_->channel.p_del) * state_->channel.p_sub /
                         static_cast<double>(nbr.size());
        return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
      }
    }
    return -std::numeric_limits<double>::infinity();
  }

  double echo_log_prob(int source, int observed) const {
    const auto& echo = echoes_[static_cast<std::size_t>(source)];
    for (int e : echo) {
      if (e == observed) {
        return state_->channel.p_ins > 0.0
                   ? std::log(state_->channel.p_ins / static_cast<double>(echo.size()))
                   : -std::numeric_limits<double>::infinity();
      }
    }
    return -std::numeric_limits<double>::infinity();
  }

  const AsrState* state_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> echoes_;
  std::vector<std::vector<int>> emitters_;
  double log_no_ins_ = 0.0;
  double log_del_ = 0.0;
  double log_match_ = 0.0;
};

// One-shot decode; build a Decoder directly when decoding many utterances.
inline std::vector<ScoredWord> recognize(const Utterance& utterance, const AsrState& state,
                                         int l_best) {
  return Decoder(state).decode(utterance, l_best);
}

// Rebuilds the language model from the resampled words.
inline void update_lm(AsrState& state, const std::vector<SyllableSeq>& selected_words) {
  state.lm.fit(selected_words);
}

}  // namespace pgmc
