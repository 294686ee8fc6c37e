#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "pgmc/categorical.hpp"
#include "pgmc/eval.hpp"
#include "pgmc/lda.hpp"
#include "pgmc/message.hpp"
#include "pgmc/rng.hpp"

using pgmc::Categorical;
using pgmc::CategoricalPerDatum;
using pgmc::LdaState;
using pgmc::Rng;
using pgmc::WordDocument;

namespace {

Categorical one_hot(int k, int total) {
  std::vector<double> p(static_cast<std::size_t>(total), 0.0);
  p[static_cast<std::size_t>(k)] = 1.0;
  return Categorical(std::move(p));
}

// Histogram check: counts must equal the token assignments exactly.
void check_count_consistency(const LdaState& state) {
  std::vector<double> topic_word(static_cast<std::size_t>(state.topics) *
                                     static_cast<std::size_t>(state.vocab_size()),
                                 0.0);
  std::vector<double> totals(static_cast<std::size_t>(state.topics), 0.0);
  for (std::size_t d = 0; d < state.doc_count(); ++d) {
    std::vector<double> row(static_cast<std::size_t>(state.topics), 0.0);
    for (std::size_t t = 0; t < state.doc_tokens[d].size(); ++t) {
      const int w = state.doc_tokens[d][t];
      const int k = state.token_topics[d][t];
      topic_word[static_cast<std::size_t>(k) * state.vocab_size() + static_cast<std::size_t>(w)] +=
          1.0;
      totals[static_cast<std::size_t>(k)] += 1.0;
      row[static_cast<std::size_t>(k)] += 1.0;
    }
    for (int k = 0; k < state.topics; ++k) {
      REQUIRE(state.doc_topic_counts[d][static_cast<std::size_t>(k)] ==
              row[static_cast<std::size_t>(k)]);
    }
  }
  for (std::size_t i = 0; i < topic_word.size(); ++i) {
    REQUIRE(state.topic_word_counts[i] == topic_word[i]);
  }
  for (int k = 0; k < state.topics; ++k) {
    REQUIRE(state.topic_totals[static_cast<std::size_t>(k)] == totals[static_cast<std::size_t>(k)]);
  }
}

}  // namespace

TEST_CASE("lda: one-hot external forces every token of the document") {
  LdaState state(3, 1.0, 0.1);
  std::vector<WordDocument> docs = {{"aa", "bb", "aa"}, {"cc", "cc"}, {"aa", "dd"}};
  CategoricalPerDatum external = {one_hot(2, 3), one_hot(0, 3), one_hot(1, 3)};
  Rng rng(21);
  gibbs_sweep(state, docs, external, 1, rng);
  CHECK(state.token_topics[0] == std::vector<int>{2, 2, 2});
  CHECK(state.token_topics[1] == std::vector<int>{0, 0});
  CHECK(state.token_topics[2] == std::vector<int>{1, 1});
}

TEST_CASE("lda: disjoint vocabularies separate with high accuracy") {
  // Three topics with disjoint five-word vocabularies, 60 documents.
  Rng gen(22);
  std::vector<WordDocument> docs;
  std::vector<int> truth;
  for (int d = 0; d < 60; ++d) {
    const int group = d % 3;
    WordDocument doc;
    for (int t = 0; t < 8; ++t) {
      doc.push_back("g" + std::to_string(group) + "w" + std::to_string(gen.index(5)));
    }
    docs.push_back(doc);
    truth.push_back(group);
  }
  LdaState state(3, 1.0, 0.1);
  Rng rng(23);
  gibbs_sweep(state, docs, 100, rng);
  std::vector<int> assigned;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    assigned.push_back(static_cast<int>(doc_topic_posterior(state, d).argmax()));
  }
  CHECK(pgmc::best_map_accuracy(assigned, truth) >= 99.0);
  check_count_consistency(state);
}

TEST_CASE("lda: collapsed conditional matches the formula oracle") {
  LdaState state(2, 0.7, 0.3);
  std::vector<WordDocument> docs = {{"x", "y", "x"}, {"y", "z"}};
  Rng rng(24);
  gibbs_sweep(state, docs, 3, rng);

  const double v = static_cast<double>(state.vocab_size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (std::size_t t = 0; t < state.doc_tokens[d].size(); ++t) {
      const auto conditional = collapsed_conditional(state, d, t);
      // Independent formula: exclude the token, then
      // (doc_count + alpha) * (word_count + beta) / (topic_total + V*beta).
      const int w = state.doc_tokens[d][t];
      const int z = state.token_topics[d][t];
      std::vector<double> expected(2);
      double total = 0.0;
      for (int k = 0; k < 2; ++k) {
        const double doc_count =
            state.doc_topic_counts[d][static_cast<std::size_t>(k)] - (k == z ? 1.0 : 0.0);
        const double word_count = state.count(k, w) - (k == z ? 1.0 : 0.0);
        const double topic_total =
            state.topic_totals[static_cast<std::size_t>(k)] - (k == z ? 1.0 : 0.0);
        expected[static_cast<std::size_t>(k)] =
            (doc_count + state.alpha) * (word_count + state.beta) / (topic_total + v * state.beta);
        total += expected[static_cast<std::size_t>(k)];
      }
      for (auto& e : expected) e /= total;
      for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(conditional[static_cast<std::size_t>(k)] -
                       expected[static_cast<std::size_t>(k)]) < 1e-12);
      }
    }
  }
}

TEST_CASE("lda: single-token corpus conditional from first principles") {
  LdaState state(2, 1.0, 0.5);
  std::vector<WordDocument> docs = {{"only"}};
  Rng rng(25);
  gibbs_sweep(state, docs, 1, rng);
  const auto conditional = collapsed_conditional(state, 0, 0);
  // Excluding the sole token leaves empty counts: both topics get
  // (0 + alpha) * (0 + beta) / (0 + V*beta), i.e. the uniform distribution.
  CHECK(conditional[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(conditional[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("lda: doc_topic_posterior limits and normalization") {
  LdaState state(3, 1.0, 0.1);
  std::vector<WordDocument> docs = {{"a", "a", "a"}};
  CategoricalPerDatum external = {one_hot(1, 3)};
  Rng rng(26);
  gibbs_sweep(state, docs, external, 1, rng);

  SECTION("all tokens in one topic, small alpha: near one-hot") {
    state.alpha = 1e-12;
    const auto post = doc_topic_posterior(state, 0);
    CHECK(post[1] == Catch::Approx(1.0).margin(1e-9));
  }
  SECTION("huge alpha: near uniform") {
    state.alpha = 1e12;
    const auto post = doc_topic_posterior(state, 0);
    for (int k = 0; k < 3; ++k) {
      CHECK(post[static_cast<std::size_t>(k)] == Catch::Approx(1.0 / 3.0).margin(1e-9));
    }
  }
  SECTION("hand-set counts (2,1,0) with alpha 1 give (3/6, 2/6, 1/6)") {
    state.alpha = 1.0;
    state.doc_topic_counts[0] = {2.0, 1.0, 0.0};
    const auto post = doc_topic_posterior(state, 0);
    CHECK(post[0] == Catch::Approx(3.0 / 6.0).margin(1e-12));
    CHECK(post[1] == Catch::Approx(2.0 / 6.0).margin(1e-12));
    CHECK(post[2] == Catch::Approx(1.0 / 6.0).margin(1e-12));
  }
  SECTION("posterior sums to one") {
    const auto post = doc_topic_posterior(state, 0);
    double total = 0.0;
    for (int k = 0; k < 3; ++k) total += post[static_cast<std::size_t>(k)];
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(doc_topic_posterior(state, 99), pgmc::InputError);
}

TEST_CASE("lda: word_importance degenerate and oracle cases") {
  SECTION("single-word vocabulary gives importance 1") {
    LdaState state(2, 1.0, 0.1);
    std::vector<WordDocument> docs = {{"w", "w"}, {"w"}};
    Rng rng(27);
    gibbs_sweep(state, docs, 2, rng);
    REQUIRE(state.vocab_size() == 1);
    CHECK(word_importance(state, "w", 0) == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("word exclusive to the posterior topic is maximal") {
    LdaState state(2, 0.01, 0.1);
    std::vector<WordDocument> docs = {{"alpha", "alpha", "alpha"}, {"beta", "beta", "beta"}};
    CategoricalPerDatum external = {one_hot(0, 2), one_hot(1, 2)};
    Rng rng(28);
    gibbs_sweep(state, docs, external, 2, rng);
    const double own = word_importance(state, "alpha", 0);
    const double other = word_importance(state, "beta", 0);
    CHECK(own > other);
    // Oracle: sum_k P(w|k) * post_k computed directly.
    const auto post = doc_topic_posterior(state, 0);
    const double v_beta = 2 * state.beta;
    double expected = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double pw = (state.count(k, 0) + state.beta) /
                        (state.topic_totals[static_cast<std::size_t>(k)] + v_beta);
      expected += pw * post[static_cast<std::size_t>(k)];
    }
    CHECK(own == Catch::Approx(expected).margin(1e-12));
  }
  SECTION("two-topic three-word fixture matches a direct summation") {
    LdaState state(2, 1.0, 0.25);
    std::vector<WordDocument> docs = {{"u", "v"}, {"v", "t", "t"}};
    Rng rng(29);
    gibbs_sweep(state, docs, 5, rng);
    for (const std::string word : {"u", "v", "t", "unseen"}) {
      const auto post = doc_topic_posterior(state, 1);
      const double v_beta = 3 * state.beta;
      double expected = 0.0;
      for (int k = 0; k < 2; ++k) {
        double count = 0.0;
        auto it = state.vocab_index.find(word);
        if (it != state.vocab_index.end()) count = state.count(k, it->second);
        expected += (count + state.beta) /
                    (state.topic_totals[static_cast<std::size_t>(k)] + v_beta) *
                    post[static_cast<std::size_t>(k)];
      }
      CHECK(word_importance(state, word, 1) == Catch::Approx(expected).margin(1e-12));
    }
  }
}

TEST_CASE("lda: count consistency holds after many sweeps") {
  Rng gen(30);
  std::vector<WordDocument> docs;
  for (int d = 0; d < 25; ++d) {
    WordDocument doc;
    for (int t = 0; t < 6; ++t) doc.push_back("w" + std::to_string(gen.index(12)));
    docs.push_back(doc);
  }
  LdaState state(4, 0.5, 0.2);
  Rng rng(31);
  gibbs_sweep(state, docs, 20, rng);
  check_count_consistency(state);
}

TEST_CASE("lda: uniform external message is identical to no message") {
  Rng gen(32);
  std::vector<WordDocument> docs;
  for (int d = 0; d < 20; ++d) {
    WordDocument doc;
    for (int t = 0; t < 5; ++t) doc.push_back("w" + std::to_string(gen.index(9)));
    docs.push_back(doc);
  }
  LdaState plain(3, 1.0, 0.1);
  LdaState biased(3, 1.0, 0.1);
  Rng rng_plain(33), rng_biased(33);
  CategoricalPerDatum uniform(docs.size(), Categorical::uniform(3));
  gibbs_sweep(plain, docs, 10, rng_plain);
  gibbs_sweep(biased, docs, uniform, 10, rng_biased);
  REQUIRE(plain.token_topics == biased.token_topics);
  REQUIRE(plain.topic_word_counts == biased.topic_word_counts);
}

TEST_CASE("lda: mixture-of-unigrams mode keeps one topic per document") {
  Rng gen(34);
  std::vector<WordDocument> docs;
  std::vector<int> truth;
  for (int d = 0; d < 30; ++d) {
    const int group = d % 2;
    WordDocument doc;
    for (int t = 0; t < 6; ++t) {
      doc.push_back("g" + std::to_string(group) + "w" + std::to_string(gen.index(4)));
    }
    docs.push_back(doc);
    truth.push_back(group);
  }
  LdaState state(2, 1.0, 0.1);
  state.mixture_of_unigrams = true;
  Rng rng(35);
  gibbs_sweep(state, docs, 30, rng);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (int z : state.token_topics[d]) REQUIRE(z == state.doc_assignments[d]);
  }
  std::vector<int> assigned(state.doc_assignments.begin(), state.doc_assignments.end());
  CHECK(pgmc::best_map_accuracy(assigned, truth) >= 99.0);
  check_count_consistency(state);
}

TEST_CASE("lda: shape violations throw") {
  LdaState state(2, 1.0, 0.1);
  Rng rng(36);
  std::vector<WordDocument> docs = {{"a"}, {}};
  CHECK_THROWS_AS(gibbs_sweep(state, docs, 1, rng), pgmc::InputError);
  std::vector<WordDocument> ok = {{"a"}, {"b"}};
  CategoricalPerDatum wrong_rows = {Categorical::uniform(2)};
  CHECK_THROWS_AS(gibbs_sweep(state, ok, wrong_rows, 1, rng), pgmc::DimensionError);
  CategoricalPerDatum wrong_width = {Categorical::uniform(3), Categorical::uniform(3)};
  CHECK_THROWS_AS(gibbs_sweep(state, ok, wrong_width, 1, rng), pgmc::DimensionError);
}
