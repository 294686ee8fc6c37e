#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pgmc/rng.hpp"
#include "pgmc/sir.hpp"

using pgmc::DegeneracyFlag;
using pgmc::Hypothesis;
using pgmc::Rng;
using pgmc::sir_select;

namespace {

// Analytic resampling masses: proposal weight times importance, duplicates
// accumulating; normalized.
std::map<std::string, double> mass_oracle(const std::vector<Hypothesis<std::string>>& hyps,
                                          const std::map<std::string, double>& importance) {
  std::map<std::string, double> mass;
  double total = 0.0;
  for (const auto& h : hyps) {
    const double m = h.proposal_weight * importance.at(h.item);
    mass[h.item] += m;
    total += m;
  }
  for (auto& [_, v] : mass) v /= total;
  return mass;
}

double total_variation(const std::map<std::string, double>& a,
                       const std::map<std::string, double>& b) {
  double tv = 0.0;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    tv += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) tv += v;
  }
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("sir_select: zero-importance hypotheses never win") {
  std::vector<Hypothesis<std::string>> hyps = {{"a", 1.0}, {"b", 1.0}};
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto& pick = sir_select(hyps, [](const std::string& s) { return s == "b" ? 1.0 : 0.0; },
                                  rng);
    REQUIRE(pick == "b");
  }
}

TEST_CASE("sir_select: single hypothesis is returned regardless of importance") {
  std::vector<Hypothesis<std::string>> hyps = {{"a", 1.0}};
  Rng rng(8);
  CHECK(sir_select(hyps, [](const std::string&) { return 0.37; }, rng) == "a");
}

TEST_CASE("sir_select: duplicate items accumulate mass (empirical vs oracle)") {
  std::vector<Hypothesis<std::string>> hyps;
  for (int i = 0; i < 7; ++i) hyps.push_back({"a", 1.0});
  for (int i = 0; i < 3; ++i) hyps.push_back({"b", 1.0});
  const std::map<std::string, double> importance = {{"a", 1.0}, {"b", 3.0}};
  // Oracle: masses a: 7*1 = 7, b: 3*3 = 9, so P(b) = 9/16.
  const auto expected = mass_oracle(hyps, importance);
  REQUIRE(expected.at("b") == Catch::Approx(9.0 / 16.0).margin(1e-15));

  Rng rng(9);
  const int draws = 100000;
  int b_count = 0;
  for (int i = 0; i < draws; ++i) {
    if (sir_select(hyps, [&](const std::string& s) { return importance.at(s); }, rng) == "b") {
      ++b_count;
    }
  }
  const double empirical = static_cast<double>(b_count) / draws;
  CHECK(std::abs(empirical - 9.0 / 16.0) < 0.01);
}

TEST_CASE("sir_select: empirical distribution within TV 0.01 of the analytic mass") {
  Rng fixture_rng(10);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<Hypothesis<std::string>> hyps;
    std::map<std::string, double> importance;
    const std::size_t n = 3 + fixture_rng.index(8);  // <= 10 hypotheses
    for (std::size_t i = 0; i < n; ++i) {
      const std::string item = "h" + std::to_string(fixture_rng.index(5));
      hyps.push_back({item, fixture_rng.uniform(0.1, 2.0)});
      if (!importance.count(item)) importance[item] = fixture_rng.uniform(0.1, 3.0);
    }
    const auto expected = mass_oracle(hyps, importance);
    Rng rng(100 + trial);
    std::map<std::string, double> counts;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      counts[sir_select(hyps, [&](const std::string& s) { return importance.at(s); }, rng)] += 1.0;
    }
    for (auto& [_, v] : counts) v /= draws;
    CHECK(total_variation(expected, counts) <= 0.01);
  }
}

TEST_CASE("sir_select: all masses zero falls back to the proposal with a flag") {
  std::vector<Hypothesis<std::string>> hyps = {{"a", 3.0}, {"b", 1.0}};
  DegeneracyFlag flag;
  Rng rng(11);
  std::map<std::string, int> counts;
  for (int i = 0; i < 4000; ++i) {
    counts[sir_select(hyps, [](const std::string&) { return 0.0; }, rng, &flag)] += 1;
  }
  CHECK(flag.events == 4000);
  // Proposal-only draw: P(a) = 3/4.
  CHECK(std::abs(counts["a"] / 4000.0 - 0.75) < 0.05);
}

TEST_CASE("sir_select: input validation") {
  std::vector<Hypothesis<std::string>> none;
  Rng rng(12);
  CHECK_THROWS_AS(sir_select(none, [](const std::string&) { return 1.0; }, rng),
                  pgmc::InputError);
  std::vector<Hypothesis<std::string>> hyps = {{"a", 1.0}};
  CHECK_THROWS_AS(
      sir_select(hyps, [](const std::string&) { return std::nan(""); }, rng),
      pgmc::InputError);
}
