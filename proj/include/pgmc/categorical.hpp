#pragma once

// Categorical distributions over the shared class index and the product-of-
// experts combination rule used when two modules both constrain it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pgmc/errors.hpp"

namespace pgmc {

struct Categorical {
  std::vector<double> probs;

  Categorical() = default;
  explicit Categorical(std::vector<double> p) : probs(std::move(p)) {}

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t k) const { return probs[k]; }

  static Categorical uniform(std::size_t k) {
    return Categorical(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  // Entries non-negative and summing to 1 within tol.
  bool is_normalized(double tol = 1e-9) const {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }

  std::size_t argmax() const {
    return static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
  }
};

enum class CombineMode { kProductOfExperts, kUnigramRescale };

// Set when a combination or resampling step had to fall back to a neutral
// result; the scheduler counts these per run instead of aborting mid-training.
struct DegeneracyFlag {
  long events = 0;
  void raise() { ++events; }
};

namespace detail {

inline bool all_entries_equal(std::span<const double> p) {
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] != p[0]) return false;
  }
  return true;
}

inline double log_sum_exp(std::span<const double> logs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double v : logs) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

}  // namespace detail

// Normalized elementwise product of the input distributions. Inputs need not
// be normalized. Constant inputs are the multiplicative identity and are
// skipped outright, which keeps "combine with a uniform message" bit-identical
// to "no message at all". An all-zero product degenerates to uniform.
inline Categorical poe_combine(std::span<const Categorical> inputs,
                               DegeneracyFlag* flag = nullptr) {
  if (inputs.empty()) throw InputError("poe_combine: no input distributions");
  const std::size_t k = inputs[0].size();
  for (const auto& in : inputs) {
    if (in.size() != k) {
      throw DimensionError("poe_combine: input has " + std::to_string(in.size()) +
                           " classes, expected " + std::to_string(k));
    }
  }
  if (k == 0) throw DimensionError("poe_combine: zero classes");

  std::vector<double> logs(k, 0.0);
  bool any_active = false;
  for (const auto& in : inputs) {
    if (detail::all_entries_equal(in.probs)) continue;
    any_active = true;
    for (std::size_t i = 0; i < k; ++i) {
      logs[i] += in.probs[i] > 0.0 ? std::log(in.probs[i])
                                   : -std::numeric_limits<double>::infinity();
    }
  }
  if (!any_active) return Categorical::uniform(k);

  const double lse = detail::log_sum_exp(logs);
  if (!std::isfinite(lse)) {
    if (flag) flag->raise();
    return Categorical::uniform(k);
  }
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = std::exp(logs[i] - lse);
  return Categorical(std::move(out));
}

inline Categorical poe_combine(std::initializer_list<Categorical> inputs,
                               DegeneracyFlag* flag = nullptr) {
  return poe_combine(std::span<const Categorical>(inputs.begin(), inputs.size()), flag);
}

// Uni-gram rescaling: product of the posteriors divided by the prior once per
// extra factor. With a uniform prior this coincides with the PoE rule.
inline Categorical unigram_rescale(std::span<const Categorical> inputs,
                                   const Categorical& prior,
                                   DegeneracyFlag* flag = nullptr) {
  if (inputs.empty()) throw InputError("unigram_rescale: no input distributions");
  const std::size_t k = inputs[0].size();
  if (prior.size() != k) throw DimensionError("unigram_rescale: prior size mismatch");
  if (inputs.size() == 1 || detail::all_entries_equal(prior.probs)) {
    return poe_combine(inputs, flag);
  }
  std::vector<Categorical> adjusted(inputs.begin(), inputs.end());
  // Fold prior^-(M-1) into the first active factor.
  const double m = static_cast<double>(inputs.size() - 1);
  Categorical inv_prior;
  inv_prior.probs.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    inv_prior.probs[i] =
        prior.probs[i] > 0.0 ? std::pow(prior.probs[i], -m) : 0.0;
  }
  adjusted.push_back(std::move(inv_prior));
  return poe_combine(adjusted, flag);
}

inline Categorical combine_posteriors(std::span<const Categorical> inputs,
                                      CombineMode mode, const Categorical& prior,
                                      DegeneracyFlag* flag = nullptr) {
  if (mode == CombineMode::kProductOfExperts) return poe_combine(inputs, flag);
  return unigram_rescale(inputs, prior, flag);
}

}  // namespace pgmc
