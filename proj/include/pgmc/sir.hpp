#pragma once

// Sampling importance resampling: one module proposes weighted hypotheses,
// the other scores them, and a single hypothesis is drawn with mass
// proportional to proposal_weight * importance. Duplicate items accumulate.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

template <typename Item>
struct Hypothesis {
  Item item;
  double proposal_weight = 0.0;
};

template <typename Item, typename ImportanceFn>
const Item& sir_select(std::span<const Hypothesis<Item>> hypotheses,
                       ImportanceFn&& importance, Rng& rng,
                       DegeneracyFlag* flag = nullptr) {
  if (hypotheses.empty()) throw InputError("sir_select: no hypotheses");
  std::vector<double> mass(hypotheses.size());
  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const double imp = importance(hypotheses[i].item);
    if (!std::isfinite(imp) || imp < 0.0) {
      throw InputError("sir_select: importance must be finite and non-negative");
    }
    if (hypotheses[i].proposal_weight < 0.0) {
      throw InputError("sir_select: proposal weights must be non-negative");
    }
    mass[i] = hypotheses[i].proposal_weight * imp;
    total += mass[i];
  }
  if (!(total > 0.0)) {
    // All importance mass vanished; fall back to the proposal alone.
    if (flag) flag->raise();
    total = 0.0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      mass[i] = hypotheses[i].proposal_weight;
      total += mass[i];
    }
    if (!(total > 0.0)) return hypotheses[rng.index(hypotheses.size())].item;
  }
  return hypotheses[rng.categorical(mass)].item;
}

template <typename Item, typename ImportanceFn>
const Item& sir_select(const std::vector<Hypothesis<Item>>& hypotheses,
                       ImportanceFn&& importance, Rng& rng,
                       DegeneracyFlag* flag = nullptr) {
  return sir_select(std::span<const Hypothesis<Item>>(hypotheses),
                    std::forward<ImportanceFn>(importance), rng, flag);
}

}  // namespace pgmc
