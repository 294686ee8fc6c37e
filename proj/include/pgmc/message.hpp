#pragma once

// The typed message exchanged between modules: a posterior over a shared
// latent, one entry per data point. Three carriers cover every connection the
// runtime supports: per-datum class posteriors, per-datum Gaussian means, and
// per-datum weighted hypothesis sets.

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"

namespace pgmc {

using CategoricalPerDatum = std::vector<Categorical>;

// Row-per-datum point estimates (e.g. encoder means or assigned component means).
using GaussianMeans = std::vector<std::vector<double>>;

struct WeightedItem {
  std::string item;   // space-joined syllable sequence
  double weight = 0.0;
};

using WeightedSamples = std::vector<std::vector<WeightedItem>>;

struct Message {
  std::variant<CategoricalPerDatum, GaussianMeans, WeightedSamples> payload;
  std::string sender;
  long epoch = 0;  // scheduler hop at which the message was published

  std::size_t datum_count() const {
    return std::visit([](const auto& v) { return v.size(); }, payload);
  }

  bool holds_categorical() const {
    return std::holds_alternative<CategoricalPerDatum>(payload);
  }

  const CategoricalPerDatum& categorical() const {
    if (!holds_categorical()) throw DimensionError("message does not carry class posteriors");
    return std::get<CategoricalPerDatum>(payload);
  }
  const GaussianMeans& means() const {
    if (!std::holds_alternative<GaussianMeans>(payload)) {
      throw DimensionError("message does not carry Gaussian means");
    }
    return std::get<GaussianMeans>(payload);
  }
  const WeightedSamples& samples() const {
    if (!std::holds_alternative<WeightedSamples>(payload)) {
      throw DimensionError("message does not carry weighted samples");
    }
    return std::get<WeightedSamples>(payload);
  }
};

// Relays the two categorical message streams across a fork-shaped shared
// latent: each side receives the other's posterior, unmodified.
inline std::pair<Message, Message> ttot_relay(const Message& incoming_from_a,
                                              const Message& incoming_from_b) {
  const auto& a = incoming_from_a.categorical();
  const auto& b = incoming_from_b.categorical();
  if (a.size() != b.size()) {
    throw DimensionError("ttot_relay: datum counts differ (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) {
      throw DimensionError("ttot_relay: class counts differ at datum " + std::to_string(i));
    }
  }
  return {incoming_from_b, incoming_from_a};
}

}  // namespace pgmc
