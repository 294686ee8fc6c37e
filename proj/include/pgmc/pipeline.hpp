#pragma once

// Runtime composition: the message bus, the per-module adapters, and the
// sequential scheduler. Modules exchange messages only at update boundaries;
// within a cycle each visit consumes the latest inbound messages, resets and
// re-estimates its parameters, and publishes fresh outbound messages.
//
// A disabled communication link does not change the traffic pattern: the
// consumer just substitutes neutral content (uniform posteriors, zero prior
// means, constant importance, frozen language model), so every variant runs
// the same code path.

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pgmc/asr.hpp"
#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/gmm.hpp"
#include "pgmc/graph.hpp"
#include "pgmc/lda.hpp"
#include "pgmc/message.hpp"
#include "pgmc/report.hpp"
#include "pgmc/rng.hpp"
#include "pgmc/sir.hpp"
#include "pgmc/vae.hpp"

namespace pgmc {

class MessageBus {
 public:
  void publish(const std::string& variable, const std::string& sender, Message message) {
    message.sender = sender;
    message.epoch = hop_;
    slots_[variable][sender] = std::move(message);
  }

  // Latest message on `variable` from any module other than `receiver`.
  const Message* consume(const std::string& variable, const std::string& receiver) const {
    auto it = slots_.find(variable);
    if (it == slots_.end()) return nullptr;
    const Message* best = nullptr;
    for (const auto& [sender, msg] : it->second) {
      if (sender == receiver) continue;
      if (msg.epoch > hop_) {
        throw InputError("bus: message on '" + variable + "' is newer than the scheduler position");
      }
      if (!best || msg.epoch > best->epoch) best = &msg;
    }
    return best;
  }

  void advance_hop() { ++hop_; }
  long hop() const { return hop_; }

 private:
  std::map<std::string, std::map<std::string, Message>> slots_;
  long hop_ = 0;
};

class ModuleRuntime {
 public:
  explicit ModuleRuntime(std::string id) : id_(std::move(id)) {}
  virtual ~ModuleRuntime() = default;
  const std::string& id() const { return id_; }
  virtual void update(MessageBus& bus) = 0;

 private:
  std::string id_;
};

// ---------------------------------------------------------------------------

class VaeModule : public ModuleRuntime {
 public:
  VaeModule(std::string id, const Eigen::MatrixXd& images, VaeConfig config, int epochs,
            int batch_size, bool use_prior_means, std::string latent_variable,
            std::uint64_t seed)
      : ModuleRuntime(std::move(id)),
        images_(&images),
        epochs_(epochs),
        batch_size_(batch_size),
        use_prior_means_(use_prior_means),
        latent_variable_(std::move(latent_variable)),
        rng_(seed),
        state_(config, rng_) {
    state_.seed = seed;
  }

  void update(MessageBus& bus) override {
    const auto n = images_->rows();
    Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(n, state_.config.latent_dim);
    if (use_prior_means_) {
      if (const Message* msg = bus.consume(latent_variable_, id())) {
        const auto& rows = msg->means();
        if (rows.size() != static_cast<std::size_t>(n)) {
          throw DimensionError("vae: prior mean message has wrong row count");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto& row = rows[static_cast<std::size_t>(i)];
          if (row.size() != static_cast<std::size_t>(state_.config.latent_dim)) {
            throw DimensionError("vae: prior mean message has wrong width");
          }
          for (int d = 0; d < state_.config.latent_dim; ++d) {
            prior(i, d) = row[static_cast<std::size_t>(d)];
          }
        }
      }
    }
    trace_ = train(state_, *images_, prior, epochs_, batch_size_, rng_);
    Message out;
    out.payload = emit_latents(state_, *images_);
    bus.publish(latent_variable_, id(), std::move(out));
  }

  // Final-epoch training ELBO; before any training, a deterministic
  // zero-noise evaluation under the neutral prior.
  double current_mean_elbo() const {
    if (!trace_.empty()) return trace_.back();
    const Eigen::MatrixXd prior = Eigen::MatrixXd::Zero(images_->rows(), state_.config.latent_dim);
    const Eigen::RowVectorXd noise = Eigen::RowVectorXd::Zero(state_.config.latent_dim);
    return elbo_batch(state_, *images_, prior, noise);
  }

  const VaeState& state() const { return state_; }
  std::vector<std::vector<double>> latent_rows() const {
    auto rows = emit_latents(state_, *images_);
    return rows;
  }

 private:
  const Eigen::MatrixXd* images_;
  int epochs_;
  int batch_size_;
  bool use_prior_means_;
  std::string latent_variable_;
  Rng rng_;
  VaeState state_;
  std::vector<double> trace_;
};

// ---------------------------------------------------------------------------

class GmmModule : public ModuleRuntime {
 public:
  GmmModule(std::string id, int components, int dim, int sweeps, bool use_external,
            std::string latent_variable, std::string class_variable, double r0,
            double weight_concentration, std::uint64_t seed, DegeneracyFlag* flag)
      : ModuleRuntime(std::move(id)),
        sweeps_(sweeps),
        use_external_(use_external),
        latent_variable_(std::move(latent_variable)),
        class_variable_(std::move(class_variable)),
        rng_(seed),
        state_(components, dim),
        flag_(flag) {
    state_.r0 = r0;
    state_.weight_concentration = weight_concentration;
    state_.seed = seed;
  }

  // The initial-state metrics row needs assignments before the first visit.
  void seed_assignments(std::size_t n) {
    state_.assignments.resize(n);
    for (auto& z : state_.assignments) {
      z = static_cast<int>(rng_.index(static_cast<std::size_t>(state_.components)));
    }
  }

  void update(MessageBus& bus) override {
    const Message* latent_msg = bus.consume(latent_variable_, id());
    if (!latent_msg) throw InputError("gmm: no latent message available");
    const auto& rows = latent_msg->means();
    std::vector<Eigen::VectorXd> latents;
    latents.reserve(rows.size());
    for (const auto& row : rows) {
      latents.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(),
                                                          static_cast<Eigen::Index>(row.size())));
    }
    CategoricalPerDatum external;
    if (use_external_) {
      if (const Message* msg = bus.consume(class_variable_, id())) {
        external = msg->categorical();
      }
    }
    if (external.empty()) {
      gibbs_sweep(state_, latents, sweeps_, rng_, flag_);
    } else {
      gibbs_sweep(state_, latents, external, sweeps_, rng_, flag_);
    }

    // Publish the class posteriors toward the relay and the per-datum
    // component means toward the encoder.
    CategoricalPerDatum posteriors;
    posteriors.reserve(latents.size());
    for (const auto& x : latents) posteriors.push_back(responsibilities(state_, x));
    Message class_msg;
    class_msg.payload = std::move(posteriors);
    bus.publish(class_variable_, id(), std::move(class_msg));

    Message mean_msg;
    mean_msg.payload = component_means(state_);
    bus.publish(latent_variable_, id(), std::move(mean_msg));
  }

  const GmmState& state() const { return state_; }
  const std::vector<int>& assignments() const { return state_.assignments; }

 private:
  int sweeps_;
  bool use_external_;
  std::string latent_variable_;
  std::string class_variable_;
  Rng rng_;
  GmmState state_;
  DegeneracyFlag* flag_;
};

// ---------------------------------------------------------------------------

class LdaModule : public ModuleRuntime {
 public:
  LdaModule(std::string id, std::size_t datum_count, int topics, int words_per_doc, int sweeps,
            double alpha, double beta, bool mixture_of_unigrams, bool use_external,
            bool use_importance, std::string word_variable, std::string class_variable,
            std::uint64_t seed, DegeneracyFlag* flag)
      : ModuleRuntime(std::move(id)),
        datum_count_(datum_count),
        words_per_doc_(words_per_doc),
        sweeps_(sweeps),
        use_external_(use_external),
        use_importance_(use_importance),
        word_variable_(std::move(word_variable)),
        class_variable_(std::move(class_variable)),
        rng_(seed),
        state_(topics, alpha, beta),
        flag_(flag) {
    state_.mixture_of_unigrams = mixture_of_unigrams;
    state_.seed = seed;
  }

  void update(MessageBus& bus) override {
    const Message* hyp_msg = bus.consume(word_variable_, id());
    if (!hyp_msg) throw InputError("lda: no word hypotheses available");
    const WeightedSamples& lists = hyp_msg->samples();
    if (lists.size() != datum_count_) {
      throw DimensionError("lda: hypothesis message has wrong row count");
    }

    // Resample each observation's words from its hypothesis list. The list
    // entries stand in for posterior samples, so the proposal weight of each
    // distinct hypothesis is 1 and the importance is this module's predictive
    // word probability under the current (pre-reset) state.
    std::vector<WordDocument> docs(datum_count_);
    selected_words_.assign(datum_count_, std::string());
    for (std::size_t i = 0; i < datum_count_; ++i) {
      if (lists[i].empty()) throw InputError("lda: empty hypothesis list");
      std::vector<Hypothesis<std::string>> hyps;
      hyps.reserve(lists[i].size());
      for (const auto& wi : lists[i]) hyps.push_back({wi.item, 1.0});
      auto importance = [&](const std::string& word) -> double {
        if (!use_importance_ || state_.doc_count() != datum_count_) return 1.0;
        return word_importance(state_, word, i);
      };
      docs[i].reserve(static_cast<std::size_t>(words_per_doc_));
      for (int l = 0; l < words_per_doc_; ++l) {
        docs[i].push_back(sir_select(hyps, importance, rng_, flag_));
      }
      selected_words_[i] = docs[i].front();
    }

    CategoricalPerDatum external;
    if (use_external_) {
      if (const Message* msg = bus.consume(class_variable_, id())) {
        external = msg->categorical();
      }
    }
    if (external.empty()) {
      gibbs_sweep(state_, docs, sweeps_, rng_);
    } else {
      gibbs_sweep(state_, docs, external, sweeps_, rng_);
    }

    CategoricalPerDatum posteriors;
    posteriors.reserve(datum_count_);
    for (std::size_t d = 0; d < datum_count_; ++d) {
      posteriors.push_back(doc_topic_posterior(state_, d));
    }
    Message class_msg;
    class_msg.payload = std::move(posteriors);
    bus.publish(class_variable_, id(), std::move(class_msg));

    WeightedSamples picks(datum_count_);
    for (std::size_t i = 0; i < datum_count_; ++i) {
      picks[i].push_back(WeightedItem{selected_words_[i], 1.0});
    }
    Message word_msg;
    word_msg.payload = std::move(picks);
    bus.publish(word_variable_, id(), std::move(word_msg));
  }

  // Per-document class index (argmax of the document posterior); all zeros
  // before the first visit.
  std::vector<int> assignments() const {
    std::vector<int> out(datum_count_, 0);
    if (state_.doc_count() == datum_count_) {
      for (std::size_t d = 0; d < datum_count_; ++d) {
        out[d] = static_cast<int>(doc_topic_posterior(state_, d).argmax());
      }
    }
    return out;
  }

  const LdaState& state() const { return state_; }
  const std::vector<std::string>& selected_words() const { return selected_words_; }

 private:
  std::size_t datum_count_;
  int words_per_doc_;
  int sweeps_;
  bool use_external_;
  bool use_importance_;
  std::string word_variable_;
  std::string class_variable_;
  Rng rng_;
  LdaState state_;
  DegeneracyFlag* flag_;
  std::vector<std::string> selected_words_;
};

// ---------------------------------------------------------------------------

class AsrModule : public ModuleRuntime {
 public:
  AsrModule(std::string id, const std::vector<Utterance>& utterances, AsrState state, int l_best,
            bool lm_updates_enabled, std::string word_variable, std::uint64_t seed)
      : ModuleRuntime(std::move(id)),
        utterances_(&utterances),
        state_(std::move(state)),
        l_best_(l_best),
        lm_updates_enabled_(lm_updates_enabled),
        word_variable_(std::move(word_variable)),
        rng_(seed) {
    state_.seed = seed;
  }

  void update(MessageBus& bus) override {
    if (lm_updates_enabled_) {
      if (const Message* msg = bus.consume(word_variable_, id())) {
        const WeightedSamples& picks = msg->samples();
        std::vector<SyllableSeq> words;
        words.reserve(picks.size());
        for (const auto& list : picks) {
          if (!list.empty()) words.push_back(split_syllables(list.front().item));
        }
        if (!words.empty()) update_lm(state_, words);
      }
    }
    const Decoder decoder(state_);
    WeightedSamples lists(utterances_->size());
    for (std::size_t i = 0; i < utterances_->size(); ++i) {
      const auto scored = decoder.decode((*utterances_)[i], l_best_);
      lists[i].reserve(scored.size());
      for (const auto& sw : scored) {
        lists[i].push_back(WeightedItem{join_syllables(sw.word), sw.score});
      }
    }
    Message msg;
    msg.payload = std::move(lists);
    bus.publish(word_variable_, id(), std::move(msg));
  }

  const AsrState& state() const { return state_; }

 private:
  const std::vector<Utterance>* utterances_;
  AsrState state_;
  int l_best_;
  bool lm_updates_enabled_;
  std::string word_variable_;
  Rng rng_;
};

// ---------------------------------------------------------------------------

class TtotModule : public ModuleRuntime {
 public:
  TtotModule(std::string id, std::size_t datum_count, int classes, std::string variable_a,
             std::string variable_b)
      : ModuleRuntime(std::move(id)),
        datum_count_(datum_count),
        classes_(classes),
        variable_a_(std::move(variable_a)),
        variable_b_(std::move(variable_b)) {}

  void update(MessageBus& bus) override {
    Message from_a = placeholder();
    Message from_b = placeholder();
    if (const Message* msg = bus.consume(variable_a_, id())) from_a = *msg;
    if (const Message* msg = bus.consume(variable_b_, id())) from_b = *msg;
    auto [to_a, to_b] = ttot_relay(from_a, from_b);
    bus.publish(variable_a_, id(), std::move(to_a));
    bus.publish(variable_b_, id(), std::move(to_b));
  }

 private:
  Message placeholder() const {
    Message msg;
    msg.payload = CategoricalPerDatum(datum_count_, Categorical::uniform(
                                                        static_cast<std::size_t>(classes_)));
    return msg;
  }

  std::size_t datum_count_;
  int classes_;
  std::string variable_a_;
  std::string variable_b_;
};

// ---------------------------------------------------------------------------

// Runs the update order `n_updates` times over the registered modules,
// collecting one metrics row per cycle on top of the initial-state row.
// A module failure aborts the run with the module id and update index.
class Scheduler {
 public:
  Scheduler(const ModuleGraph& graph, std::vector<std::unique_ptr<ModuleRuntime>> modules)
      : graph_(&graph) {
    for (auto& m : modules) {
      const std::string key = m->id();
      if (!graph_->has_module(key)) {
        throw ConfigError("scheduler: module '" + key + "' is not in the graph");
      }
      modules_.emplace(key, std::move(m));
    }
    for (const auto& id : graph_->update_order) {
      if (!modules_.count(id)) {
        throw ConfigError("scheduler: no runtime registered for '" + id + "'");
      }
    }
  }

  using MetricsFn = std::function<ReportRow(int update)>;

  void run_schedule(int n_updates, const MetricsFn& metrics, ExperimentReport& report) {
    report.rows.push_back(metrics(0));
    for (int cycle = 1; cycle <= n_updates; ++cycle) {
      for (const auto& id : graph_->update_order) {
        bus_.advance_hop();
        try {
          modules_.at(id)->update(bus_);
        } catch (const std::exception& e) {
          throw InputError("update " + std::to_string(cycle) + ", module '" + id +
                           "': " + e.what());
        }
      }
      report.rows.push_back(metrics(cycle));
    }
  }

  MessageBus& bus() { return bus_; }

  template <typename T>
  T* module_as(const std::string& id) {
    auto it = modules_.find(id);
    return it == modules_.end() ? nullptr : dynamic_cast<T*>(it->second.get());
  }

 private:
  const ModuleGraph* graph_;
  std::map<std::string, std::unique_ptr<ModuleRuntime>> modules_;
  MessageBus bus_;
};

}  // namespace pgmc
