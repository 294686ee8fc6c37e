#pragma once

// Gaussian mixture over the encoder latents with a conjugate Gauss-Wishart
// prior. Assignments are Gibbs-sampled; between assignment passes the
// component parameters are set to their conjugate posterior means, and empty
// components are redrawn from the prior so they can recapture mass.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pgmc/categorical.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/message.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

// Posterior hyperparameters of one component's Gauss-Wishart update.
struct GaussWishartPosterior {
  double r = 0.0;
  Eigen::VectorXd m;
  Eigen::MatrixXd s;
  double nu = 0.0;
};

struct GmmState {
  int components = 0;
  int dim = 0;

  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  Eigen::VectorXd weights;

  // Prior: N(mu | m0, Sigma/r0) IW(Sigma | s0, nu0), symmetric Dirichlet on
  // the mixture weights.
  double r0 = 1.0;
  Eigen::VectorXd m0;
  Eigen::MatrixXd s0;
  double nu0 = 0.0;
  double weight_concentration = 1.0;

  std::vector<int> assignments;
  std::uint64_t seed = 0;
  mutable long regularization_events = 0;

  GmmState() = default;
  GmmState(int k, int d) : components(k), dim(d) {
    if (k <= 0 || d <= 0) throw InputError("GmmState: components and dim must be positive");
    m0 = Eigen::VectorXd::Zero(d);
    s0 = Eigen::MatrixXd::Identity(d, d);
    nu0 = static_cast<double>(d) + 2.0;  // weakly informative, > d - 1
    means.assign(static_cast<std::size_t>(k), Eigen::VectorXd::Zero(d));
    covariances.assign(static_cast<std::size_t>(k), Eigen::MatrixXd::Identity(d, d));
    weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  }
};

namespace detail {

// Cholesky with escalating jitter; counts how often jitter was needed.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& sigma, long* events) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  double jitter = 1e-6;
  Eigen::MatrixXd working = sigma;
  while (llt.info() != Eigen::Success && jitter < 1e3) {
    if (events) ++(*events);
    working = sigma + jitter * Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols());
    llt.compute(working);
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success) throw InputError("gmm: covariance is not positive definite");
  return llt;
}

inline double log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                           const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const int d = static_cast<int>(x.size());
  const Eigen::VectorXd diff = x - mean;
  const Eigen::VectorXd solved = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (int i = 0; i < d; ++i) log_det += std::log(llt.matrixLLT()(i, i));
  return -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - log_det -
         0.5 * solved.squaredNorm();
}

// Wishart(nu, scale) draw via the Bartlett decomposition.
inline Eigen::MatrixXd wishart_draw(double nu, const Eigen::MatrixXd& scale, Rng& rng,
                                    long* events) {
  const int d = static_cast<int>(scale.rows());
  const auto llt = robust_llt(scale, events);
  Eigen::MatrixXd l = llt.matrixL();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(nu - static_cast<double>(i)));
    for (int j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd la = l * a;
  return la * la.transpose();
}

}  // namespace detail

// Conjugate posterior hyperparameters for one component given its members.
inline GaussWishartPosterior gauss_wishart_posterior(const GmmState& state,
                                                     std::span<const Eigen::VectorXd> members) {
  const double n = static_cast<double>(members.size());
  GaussWishartPosterior post;
  post.r = state.r0 + n;
  post.nu = state.nu0 + n;
  if (members.empty()) {
    post.m = state.m0;
    post.s = state.s0;
    return post;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(state.dim);
  for (const auto& x : members) mean += x;
  mean /= n;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(state.dim, state.dim);
  for (const auto& x : members) {
    const Eigen::VectorXd diff = x - mean;
    scatter += diff * diff.transpose();
  }
  const Eigen::VectorXd prior_diff = mean - state.m0;
  post.m = (state.r0 * state.m0 + n * mean) / post.r;
  post.s = state.s0 + scatter + (state.r0 * n / post.r) * prior_diff * prior_diff.transpose();
  return post;
}

// Class posterior for one latent under the current mixture, computed in log
// space and normalized.
inline Categorical responsibilities(const GmmState& state, const Eigen::VectorXd& latent) {
  if (latent.size() != state.dim) throw DimensionError("gmm responsibilities: latent dim mismatch");
  std::vector<double> logs(static_cast<std::size_t>(state.components));
  for (int k = 0; k < state.components; ++k) {
    const auto llt = detail::robust_llt(state.covariances[static_cast<std::size_t>(k)],
                                        &state.regularization_events);
    logs[static_cast<std::size_t>(k)] =
        std::log(state.weights(k)) +
        detail::log_gaussian(latent, state.means[static_cast<std::size_t>(k)], llt);
  }
  const double lse = detail::log_sum_exp(logs);
  std::vector<double> p(logs.size());
  for (std::size_t k = 0; k < logs.size(); ++k) p[k] = std::exp(logs[k] - lse);
  return Categorical(std::move(p));
}

namespace detail {

// Sets every component to its conjugate posterior mean given the current
// assignments; empty components are redrawn from the prior.
inline void refresh_parameters(GmmState& state, const std::vector<Eigen::VectorXd>& latents,
                               Rng& rng) {
  const int d = state.dim;
  std::vector<std::vector<Eigen::VectorXd>> members(static_cast<std::size_t>(state.components));
  for (std::size_t i = 0; i < latents.size(); ++i) {
    members[static_cast<std::size_t>(state.assignments[i])].push_back(latents[i]);
  }
  for (int k = 0; k < state.components; ++k) {
    auto& group = members[static_cast<std::size_t>(k)];
    if (group.empty()) {
      // Redraw from the prior: Sigma ~ IW(s0, nu0), mu ~ N(m0, Sigma / r0).
      const Eigen::MatrixXd s0_inv = state.s0.inverse();
      const Eigen::MatrixXd w = wishart_draw(state.nu0, s0_inv, rng, &state.regularization_events);
      Eigen::MatrixXd sigma = w.inverse();
      sigma = 0.5 * (sigma + sigma.transpose());
      const auto llt = robust_llt(sigma / state.r0, &state.regularization_events);
      Eigen::VectorXd z(d);
      for (int i = 0; i < d; ++i) z(i) = rng.normal();
      state.covariances[static_cast<std::size_t>(k)] = sigma;
      state.means[static_cast<std::size_t>(k)] = state.m0 + llt.matrixL() * z;
    } else {
      const auto post = gauss_wishart_posterior(state, group);
      state.means[static_cast<std::size_t>(k)] = post.m;
      Eigen::MatrixXd sigma = post.s / (post.nu - static_cast<double>(d) - 1.0);
      if (group.size() < static_cast<std::size_t>(d) + 1) {
        sigma += 1e-6 * Eigen::MatrixXd::Identity(d, d);
      }
      state.covariances[static_cast<std::size_t>(k)] = sigma;
    }
  }
  const double n = static_cast<double>(latents.size());
  const double k_gamma = state.weight_concentration * static_cast<double>(state.components);
  for (int k = 0; k < state.components; ++k) {
    state.weights(k) = (static_cast<double>(members[static_cast<std::size_t>(k)].size()) +
                        state.weight_concentration) /
                       (n + k_gamma);
  }
}

}  // namespace detail

// Resets the assignments, then alternates conjugate parameter refreshes with
// sampled assignment passes. `external` rows (when present) multiply into each
// datum's class posterior; a uniform row is identical to no row.
inline void gibbs_sweep(GmmState& state, const std::vector<Eigen::VectorXd>& latents,
                        std::span<const Categorical> external, int sweeps, Rng& rng,
                        DegeneracyFlag* flag = nullptr) {
  if (latents.empty()) throw InputError("gmm gibbs_sweep: no latents");
  for (const auto& x : latents) {
    if (x.size() != state.dim) throw DimensionError("gmm gibbs_sweep: latent dim mismatch");
    if (!x.allFinite()) throw InputError("gmm gibbs_sweep: latent is not finite");
  }
  if (!external.empty()) {
    if (external.size() != latents.size()) {
      throw DimensionError("gmm gibbs_sweep: external message has wrong row count");
    }
    for (const auto& row : external) {
      if (static_cast<int>(row.size()) != state.components) {
        throw DimensionError("gmm gibbs_sweep: external message has wrong class count");
      }
    }
  }

  // Reset per update: fresh random assignments.
  state.assignments.resize(latents.size());
  for (auto& z : state.assignments) {
    z = static_cast<int>(rng.index(static_cast<std::size_t>(state.components)));
  }

  for (int s = 0; s < sweeps; ++s) {
    detail::refresh_parameters(state, latents, rng);
    // Shared Cholesky factors for this pass.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
    llts.reserve(static_cast<std::size_t>(state.components));
    for (int k = 0; k < state.components; ++k) {
      llts.push_back(detail::robust_llt(state.covariances[static_cast<std::size_t>(k)],
                                        &state.regularization_events));
    }
    std::vector<double> logs(static_cast<std::size_t>(state.components));
    for (std::size_t i = 0; i < latents.size(); ++i) {
      for (int k = 0; k < state.components; ++k) {
        logs[static_cast<std::size_t>(k)] =
            std::log(state.weights(k)) +
            detail::log_gaussian(latents[i], state.means[static_cast<std::size_t>(k)],
                                 llts[static_cast<std::size_t>(k)]);
      }
      const double lse = detail::log_sum_exp(logs);
      Categorical resp;
      resp.probs.resize(logs.size());
      for (std::size_t k = 0; k < logs.size(); ++k) resp.probs[k] = std::exp(logs[k] - lse);
      Categorical target;
      if (!external.empty()) {
        target = poe_combine({resp, external[i]}, flag);
      } else {
        target = poe_combine({resp}, flag);
      }
      state.assignments[i] = static_cast<int>(rng.categorical(target.probs));
    }
  }
  detail::refresh_parameters(state, latents, rng);
}

inline void gibbs_sweep(GmmState& state, const std::vector<Eigen::VectorXd>& latents, int sweeps,
                        Rng& rng, DegeneracyFlag* flag = nullptr) {
  gibbs_sweep(state, latents, std::span<const Categorical>{}, sweeps, rng, flag);
}

// Per-datum mean vector of the component each datum is assigned to; this is
// the message consumed by the encoder module as its prior mean.
inline GaussianMeans component_means(const GmmState& state) {
  if (state.assignments.empty()) throw InputError("gmm component_means: no assignments");
  GaussianMeans rows;
  rows.reserve(state.assignments.size());
  for (int z : state.assignments) {
    const auto& mu = state.means[static_cast<std::size_t>(z)];
    rows.emplace_back(mu.data(), mu.data() + mu.size());
  }
  return rows;
}

}  // namespace pgmc
