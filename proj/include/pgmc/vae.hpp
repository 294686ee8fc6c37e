#pragma once

// Small MLP variational autoencoder trained by stochastic gradient ascent on
// the ELBO. The latent prior is N(prior_mean_i, I) with a per-datum mean
// supplied by the mixture module; an all-zero prior mean reproduces the
// standard objective exactly. Gradients are hand-derived; the finite
// difference oracle in the test suite checks them.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pgmc/errors.hpp"
#include "pgmc/message.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out

  void init(int out, int in, Rng& rng) {
    w.resize(out, in);
    b = Eigen::VectorXd::Zero(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
  }

  // Rows of x are data points.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
    return ((x * w.transpose()).rowwise() + b.transpose());
  }
};

struct AdamSlot {
  Eigen::MatrixXd mw, vw;
  Eigen::VectorXd mb, vb;

  void reset(const DenseLayer& layer) {
    mw = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
    vw = mw;
    mb = Eigen::VectorXd::Zero(layer.b.size());
    vb = mb;
  }
};

struct VaeConfig {
  int input_dim = 784;
  int hidden_dim = 128;
  int latent_dim = 10;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct VaeState {
  VaeConfig config;
  DenseLayer enc_hidden;  // input -> hidden, tanh
  DenseLayer enc_mean;    // hidden -> latent
  DenseLayer enc_logvar;  // hidden -> latent
  DenseLayer dec_hidden;  // latent -> hidden, tanh
  DenseLayer dec_logits;  // hidden -> input
  AdamSlot opt_enc_hidden, opt_enc_mean, opt_enc_logvar, opt_dec_hidden, opt_dec_logits;
  long adam_step = 0;
  std::uint64_t seed = 0;

  VaeState() = default;
  explicit VaeState(const VaeConfig& cfg, Rng& rng) : config(cfg) { reinitialize(rng); }

  void reinitialize(Rng& rng) {
    enc_hidden.init(config.hidden_dim, config.input_dim, rng);
    enc_mean.init(config.latent_dim, config.hidden_dim, rng);
    enc_logvar.init(config.latent_dim, config.hidden_dim, rng);
    dec_hidden.init(config.hidden_dim, config.latent_dim, rng);
    dec_logits.init(config.input_dim, config.hidden_dim, rng);
    opt_enc_hidden.reset(enc_hidden);
    opt_enc_mean.reset(enc_mean);
    opt_enc_logvar.reset(enc_logvar);
    opt_dec_hidden.reset(dec_hidden);
    opt_dec_logits.reset(dec_logits);
    adam_step = 0;
  }

  bool finite() const {
    for (const DenseLayer* l :
         {&enc_hidden, &enc_mean, &enc_logvar, &dec_hidden, &dec_logits}) {
      if (!l->w.allFinite() || !l->b.allFinite()) return false;
    }
    return true;
  }
};

namespace detail {

inline void check_pixels(const Eigen::MatrixXd& images, int input_dim) {
  if (images.cols() != input_dim) throw DimensionError("vae: image width mismatch");
  if (!images.allFinite()) throw InputError("vae: non-finite pixel value");
}

inline double softplus(double v) {
  // log(1 + exp(v)) without overflow.
  return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
}

}  // namespace detail

// KL( N(mean, diag(exp(logvar))) || N(prior_mean, I) ) in closed form.
inline double gaussian_kl(const std::vector<double>& mean, const std::vector<double>& logvar,
                          const std::vector<double>& prior_mean) {
  if (mean.size() != logvar.size() || mean.size() != prior_mean.size()) {
    throw DimensionError("gaussian_kl: dimension mismatch");
  }
  double kl = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double diff = mean[d] - prior_mean[d];
    kl += 0.5 * (std::exp(logvar[d]) + diff * diff - 1.0 - logvar[d]);
  }
  return kl;
}

// Encoder pass; rows of `images` are data points in [0,1]^input_dim.
inline void encode_batch(const VaeState& state, const Eigen::MatrixXd& images,
                         Eigen::MatrixXd& mean, Eigen::MatrixXd& logvar) {
  detail::check_pixels(images, state.config.input_dim);
  const Eigen::MatrixXd h = state.enc_hidden.forward(images).array().tanh().matrix();
  mean = state.enc_mean.forward(h);
  logvar = state.enc_logvar.forward(h);
}

inline std::pair<std::vector<double>, std::vector<double>> encode(const VaeState& state,
                                                                  const std::vector<double>& image) {
  Eigen::MatrixXd x(1, image.size());
  for (std::size_t j = 0; j < image.size(); ++j) x(0, j) = image[j];
  Eigen::MatrixXd mean, logvar;
  encode_batch(state, x, mean, logvar);
  return {std::vector<double>(mean.data(), mean.data() + mean.cols()),
          std::vector<double>(logvar.data(), logvar.data() + logvar.cols())};
}

// Decoder pass: latent rows to Bernoulli means in (0,1).
inline Eigen::MatrixXd decode_batch(const VaeState& state, const Eigen::MatrixXd& z) {
  if (z.cols() != state.config.latent_dim) throw DimensionError("vae: latent dim mismatch");
  if (!z.allFinite()) throw InputError("vae: non-finite latent");
  const Eigen::MatrixXd h = state.dec_hidden.forward(z).array().tanh().matrix();
  return state.dec_logits.forward(h).unaryExpr(
      [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

inline std::vector<double> decode(const VaeState& state, const std::vector<double>& z) {
  Eigen::MatrixXd zz(1, z.size());
  for (std::size_t j = 0; j < z.size(); ++j) zz(0, j) = z[j];
  const Eigen::MatrixXd px = decode_batch(state, zz);
  return std::vector<double>(px.data(), px.data() + px.cols());
}

struct VaeGradients {
  Eigen::MatrixXd enc_hidden_w, enc_mean_w, enc_logvar_w, dec_hidden_w, dec_logits_w;
  Eigen::VectorXd enc_hidden_b, enc_mean_b, enc_logvar_b, dec_hidden_b, dec_logits_b;
};

// Mean ELBO over the batch with one shared reparameterization draw, plus the
// analytic gradients of that mean. `noise` is one latent-dim row applied to
// every datum in the batch; sharing it keeps the estimator unbiased while
// making training invariant to dataset duplication.
inline double elbo_batch(const VaeState& state, const Eigen::MatrixXd& images,
                         const Eigen::MatrixXd& prior_means, const Eigen::RowVectorXd& noise,
                         VaeGradients* grads = nullptr) {
  detail::check_pixels(images, state.config.input_dim);
  if (prior_means.rows() != images.rows() || prior_means.cols() != state.config.latent_dim) {
    throw DimensionError("vae elbo: prior mean shape mismatch");
  }
  if (!prior_means.allFinite()) throw InputError("vae elbo: non-finite prior mean");
  const auto b = images.rows();
  const double inv_b = 1.0 / static_cast<double>(b);

  // Forward.
  const Eigen::MatrixXd h1 = state.enc_hidden.forward(images).array().tanh().matrix();
  const Eigen::MatrixXd mean = state.enc_mean.forward(h1);
  const Eigen::MatrixXd logvar = state.enc_logvar.forward(h1);
  const Eigen::MatrixXd sigma = (0.5 * logvar).array().exp().matrix();
  Eigen::MatrixXd z = mean;
  for (Eigen::Index i = 0; i < b; ++i) {
    z.row(i) += sigma.row(i).cwiseProduct(noise);
  }
  const Eigen::MatrixXd h2 = state.dec_hidden.forward(z).array().tanh().matrix();
  const Eigen::MatrixXd logits = state.dec_logits.forward(h2);

  // Bernoulli log-likelihood: x * l - softplus(l), summed over pixels.
  double recon = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      recon += images(i, j) * logits(i, j) - detail::softplus(logits(i, j));
    }
  }
  // Closed-form KL against N(prior_mean, I), summed over latent dims.
  double kl = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index d = 0; d < logvar.cols(); ++d) {
      const double lv = logvar(i, d);
      const double diff = mean(i, d) - prior_means(i, d);
      kl += 0.5 * (std::exp(lv) + diff * diff - 1.0 - lv);
    }
  }
  const double elbo = (recon - kl) * inv_b;
  if (!grads) return elbo;

  // Backward pass for the batch-mean ELBO (gradients for ascent).
  Eigen::MatrixXd d_logits = images - logits.unaryExpr([](double v) {
                                        return 1.0 / (1.0 + std::exp(-v));
                                      });
  d_logits *= inv_b;
  grads->dec_logits_w = d_logits.transpose() * h2;
  grads->dec_logits_b = d_logits.colwise().sum();
  const Eigen::MatrixXd d_h2 = d_logits * state.dec_logits.w;
  const Eigen::MatrixXd d_pre2 =
      d_h2.cwiseProduct((1.0 - h2.array().square()).matrix());
  grads->dec_hidden_w = d_pre2.transpose() * z;
  grads->dec_hidden_b = d_pre2.colwise().sum();
  const Eigen::MatrixXd d_z = d_pre2 * state.dec_hidden.w;

  Eigen::MatrixXd d_mean = d_z - (mean - prior_means) * inv_b;
  Eigen::MatrixXd d_logvar = d_z;
  for (Eigen::Index i = 0; i < b; ++i) {
    d_logvar.row(i) = d_logvar.row(i).cwiseProduct(noise).cwiseProduct(0.5 * sigma.row(i));
  }
  d_logvar -= (0.5 * inv_b) * ((logvar.array().exp() - 1.0).matrix());

  grads->enc_mean_w = d_mean.transpose() * h1;
  grads->enc_mean_b = d_mean.colwise().sum();
  grads->enc_logvar_w = d_logvar.transpose() * h1;
  grads->enc_logvar_b = d_logvar.colwise().sum();
  const Eigen::MatrixXd d_h1 = d_mean * state.enc_mean.w + d_logvar * state.enc_logvar.w;
  const Eigen::MatrixXd d_pre1 =
      d_h1.cwiseProduct((1.0 - h1.array().square()).matrix());
  grads->enc_hidden_w = d_pre1.transpose() * images;
  grads->enc_hidden_b = d_pre1.colwise().sum();
  return elbo;
}

// Single-datum ELBO with one reparameterized sample drawn from `rng`.
inline double elbo(const VaeState& state, const std::vector<double>& image,
                   const std::vector<double>& prior_mean, Rng& rng) {
  Eigen::MatrixXd x(1, image.size());
  for (std::size_t j = 0; j < image.size(); ++j) x(0, j) = image[j];
  Eigen::MatrixXd prior(1, prior_mean.size());
  for (std::size_t j = 0; j < prior_mean.size(); ++j) prior(0, j) = prior_mean[j];
  Eigen::RowVectorXd noise(state.config.latent_dim);
  for (int d = 0; d < state.config.latent_dim; ++d) noise(d) = rng.normal();
  return elbo_batch(state, x, prior, noise);
}

// Standard-prior objective: identical computation with a zero prior mean.
inline double standard_elbo(const VaeState& state, const std::vector<double>& image, Rng& rng) {
  return elbo(state, image, std::vector<double>(state.config.latent_dim, 0.0), rng);
}

namespace detail {

inline void adam_update(DenseLayer& layer, AdamSlot& slot, const Eigen::MatrixXd& gw,
                        const Eigen::VectorXd& gb, const VaeConfig& cfg, long step) {
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step));
  slot.mw = b1 * slot.mw + (1.0 - b1) * gw;
  slot.vw = b2 * slot.vw + (1.0 - b2) * gw.cwiseProduct(gw);
  slot.mb = b1 * slot.mb + (1.0 - b1) * gb;
  slot.vb = b2 * slot.vb + (1.0 - b2) * gb.cwiseProduct(gb);
  // Gradient ascent on the ELBO.
  layer.w.array() += cfg.learning_rate * (slot.mw.array() / bias1) /
                     ((slot.vw.array() / bias2).sqrt() + cfg.adam_eps);
  layer.b.array() += cfg.learning_rate * (slot.mb.array() / bias1) /
                     ((slot.vb.array() / bias2).sqrt() + cfg.adam_eps);
}

}  // namespace detail

// Re-initializes the parameters, then optimizes the mean ELBO for `epochs`
// passes of minibatch gradient ascent. Returns the per-epoch mean ELBO trace.
inline std::vector<double> train(VaeState& state, const Eigen::MatrixXd& images,
                                 const Eigen::MatrixXd& prior_means, int epochs, int batch_size,
                                 Rng& rng) {
  detail::check_pixels(images, state.config.input_dim);
  if (prior_means.rows() != images.rows()) {
    throw DimensionError("vae train: prior mean row count mismatch");
  }
  if (batch_size <= 0) throw InputError("vae train: batch size must be positive");
  const auto n = images.rows();

  state.reinitialize(rng);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(epochs));
  VaeGradients grads;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    // A permutation draw is skipped when one batch covers the dataset.
    std::vector<std::size_t> order;
    if (batch_size < n) {
      order = rng.permutation(static_cast<std::size_t>(n));
    } else {
      order.resize(static_cast<std::size_t>(n));
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    }
    double epoch_elbo = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(batch_size, n - start);
      Eigen::MatrixXd xb(count, images.cols());
      Eigen::MatrixXd pb(count, prior_means.cols());
      for (Eigen::Index i = 0; i < count; ++i) {
        xb.row(i) = images.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + i)]));
        pb.row(i) = prior_means.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(start + i)]));
      }
      Eigen::RowVectorXd noise(state.config.latent_dim);
      for (int d = 0; d < state.config.latent_dim; ++d) noise(d) = rng.normal();
      const double value = elbo_batch(state, xb, pb, noise, &grads);
      if (!std::isfinite(value)) {
        throw InputError("vae train: non-finite loss at epoch " + std::to_string(epoch));
      }
      ++state.adam_step;
      detail::adam_update(state.enc_hidden, state.opt_enc_hidden, grads.enc_hidden_w,
                          grads.enc_hidden_b, state.config, state.adam_step);
      detail::adam_update(state.enc_mean, state.opt_enc_mean, grads.enc_mean_w, grads.enc_mean_b,
                          state.config, state.adam_step);
      detail::adam_update(state.enc_logvar, state.opt_enc_logvar, grads.enc_logvar_w,
                          grads.enc_logvar_b, state.config, state.adam_step);
      detail::adam_update(state.dec_hidden, state.opt_dec_hidden, grads.dec_hidden_w,
                          grads.dec_hidden_b, state.config, state.adam_step);
      detail::adam_update(state.dec_logits, state.opt_dec_logits, grads.dec_logits_w,
                          grads.dec_logits_b, state.config, state.adam_step);
      epoch_elbo += value * static_cast<double>(count);
    }
    trace.push_back(epoch_elbo / static_cast<double>(n));
  }
  return trace;
}

// Per-image encoder means, published as the latent message.
inline GaussianMeans emit_latents(const VaeState& state, const Eigen::MatrixXd& images) {
  Eigen::MatrixXd mean, logvar;
  encode_batch(state, images, mean, logvar);
  GaussianMeans rows;
  rows.reserve(static_cast<std::size_t>(mean.rows()));
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(mean.cols()));
    for (Eigen::Index d = 0; d < mean.cols(); ++d) row[static_cast<std::size_t>(d)] = mean(i, d);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pgmc
