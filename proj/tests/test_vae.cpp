#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pgmc/rng.hpp"
#include "pgmc/vae.hpp"

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using pgmc::Rng;
using pgmc::VaeConfig;
using pgmc::VaeGradients;
using pgmc::VaeState;

namespace {

VaeConfig tiny_config() {
  VaeConfig cfg;
  cfg.input_dim = 4;
  cfg.hidden_dim = 3;
  cfg.latent_dim = 2;
  return cfg;
}

MatrixXd random_images(int n, int dim, Rng& rng) {
  MatrixXd x(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) x(i, j) = rng.uniform();
  }
  return x;
}

// Naive re-implementation of the forward ELBO with plain loops, used as an
// independent value oracle.
double elbo_oracle(const VaeState& s, const std::vector<double>& x,
                   const std::vector<double>& prior, const std::vector<double>& eps) {
  const int h = s.config.hidden_dim, z_dim = s.config.latent_dim, in = s.config.input_dim;
  std::vector<double> h1(h), mean(z_dim), logvar(z_dim), z(z_dim), h2(h);
  for (int r = 0; r < h; ++r) {
    double acc = s.enc_hidden.b(r);
    for (int c = 0; c < in; ++c) acc += s.enc_hidden.w(r, c) * x[c];
    h1[r] = std::tanh(acc);
  }
  for (int r = 0; r < z_dim; ++r) {
    double m = s.enc_mean.b(r), lv = s.enc_logvar.b(r);
    for (int c = 0; c < h; ++c) {
      m += s.enc_mean.w(r, c) * h1[c];
      lv += s.enc_logvar.w(r, c) * h1[c];
    }
    mean[r] = m;
    logvar[r] = lv;
    z[r] = m + std::exp(0.5 * lv) * eps[r];
  }
  for (int r = 0; r < h; ++r) {
    double acc = s.dec_hidden.b(r);
    for (int c = 0; c < z_dim; ++c) acc += s.dec_hidden.w(r, c) * z[c];
    h2[r] = std::tanh(acc);
  }
  double recon = 0.0;
  for (int r = 0; r < in; ++r) {
    double logit = s.dec_logits.b(r);
    for (int c = 0; c < h; ++c) logit += s.dec_logits.w(r, c) * h2[c];
    const double sp = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                  : std::log1p(std::exp(logit));
    recon += x[r] * logit - sp;
  }
  double kl = 0.0;
  for (int r = 0; r < z_dim; ++r) {
    const double diff = mean[r] - prior[r];
    kl += 0.5 * (std::exp(logvar[r]) + diff * diff - 1.0 - logvar[r]);
  }
  return recon - kl;
}

// Flattened parameter access for the finite-difference sweep.
std::vector<double*> all_params(VaeState& s) {
  std::vector<double*> out;
  for (pgmc::DenseLayer* layer :
       {&s.enc_hidden, &s.enc_mean, &s.enc_logvar, &s.dec_hidden, &s.dec_logits}) {
    for (Eigen::Index i = 0; i < layer->w.size(); ++i) out.push_back(layer->w.data() + i);
    for (Eigen::Index i = 0; i < layer->b.size(); ++i) out.push_back(layer->b.data() + i);
  }
  return out;
}

std::vector<double> flatten_gradients(const VaeGradients& g) {
  // Matches all_params order: weights then bias per layer.
  std::vector<double> out;
  auto push_layer = [&](const MatrixXd& w, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < w.size(); ++i) out.push_back(*(w.data() + i));
    for (Eigen::Index i = 0; i < b.size(); ++i) out.push_back(b(i));
  };
  push_layer(g.enc_hidden_w, g.enc_hidden_b);
  push_layer(g.enc_mean_w, g.enc_mean_b);
  push_layer(g.enc_logvar_w, g.enc_logvar_b);
  push_layer(g.dec_hidden_w, g.dec_hidden_b);
  push_layer(g.dec_logits_w, g.dec_logits_b);
  return out;
}

}  // namespace

TEST_CASE("vae: gaussian_kl closed form") {
  CHECK(pgmc::gaussian_kl({0.7, -0.3}, {0.0, 0.0}, {0.7, -0.3}) == 0.0);
  CHECK(pgmc::gaussian_kl({1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}) == Catch::Approx(0.5));
  // Non-negative, zero only at the prior.
  Rng rng(71);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> m{rng.normal(), rng.normal()};
    std::vector<double> lv{rng.normal() * 0.5, rng.normal() * 0.5};
    std::vector<double> mu{rng.normal(), rng.normal()};
    const double kl = pgmc::gaussian_kl(m, lv, mu);
    CHECK(kl >= -1e-12);
    if (std::abs(kl) < 1e-12) {
      CHECK(std::abs(m[0] - mu[0]) < 1e-6);
      CHECK(std::abs(lv[0]) < 1e-6);
    }
  }
}

TEST_CASE("vae: zero-initialized heads give zero encoder outputs") {
  Rng rng(72);
  VaeState s(tiny_config(), rng);
  s.enc_mean.w.setZero();
  s.enc_mean.b.setZero();
  s.enc_logvar.w.setZero();
  s.enc_logvar.b.setZero();
  const auto [mean, logvar] = pgmc::encode(s, {0.0, 0.0, 0.0, 0.0});
  REQUIRE(mean.size() == 2);
  REQUIRE(logvar.size() == 2);
  for (double v : mean) CHECK(v == 0.0);
  for (double v : logvar) CHECK(v == 0.0);
}

TEST_CASE("vae: encoder output shape and determinism") {
  Rng rng(73);
  VaeConfig cfg;  // full-size 784/128/10
  VaeState s(cfg, rng);
  std::vector<double> image(784);
  Rng pix(74);
  for (auto& v : image) v = pix.uniform();
  const auto [m1, lv1] = pgmc::encode(s, image);
  const auto [m2, lv2] = pgmc::encode(s, image);
  CHECK(m1.size() == 10);
  CHECK(lv1.size() == 10);
  CHECK(m1 == m2);
  CHECK(lv1 == lv2);
}

TEST_CASE("vae: zero-initialized decoder emits 0.5 everywhere") {
  Rng rng(75);
  VaeState s(tiny_config(), rng);
  s.dec_hidden.w.setZero();
  s.dec_hidden.b.setZero();
  s.dec_logits.w.setZero();
  s.dec_logits.b.setZero();
  const auto px = pgmc::decode(s, {0.3, -0.8});
  REQUIRE(px.size() == 4);
  for (double v : px) CHECK(v == Catch::Approx(0.5));
}

TEST_CASE("vae: decode(encode(x)) is finite and in (0,1)") {
  Rng rng(76);
  VaeState s(tiny_config(), rng);
  Rng pix(77);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> image{pix.uniform(), pix.uniform(), pix.uniform(), pix.uniform()};
    const auto [mean, logvar] = pgmc::encode(s, image);
    const auto px = pgmc::decode(s, mean);
    for (double v : px) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("vae: elbo equals the independent loop oracle") {
  Rng rng(78);
  VaeState s(tiny_config(), rng);
  Rng pix(79);
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> image{pix.uniform(), pix.uniform(), pix.uniform(), pix.uniform()};
    const std::vector<double> prior{pix.normal(), pix.normal()};
    const std::vector<double> eps{pix.normal(), pix.normal()};
    MatrixXd x(1, 4);
    for (int j = 0; j < 4; ++j) x(0, j) = image[static_cast<std::size_t>(j)];
    MatrixXd pm(1, 2);
    pm << prior[0], prior[1];
    RowVectorXd noise(2);
    noise << eps[0], eps[1];
    const double fast = pgmc::elbo_batch(s, x, pm, noise);
    const double slow = elbo_oracle(s, image, prior, eps);
    CHECK(fast == Catch::Approx(slow).epsilon(1e-10));
  }
}

TEST_CASE("vae: KL term vanishes when the posterior equals the prior") {
  // Zero-initialized encoder heads force mean = 0, logvar = 0; with a zero
  // prior mean the ELBO must equal the pure reconstruction term.
  Rng rng(80);
  VaeState s(tiny_config(), rng);
  s.enc_mean.w.setZero();
  s.enc_mean.b.setZero();
  s.enc_logvar.w.setZero();
  s.enc_logvar.b.setZero();
  MatrixXd x(1, 4);
  x << 0.2, 0.8, 0.5, 0.1;
  MatrixXd prior = MatrixXd::Zero(1, 2);
  RowVectorXd noise = RowVectorXd::Zero(2);
  const double with_kl = pgmc::elbo_batch(s, x, prior, noise);
  // Reconstruction-only value computed through the oracle with the KL part
  // subtracted out by construction (KL == 0 here).
  const double oracle = elbo_oracle(s, {0.2, 0.8, 0.5, 0.1}, {0.0, 0.0}, {0.0, 0.0});
  CHECK(with_kl == Catch::Approx(oracle).epsilon(1e-12));
  CHECK(pgmc::gaussian_kl({0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}) == 0.0);
}

TEST_CASE("vae: analytic gradients match central finite differences") {
  for (int fixture = 0; fixture < 20; ++fixture) {
    Rng rng(100 + static_cast<std::uint64_t>(fixture));
    VaeState s(tiny_config(), rng);
    Rng pix(200 + static_cast<std::uint64_t>(fixture));
    MatrixXd x(2, 4);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 4; ++j) x(i, j) = pix.uniform();
    }
    MatrixXd prior(2, 2);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) prior(i, j) = 0.5 * pix.normal();
    }
    RowVectorXd noise(2);
    noise << pix.normal(), pix.normal();

    VaeGradients grads;
    pgmc::elbo_batch(s, x, prior, noise, &grads);
    const auto analytic = flatten_gradients(grads);
    auto params = all_params(s);
    REQUIRE(analytic.size() == params.size());

    const double eps_fd = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double saved = *params[p];
      *params[p] = saved + eps_fd;
      const double up = pgmc::elbo_batch(s, x, prior, noise);
      *params[p] = saved - eps_fd;
      const double down = pgmc::elbo_batch(s, x, prior, noise);
      *params[p] = saved;
      const double fd = (up - down) / (2.0 * eps_fd);
      const double scale = std::max({std::abs(fd), std::abs(analytic[p]), 1e-4});
      worst = std::max(worst, std::abs(fd - analytic[p]) / scale);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("vae: zero prior mean reproduces the standard objective bit for bit") {
  Rng rng(81);
  VaeState s(tiny_config(), rng);
  const std::vector<double> image{0.1, 0.9, 0.4, 0.6};
  Rng noise_a(82), noise_b(82);
  const double with_zero_prior = pgmc::elbo(s, image, {0.0, 0.0}, noise_a);
  const double standard = pgmc::standard_elbo(s, image, noise_b);
  CHECK(with_zero_prior == standard);  // exact equality
}

TEST_CASE("vae: training is invariant to dataset duplication with doubled batch") {
  Rng rng(83);
  const MatrixXd x = random_images(5, 4, rng);
  MatrixXd x2(10, 4);
  x2 << x, x;
  const MatrixXd prior = MatrixXd::Zero(5, 2);
  const MatrixXd prior2 = MatrixXd::Zero(10, 2);

  Rng ra(84), rb(84);
  VaeState sa(tiny_config(), ra);
  VaeState sb(tiny_config(), rb);
  Rng ta(85), tb(85);
  pgmc::train(sa, x, prior, 1, 5, ta);
  pgmc::train(sb, x2, prior2, 1, 10, tb);

  for (auto [pa, pb] : {std::pair{&sa.enc_hidden, &sb.enc_hidden},
                        std::pair{&sa.dec_logits, &sb.dec_logits},
                        std::pair{&sa.enc_logvar, &sb.enc_logvar}}) {
    CHECK((pa->w - pb->w).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((pa->b - pb->b).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("vae: epoch and step bookkeeping") {
  Rng rng(86);
  const MatrixXd x = random_images(12, 4, rng);
  const MatrixXd prior = MatrixXd::Zero(12, 2);
  VaeState s(tiny_config(), rng);
  Rng t(87);
  const auto trace = pgmc::train(s, x, prior, 5, 4, t);
  CHECK(trace.size() == 5);
  CHECK(s.adam_step == 5 * 3);  // 12 images / batch 4 = 3 steps per epoch

  VaeState s0(tiny_config(), rng);
  Rng t0(88);
  const auto empty_trace = pgmc::train(s0, x, prior, 0, 4, t0);
  CHECK(empty_trace.empty());
  CHECK(s0.adam_step == 0);
}

TEST_CASE("vae: the objective improves over training") {
  Rng rng(89);
  // Two pixel patterns the tiny net can learn to reconstruct.
  MatrixXd x(30, 4);
  for (int i = 0; i < 30; ++i) {
    if (i % 2 == 0) {
      x.row(i) << 0.95, 0.05, 0.9, 0.1;
    } else {
      x.row(i) << 0.05, 0.95, 0.1, 0.9;
    }
  }
  const MatrixXd prior = MatrixXd::Zero(30, 2);
  VaeConfig cfg = tiny_config();
  cfg.learning_rate = 5e-3;
  VaeState s(cfg, rng);
  Rng t(90);
  const auto trace = pgmc::train(s, x, prior, 60, 10, t);
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += trace[static_cast<std::size_t>(i)];
    last += trace[trace.size() - 1 - static_cast<std::size_t>(i)];
  }
  CHECK(last / 10.0 > first / 10.0);
}

TEST_CASE("vae: emit_latents returns one encoder mean row per image") {
  Rng rng(91);
  VaeState s(tiny_config(), rng);
  MatrixXd x = random_images(6, 4, rng);
  x.row(3) = x.row(0);  // duplicate image
  const auto rows = pgmc::emit_latents(s, x);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].size() == 2);
  CHECK(rows[0] == rows[3]);

  s.enc_hidden.w.setZero();
  s.enc_hidden.b.setZero();
  s.enc_mean.w.setZero();
  s.enc_mean.b.setZero();
  const auto zero_rows = pgmc::emit_latents(s, x);
  for (const auto& row : zero_rows) {
    for (double v : row) CHECK(v == 0.0);
  }
}

TEST_CASE("vae: invalid inputs throw") {
  Rng rng(92);
  VaeState s(tiny_config(), rng);
  MatrixXd bad(1, 4);
  bad << 0.1, std::nan(""), 0.2, 0.3;
  MatrixXd mean_out, logvar_out;
  CHECK_THROWS_AS(pgmc::encode_batch(s, bad, mean_out, logvar_out), pgmc::InputError);
  MatrixXd z(1, 3);  // wrong latent width
  z.setZero();
  CHECK_THROWS_AS(pgmc::decode_batch(s, z), pgmc::DimensionError);
  const MatrixXd x = random_images(4, 4, rng);
  const MatrixXd prior = MatrixXd::Zero(3, 2);  // wrong row count
  Rng t(93);
  CHECK_THROWS_AS(pgmc::train(s, x, prior, 1, 2, t), pgmc::DimensionError);
}
