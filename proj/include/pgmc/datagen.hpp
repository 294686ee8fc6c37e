#pragma once

// Local image-set generator. Renders 28x28 grayscale digit images from the
// embedded 8x8 handwriting bank with a seeded affine/intensity jitter per
// sample, and writes standard IDX files. This supplies the image side of the
// experiment without any external downloads.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "pgmc/digit_bank.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

struct ImageJitter {
  double rotation_deg = 14.0;   // uniform in +-rotation_deg
  double log_scale = 0.12;      // uniform in +-log_scale, applied as exp()
  double shear = 0.15;          // uniform in +-shear
  double translate = 0.10;      // uniform in +-translate, canvas units
  double base_scale = 0.74;     // glyph extent as a fraction of the canvas
  double contrast_lo = 0.80;    // gamma jitter range
  double contrast_hi = 1.30;
  double noise_sigma = 0.04;    // additive Gaussian pixel noise
  double speckle_prob = 0.015;  // salt noise rate
};

namespace detail {

inline double bank_pixel(std::size_t sample, int row, int col) {
  if (row < 0 || col < 0 || row >= static_cast<int>(digit_bank::kSide) ||
      col >= static_cast<int>(digit_bank::kSide)) {
    return 0.0;
  }
  const std::size_t flat = static_cast<std::size_t>(row) * digit_bank::kSide +
                           static_cast<std::size_t>(col);
  const unsigned char byte = static_cast<unsigned char>(
      digit_bank::kPixels[sample * digit_bank::kPackedBytesPerSample + flat / 2]);
  const unsigned char nibble = (flat % 2 == 0) ? (byte >> 4) : (byte & 0x0f);
  return static_cast<double>(nibble) / 15.0;
}

inline double bank_bilinear(std::size_t sample, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0;
  const double fc = col - c0;
  const double v00 = bank_pixel(sample, r0, c0);
  const double v01 = bank_pixel(sample, r0, c0 + 1);
  const double v10 = bank_pixel(sample, r0 + 1, c0);
  const double v11 = bank_pixel(sample, r0 + 1, c0 + 1);
  return v00 * (1 - fr) * (1 - fc) + v01 * (1 - fr) * fc + v10 * fr * (1 - fc) + v11 * fr * fc;
}

}  // namespace detail

// Renders one jittered 28x28 view of a bank sample into `out` (784 doubles).
inline void render_digit(std::size_t bank_sample, const ImageJitter& jitter, Rng& rng,
                         double* out) {
  const double angle = rng.uniform(-jitter.rotation_deg, jitter.rotation_deg) * M_PI / 180.0;
  const double scale = jitter.base_scale * std::exp(rng.uniform(-jitter.log_scale, jitter.log_scale));
  const double shear = rng.uniform(-jitter.shear, jitter.shear);
  const double tx = rng.uniform(-jitter.translate, jitter.translate);
  const double ty = rng.uniform(-jitter.translate, jitter.translate);
  const double gamma = rng.uniform(jitter.contrast_lo, jitter.contrast_hi);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double side = 28.0;
  const double bank_side = static_cast<double>(digit_bank::kSide);

  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      // Canvas pixel in centered unit coordinates, then the inverse transform.
      const double x = (static_cast<double>(c) + 0.5) / side - 0.5 - tx;
      const double y = (static_cast<double>(r) + 0.5) / side - 0.5 - ty;
      const double xr = (ca * x + sa * y) / scale;
      double yr = (-sa * x + ca * y) / scale;
      yr -= shear * xr;
      const double src_col = (xr + 0.5) * bank_side - 0.5;
      const double src_row = (yr + 0.5) * bank_side - 0.5;
      double v = detail::bank_bilinear(bank_sample, src_row, src_col);
      v = std::pow(std::min(1.0, std::max(0.0, v)), gamma);
      v += jitter.noise_sigma * rng.normal();
      if (rng.uniform() < jitter.speckle_prob) v += rng.uniform(0.2, 0.7);
      out[r * 28 + c] = std::min(1.0, std::max(0.0, v));
    }
  }
}

// `n` jittered samples balanced across digits, shuffle-free round robin. Each
// draw picks a random bank exemplar of the digit, so n may exceed the bank.
inline std::pair<Eigen::MatrixXd, std::vector<int>> generate_images(std::size_t n,
                                                                    const ImageJitter& jitter,
                                                                    Rng& rng) {
  if (n == 0) throw InputError("generate_images: n must be positive");
  std::vector<std::vector<std::size_t>> by_digit(10);
  for (std::size_t i = 0; i < digit_bank::kSampleCount; ++i) {
    by_digit[digit_bank::kLabels[i]].push_back(i);
  }
  Eigen::MatrixXd images(n, 784);
  std::vector<int> labels(n);
  std::vector<double> buf(784);
  for (std::size_t i = 0; i < n; ++i) {
    const int digit = static_cast<int>(i % 10);
    const auto& pool = by_digit[static_cast<std::size_t>(digit)];
    const std::size_t sample = pool[rng.index(pool.size())];
    render_digit(sample, jitter, rng, buf.data());
    for (std::size_t j = 0; j < 784; ++j) images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = buf[j];
    labels[i] = digit;
  }
  return {std::move(images), std::move(labels)};
}

}  // namespace pgmc
