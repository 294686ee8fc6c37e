#pragma once

// Dataset ingestion: IDX image/label files (big-endian, MNIST layout), the
// image-utterance pairing step, and the corpus sidecar files for the
// recognizer. Labels ride along but are only ever read by the eval layer.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pgmc/asr.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/rng.hpp"

namespace pgmc {

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& file, std::size_t offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) {
    throw FormatError(file + ": truncated header at byte " + std::to_string(offset));
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace detail

// Pixels scaled to [0,1]; one row per image.
inline Eigen::MatrixXd load_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file " + path);
  const std::uint32_t magic = detail::read_be32(in, path, 0);
  if (magic != 2051) {
    throw FormatError(path + ": bad image magic " + std::to_string(magic) + " at byte 0");
  }
  const std::uint32_t count = detail::read_be32(in, path, 4);
  const std::uint32_t rows = detail::read_be32(in, path, 8);
  const std::uint32_t cols = detail::read_be32(in, path, 12);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  Eigen::MatrixXd images(count, pixels);
  std::vector<unsigned char> buf(pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!in) {
      throw FormatError(path + ": truncated payload at byte " +
                        std::to_string(16 + static_cast<std::size_t>(i) * pixels));
    }
    for (std::size_t j = 0; j < pixels; ++j) {
      images(i, static_cast<Eigen::Index>(j)) = static_cast<double>(buf[j]) / 255.0;
    }
  }
  return images;
}

inline std::vector<int> load_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open label file " + path);
  const std::uint32_t magic = detail::read_be32(in, path, 0);
  if (magic != 2049) {
    throw FormatError(path + ": bad label magic " + std::to_string(magic) + " at byte 0");
  }
  const std::uint32_t count = detail::read_be32(in, path, 4);
  std::vector<int> labels(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int c = in.get();
    if (c == EOF) throw FormatError(path + ": truncated payload at byte " + std::to_string(8 + i));
    labels[i] = c;
  }
  return labels;
}

// Loads an aligned image/label pair and cross-checks the counts.
inline std::pair<Eigen::MatrixXd, std::vector<int>> load_mnist(const std::string& image_file,
                                                               const std::string& label_file) {
  Eigen::MatrixXd images = load_idx_images(image_file);
  std::vector<int> labels = load_idx_labels(label_file);
  if (static_cast<std::size_t>(images.rows()) != labels.size()) {
    throw FormatError("image/label count mismatch: " + std::to_string(images.rows()) + " vs " +
                      std::to_string(labels.size()));
  }
  return {std::move(images), std::move(labels)};
}

// Byte-exact writers for the same layout (28x28 unless stated otherwise).
inline void save_idx_images(const std::string& path, const Eigen::MatrixXd& images, int rows,
                            int cols) {
  if (images.cols() != static_cast<Eigen::Index>(rows) * cols) {
    throw DimensionError("save_idx_images: pixel count does not match rows*cols");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image file " + path);
  detail::write_be32(out, 2051);
  detail::write_be32(out, static_cast<std::uint32_t>(images.rows()));
  detail::write_be32(out, static_cast<std::uint32_t>(rows));
  detail::write_be32(out, static_cast<std::uint32_t>(cols));
  for (Eigen::Index i = 0; i < images.rows(); ++i) {
    for (Eigen::Index j = 0; j < images.cols(); ++j) {
      const double v = images(i, j);
      const int byte = static_cast<int>(std::lround(v * 255.0));
      out.put(static_cast<char>(std::min(255, std::max(0, byte))));
    }
  }
  if (!out) throw IoError("short write to " + path);
}

inline void save_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write label file " + path);
  detail::write_be32(out, 2049);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.put(static_cast<char>(l));
  if (!out) throw IoError("short write to " + path);
}

// N aligned (image, utterance, digit) triples; `labels` is eval-only.
struct PairedDataset {
  Eigen::MatrixXd images;          // N x pixels
  std::vector<Utterance> utterances;
  std::vector<int> labels;
  std::uint64_t seed = 0;

  std::size_t size() const { return utterances.size(); }
};

// Samples `n` images balanced across digits where the pool allows, pairing
// each with a synthesized utterance of the same digit.
inline PairedDataset make_pairs(const Eigen::MatrixXd& images, const std::vector<int>& labels,
                                std::size_t n, const SyllableChannel& channel, Rng& rng) {
  if (static_cast<std::size_t>(images.rows()) != labels.size()) {
    throw InputError("make_pairs: image/label count mismatch");
  }
  if (n > labels.size()) {
    throw InputError("make_pairs: requested " + std::to_string(n) + " pairs but only " +
                     std::to_string(labels.size()) + " images are available");
  }
  std::vector<std::vector<std::size_t>> by_digit(10);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 9) throw InputError("make_pairs: label out of range");
    by_digit[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (auto& pool : by_digit) {
    // Shuffle each pool so the balanced draw is seed-dependent, not file-order.
    for (std::size_t i = pool.size(); i > 1; --i) {
      std::swap(pool[i - 1], pool[rng.index(i)]);
    }
  }
  // Round-robin across digits takes floor(n/10) from each, then the remainder
  // in digit order; short pools hand over to the leftover pass.
  std::vector<std::size_t> chosen;
  std::vector<std::size_t> cursor(10, 0);
  std::size_t digit = 0;
  std::size_t stalled = 0;
  while (chosen.size() < n && stalled < 10) {
    auto& pool = by_digit[digit];
    if (cursor[digit] < pool.size()) {
      chosen.push_back(pool[cursor[digit]++]);
      stalled = 0;
    } else {
      ++stalled;
    }
    digit = (digit + 1) % 10;
  }
  if (chosen.size() < n) throw InputError("make_pairs: digit pools exhausted");

  PairedDataset ds;
  ds.images.resize(static_cast<Eigen::Index>(n), images.cols());
  ds.labels.resize(n);
  ds.utterances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.images.row(static_cast<Eigen::Index>(i)) = images.row(static_cast<Eigen::Index>(chosen[i]));
    ds.labels[i] = labels[chosen[i]];
    ds.utterances.push_back(synthesize(ds.labels[i], channel, rng));
  }
  return ds;
}

// Corpus files: one utterance per line, space-separated syllables; labels in a
// sidecar file, one digit per line.
inline void save_corpus(const std::string& corpus_path, const std::string& label_path,
                        const std::vector<Utterance>& utterances) {
  std::ofstream corpus(corpus_path);
  std::ofstream labels(label_path);
  if (!corpus || !labels) throw IoError("cannot write corpus files");
  for (const auto& utt : utterances) {
    corpus << join_syllables(utt.observed_syllables) << '\n';
    labels << utt.true_digit << '\n';
  }
}

inline std::vector<Utterance> load_corpus(const std::string& corpus_path,
                                          const std::string& label_path) {
  std::ifstream corpus(corpus_path);
  if (!corpus) throw IoError("cannot open corpus file " + corpus_path);
  std::ifstream labels(label_path);
  if (!labels) throw IoError("cannot open corpus label file " + label_path);
  std::vector<Utterance> out;
  std::string line;
  long line_no = 0;
  while (std::getline(corpus, line)) {
    ++line_no;
    Utterance utt;
    utt.observed_syllables = split_syllables(line);
    if (utt.observed_syllables.empty()) {
      throw FormatError(corpus_path + ": empty utterance at line " + std::to_string(line_no));
    }
    int digit = -1;
    if (!(labels >> digit)) {
      throw FormatError(label_path + ": missing label for line " + std::to_string(line_no));
    }
    utt.true_digit = digit;
    out.push_back(std::move(utt));
  }
  return out;
}

}  // namespace pgmc
