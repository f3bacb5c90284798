#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/mlp/dataset.hpp"

namespace mvn::mlp {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                               const std::string& path) {
  if (buf.size() < off + 4) throw FormatError("idx: truncated header in " + path);
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) |
         (std::uint32_t{buf[off + 2]} << 8) | std::uint32_t{buf[off + 3]};
}

inline void expect_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "idx: bad magic 0x%08x (expected 0x%08x) in ", got, want);
    throw FormatError(msg + path);
  }
}

}  // namespace detail

/// Reads an IDX image/label pair (the MNIST layout). Pixels are divided by
/// 255 and the class count is one more than the largest label.
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  detail::expect_magic(detail::read_be32(img, 0, images_path), kIdxImagesMagic, images_path);
  detail::expect_magic(detail::read_be32(lab, 0, labels_path), kIdxLabelsMagic, labels_path);

  const std::size_t n = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t n_labels = detail::read_be32(lab, 4, labels_path);
  if (n != n_labels) {
    throw FormatError("idx: count mismatch (" + std::to_string(n) + " images, " +
                      std::to_string(n_labels) + " labels)");
  }
  if (n == 0) throw FormatError("idx: empty dataset");
  const std::size_t p = rows * cols;
  if (img.size() < 16 + n * p) throw FormatError("idx: truncated image data in " + images_path);
  if (lab.size() < 8 + n) throw FormatError("idx: truncated label data in " + labels_path);

  Dataset ds;
  ds.source = DatasetSource::MnistIdx;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(img[16 + i * p + j]) / 255.0;
    }
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = max_label + 1;
  return ds;
}

}  // namespace mvn::mlp
