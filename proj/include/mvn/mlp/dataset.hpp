#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mvn/error.hpp"
#include "mvn/rng.hpp"

namespace mvn::mlp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class DatasetSource { SyntheticBlobs, MnistIdx };

inline std::string_view to_string(DatasetSource s) {
  return s == DatasetSource::SyntheticBlobs ? "blobs" : "mnist-idx";
}

struct Dataset {
  Matrix inputs;            // n x p, one example per row
  std::vector<int> labels;  // n
  int classes = 0;
  DatasetSource source = DatasetSource::SyntheticBlobs;

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(inputs.rows()); }
  [[nodiscard]] std::size_t p() const { return static_cast<std::size_t>(inputs.cols()); }

  void validate() const {
    if (inputs.rows() == 0) throw ConfigError("dataset: n must be >= 1");
    if (labels.size() != n()) throw ConfigError("dataset: label count does not match inputs");
    if (classes < 1) throw ConfigError("dataset: classes must be >= 1");
    for (int y : labels) {
      if (y < 0 || y >= classes) throw ConfigError("dataset: label out of range");
    }
    if (!inputs.allFinite()) throw NumericError("dataset: non-finite input");
  }

  /// Rows `idx` gathered into a batch.
  [[nodiscard]] Matrix gather_inputs(const std::vector<std::size_t>& idx) const {
    Matrix out(static_cast<Eigen::Index>(idx.size()), inputs.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = inputs.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
  }
  [[nodiscard]] std::vector<int> gather_labels(const std::vector<std::size_t>& idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
  }
};

/// k Gaussian clusters in R^p. Centers are standard normal draws; each point
/// is its center plus `spread` times standard normal noise. Example i gets
/// label i mod k, so classes are balanced with the remainder going to the
/// lowest labels.
inline Dataset make_blobs(std::size_t n, std::size_t p, std::size_t k, double spread, Rng& rng) {
  if (k < 2) throw ConfigError("k: need at least 2 classes");
  if (n < k) throw ConfigError("n: need at least k examples");
  if (p < 1) throw ConfigError("p: input dimension must be >= 1");
  if (!(spread > 0.0) || !std::isfinite(spread)) throw ConfigError("spread: must be > 0");

  Rng center_rng = rng.substream(0xc3);
  Rng point_rng = rng.substream(0x9a);
  Matrix centers(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(c, j) = center_rng.normal();
  }

  Dataset ds;
  ds.classes = static_cast<int>(k);
  ds.source = DatasetSource::SyntheticBlobs;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % k);
    ds.labels[i] = y;
    for (std::size_t j = 0; j < p; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          centers(y, static_cast<Eigen::Index>(j)) + spread * point_rng.normal();
    }
  }
  return ds;
}

}  // namespace mvn::mlp
