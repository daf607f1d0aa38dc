#pragma once

#include <array>
#include <string>

#include "eos/common.hpp"

namespace eos {

struct Dataset {
  enum class Kind { regression, classification };

  Matrix features;          // n x d
  Matrix targets;           // n x m; one-hot rows for classification
  std::vector<int> labels;  // classification only (empty for regression)
  Kind kind = Kind::regression;
  std::string provenance;   // generator + seed, or file + count

  Index n() const { return features.rows(); }
  Index feature_dim() const { return features.cols(); }
  Index target_dim() const { return targets.cols(); }
  void validate() const;
};

// 20 points x_j = -1 + 2j/19 labeled noiselessly by the degree-k Chebyshev
// polynomial (T0 = 1, T1 = x, T_{k+1} = 2 x T_k - T_{k-1}).
Dataset chebyshev_dataset(int degree);

double chebyshev_value(int degree, double x);

// X = sqrt(n) * Q from the QR of an n x d standard-normal matrix (so that
// (1/n) X^T X = I), A a d x d standard-normal matrix, Y = X A^T. Requires
// n >= d.
Dataset deep_linear_dataset(int n, int d, std::uint64_t seed);

// Gaussian clusters with unit covariance centered at `separation` times
// random unit directions; balanced integer labels, one-hot targets.
Dataset blobs_dataset(int n, int d, int classes, double separation,
                      std::uint64_t seed);

struct ChannelStats {
  std::array<double, 3> mean;
  std::array<double, 3> stddev;
};

// Widely used full-dataset CIFAR-10 per-channel statistics on [0,1]-scaled
// pixels (external constants; see README).
inline constexpr ChannelStats kCifar10ChannelStats = {
    {0.4914, 0.4822, 0.4465}, {0.2470, 0.2435, 0.2616}};

// Reads `count` leading records of a CIFAR-10 binary batch file (3073-byte
// records: 1 label byte + 3072 channel-major pixel bytes), scales pixels to
// [0,1] and standardizes each channel with the supplied statistics.
Dataset load_cifar_subset(const std::string& path, int count,
                          const ChannelStats& stats = kCifar10ChannelStats);

// First `count` examples of a dataset (e.g. for approximate sharpness
// measurement on a sub-objective).
Dataset head_subset(const Dataset& data, Index count);

// Inspection dump: one row per example with feature, target and label
// columns; the provenance goes into a leading comment line.
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace eos
