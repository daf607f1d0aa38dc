#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class Algorithm { gd, polyak, nesterov, sgd };

std::string to_string(Algorithm alg);
Algorithm algorithm_from_string(const std::string& name);

using Rng = std::mt19937_64;

// In-place Fisher-Yates; draws come from `rng` in a fixed order so shuffles
// are reproducible from the seed alone.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(items[i - 1], items[pick(rng)]);
  }
}

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace eos
