#pragma once

#include "eos/common.hpp"

namespace eos {

enum class LossKind { mse, cross_entropy, logistic };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

// Per-example loss on network outputs z. `classes` is the logit dimension
// for mse and cross_entropy; logistic is scalar-output binary classification
// with labels in {-1, +1}. MSE targets are one-hot rows (classification) or
// plain regression targets, and carry the 1/2 factor: 1/2 * ||z - y||^2.
struct LossSpec {
  LossKind kind = LossKind::mse;
  int classes = 1;

  void validate() const;
};

struct LossEval {
  double value = 0.0;
  Vector grad;  // d loss / d z
  Matrix hess;  // d^2 loss / d z^2 (k x k; 1x1 for logistic)
};

// mse form: `target` is the regression target or one-hot row.
LossEval loss_eval(const LossSpec& spec, const Vector& z, const Vector& target);
// cross_entropy: label in [0, classes). logistic: label in {-1, +1}.
LossEval loss_eval(const LossSpec& spec, const Vector& z, int label);

// Multiclass: z[y] - max_{j != y} z[j]. Logistic: y * z. Undefined for mse.
double margin(const LossSpec& spec, const Vector& z, int label);

double log_sum_exp(const Vector& z);
Vector softmax(const Vector& z);
// 1 / (1 + exp(-m)) without overflow for large |m|.
double stable_sigmoid(double m);

}  // namespace eos
