#include "eos/losses.hpp"

#include <cmath>

namespace eos {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mse: return "mse";
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::logistic: return "logistic";
  }
  throw std::logic_error("unknown loss kind");
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "mse") return LossKind::mse;
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  if (name == "logistic") return LossKind::logistic;
  throw std::invalid_argument("unknown loss kind: " + name);
}

void LossSpec::validate() const {
  if (kind == LossKind::logistic) {
    if (classes != 1) {
      throw std::invalid_argument("logistic loss is scalar-output (classes=1)");
    }
    return;
  }
  if (classes < 1) throw std::invalid_argument("loss needs classes >= 1");
}

double log_sum_exp(const Vector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

Vector softmax(const Vector& z) {
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  return e / e.sum();
}

double stable_sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

namespace {

LossEval mse_eval(const Vector& z, const Vector& target) {
  if (z.size() != target.size()) {
    throw std::invalid_argument("mse: output/target size mismatch");
  }
  LossEval out;
  Vector r = z - target;
  out.value = 0.5 * r.squaredNorm();
  out.grad = std::move(r);
  out.hess = Matrix::Identity(z.size(), z.size());
  return out;
}

LossEval ce_eval(const LossSpec& spec, const Vector& z, int label) {
  if (label < 0 || label >= spec.classes || z.size() != spec.classes) {
    throw std::invalid_argument("cross_entropy: invalid label or logit size");
  }
  LossEval out;
  out.value = log_sum_exp(z) - z(label);
  Vector p = softmax(z);
  out.grad = p;
  out.grad(label) -= 1.0;
  out.hess = Matrix(p.asDiagonal()) - p * p.transpose();
  return out;
}

LossEval logistic_eval(const Vector& z, int label) {
  if (z.size() != 1 || (label != 1 && label != -1)) {
    throw std::invalid_argument("logistic: scalar output and label in {-1,+1}");
  }
  const double y = static_cast<double>(label);
  const double m = y * z(0);
  LossEval out;
  // log(1 + exp(-m)) without overflow
  out.value = m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  const double p = stable_sigmoid(m);
  out.grad = Vector::Constant(1, -y * (1.0 - p));
  out.hess = Matrix::Constant(1, 1, p * (1.0 - p));
  return out;
}

}  // namespace

LossEval loss_eval(const LossSpec& spec, const Vector& z, const Vector& target) {
  if (spec.kind != LossKind::mse) {
    throw std::invalid_argument("vector targets are only defined for mse");
  }
  return mse_eval(z, target);
}

LossEval loss_eval(const LossSpec& spec, const Vector& z, int label) {
  switch (spec.kind) {
    case LossKind::cross_entropy: return ce_eval(spec, z, label);
    case LossKind::logistic: return logistic_eval(z, label);
    case LossKind::mse:
      throw std::invalid_argument("mse loss_eval needs a target vector");
  }
  throw std::logic_error("unknown loss kind");
}

double margin(const LossSpec& spec, const Vector& z, int label) {
  switch (spec.kind) {
    case LossKind::mse:
      throw std::invalid_argument("margin is undefined for mse");
    case LossKind::logistic:
      if (z.size() != 1 || (label != 1 && label != -1)) {
        throw std::invalid_argument("logistic margin: bad output or label");
      }
      return static_cast<double>(label) * z(0);
    case LossKind::cross_entropy: {
      if (label < 0 || label >= z.size()) {
        throw std::invalid_argument("margin: label out of range");
      }
      double best_other = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < z.size(); ++j) {
        if (j != label) best_other = std::max(best_other, z(j));
      }
      return z(label) - best_other;
    }
  }
  throw std::logic_error("unknown loss kind");
}

}  // namespace eos
