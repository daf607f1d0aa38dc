#include "eos/autodiff.hpp"

namespace eos {

void Computation::require_dim(const Vector& v, const char* what) const {
  if (v.size() != dim()) {
    throw std::invalid_argument(std::string(what) + ": expected length " +
                                std::to_string(dim()) + ", got " +
                                std::to_string(v.size()));
  }
}

Matrix dense_hessian(const Computation& f, const Vector& theta, Index limit) {
  const Index p = f.dim();
  if (p > limit) {
    throw std::invalid_argument("dense_hessian: dimension " +
                                std::to_string(p) + " exceeds oracle limit " +
                                std::to_string(limit));
  }
  Matrix h(p, p);
  Vector unit = Vector::Zero(p);
  for (Index i = 0; i < p; ++i) {
    unit(i) = 1.0;
    h.row(i) = f.hvp(theta, unit).transpose();
    unit(i) = 0.0;
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace eos
