#include "eos/spectrum.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace eos {

namespace {

Vector random_unit(Index dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = gauss(rng);
  return v.normalized();
}

}  // namespace

SpectrumResult top_eigs(const LinearOperator& apply, Index dim, int k,
                        const LanczosOptions& opts) {
  if (k < 1) throw std::invalid_argument("top_eigs: k must be >= 1");
  if (k > dim) throw std::invalid_argument("top_eigs: k exceeds dimension");

  const int m_max = static_cast<int>(std::min<Index>(opts.max_iter, dim));
  Rng rng(opts.seed);

  Matrix basis(dim, m_max);
  Vector alpha(m_max), beta(m_max);  // beta(j) couples columns j and j+1
  basis.col(0) = random_unit(dim, rng);

  Eigen::SelfAdjointEigenSolver<Matrix> tri;
  int m = 0;
  bool bound_converged = false;
  for (int j = 0; j < m_max; ++j) {
    Vector w = apply(basis.col(j));
    alpha(j) = basis.col(j).dot(w);
    w -= alpha(j) * basis.col(j);
    if (j > 0) w -= beta(j - 1) * basis.col(j - 1);
    // Full reorthogonalization, two passes.
    for (int pass = 0; pass < 2; ++pass) {
      w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
    }
    beta(j) = w.norm();
    m = j + 1;

    const double tiny = 1e-13 * std::max(1.0, alpha.head(m).cwiseAbs().maxCoeff());
    const bool breakdown = beta(j) <= tiny;

    // Ritz residual bound: |beta_j * last component of the Ritz vector|. A
    // breakdown also drives the bound to zero, but then the Krylov space has
    // merely been exhausted and a restart may still uncover repeated
    // eigenvalues, so only a genuine beta counts as convergence.
    if (m >= k && !breakdown) {
      Matrix t = Matrix::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = alpha(i);
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta(i);
      }
      tri.compute(t);
      bool all_below = true;
      for (int i = 0; i < k; ++i) {
        const Index col = m - 1 - i;  // eigenvalues ascend
        const double lambda = tri.eigenvalues()(col);
        const double bound = std::abs(beta(j) * tri.eigenvectors()(m - 1, col));
        if (bound > opts.tol * std::max(1.0, std::abs(lambda))) {
          all_below = false;
          break;
        }
      }
      if (all_below) {
        bound_converged = true;
        break;
      }
    }

    if (j + 1 < m_max) {
      if (breakdown) {
        // Invariant subspace: restart in the orthogonal complement.
        beta(j) = 0.0;
        Vector fresh = random_unit(dim, rng);
        for (int pass = 0; pass < 2; ++pass) {
          fresh -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * fresh);
        }
        const double norm = fresh.norm();
        if (norm < 1e-12) break;  // whole space covered
        basis.col(j + 1) = fresh / norm;
      } else {
        basis.col(j + 1) = w / beta(j);
      }
    }
  }

  Matrix t = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha(i);
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta(i);
  }
  tri.compute(t);

  const int kk = std::min(k, m);
  SpectrumResult out;
  out.iterations = m;
  out.eigenvalues.resize(kk);
  out.eigenvectors.resize(dim, kk);
  out.residuals.resize(kk);
  bool residuals_ok = true;
  for (int i = 0; i < kk; ++i) {
    const Index col = m - 1 - i;
    out.eigenvalues(i) = tri.eigenvalues()(col);
    Vector v = basis.leftCols(m) * tri.eigenvectors().col(col);
    v.normalize();
    out.eigenvectors.col(i) = v;
    out.residuals(i) = (apply(v) - out.eigenvalues(i) * v).norm();
    if (out.residuals(i) > opts.tol * std::max(1.0, std::abs(out.eigenvalues(i)))) {
      residuals_ok = false;
    }
  }
  out.converged = (bound_converged || m == dim) && residuals_ok;
  return out;
}

SpectrumResult top_eigs(const Computation& f, const Vector& theta, int k,
                        const LanczosOptions& opts) {
  return top_eigs(
      [&f, &theta](const Vector& v) { return f.hvp(theta, v); }, f.dim(), k,
      opts);
}

double sharpness(const Computation& f, const Vector& theta,
                 const LanczosOptions& opts) {
  return top_eigs(f, theta, 1, opts).top();
}

double gn_top_eig(const ModelComputation& f, const Vector& theta,
                  GnWeighting weighting, const LanczosOptions& opts) {
  const double inv_n = 1.0 / static_cast<double>(f.n_examples());
  const Matrix logits = f.outputs(theta);
  LinearOperator apply = [&](const Vector& v) {
    Matrix zdot = f.output_jvp(theta, v);
    if (weighting == GnWeighting::with_loss_hessian) {
      zdot = f.apply_loss_hessian(logits, zdot);
    }
    return Vector(inv_n * f.output_vjp(theta, zdot));
  };
  return top_eigs(apply, f.dim(), 1, opts).top();
}

}  // namespace eos
