#include "eos/diagnostics.hpp"

#include <cmath>
#include <numeric>

namespace eos {

ProjectionBasis ProjectionBasis::make(int k, Index p, std::uint64_t seed) {
  if (k < 1 || p < 1) throw std::invalid_argument("projection basis: k, p >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ProjectionBasis basis;
  basis.seed = seed;
  basis.m.resize(k, p);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < p; ++j) basis.m(i, j) = gauss(rng);
  return basis;
}

std::function<Vector(const Vector&)> ProjectionBasis::projector() const {
  Matrix m_copy = m;
  return [m_copy = std::move(m_copy)](const Vector& theta) {
    return Vector(m_copy * theta);
  };
}

std::optional<long> detect_breakeven(const TrainTrace& trace, double mss_value) {
  for (const auto& r : trace.records) {
    if (r.has_sharpness() && r.sharpness >= mss_value) return r.step;
  }
  return std::nullopt;
}

std::vector<std::pair<double, double>> projected_distance(const TrainTrace& a,
                                                          const TrainTrace& b) {
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0, j = 0;
  while (i < a.projections.size() && j < b.projections.size()) {
    const double ta = a.projections[i].first;
    const double tb = b.projections[j].first;
    const double tol = 1e-9 * std::max(1.0, std::max(std::abs(ta), std::abs(tb)));
    if (std::abs(ta - tb) <= tol) {
      out.emplace_back(ta,
                       (a.projections[i].second - b.projections[j].second).norm());
      ++i;
      ++j;
    } else if (ta < tb) {
      ++i;
    } else {
      ++j;
    }
  }
  if (out.empty()) {
    throw std::invalid_argument("projected_distance: traces share no grid times");
  }
  return out;
}

double between_iterate_sharpness(const Computation& f, const Vector& theta_a,
                                 const Vector& theta_b, int grid,
                                 const LanczosOptions& opts) {
  if (grid < 1) throw std::invalid_argument("between_iterate_sharpness: grid >= 1");
  if (theta_a.size() != f.dim() || theta_b.size() != f.dim()) {
    throw std::invalid_argument("between_iterate_sharpness: wrong lengths");
  }
  if ((theta_a - theta_b).norm() == 0.0) {
    return sharpness(f, theta_a, opts);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int j = 1; j <= grid; ++j) {
    const double s = static_cast<double>(j) / (grid + 1);
    Vector point = theta_a + s * (theta_b - theta_a);
    best = std::max(best, sharpness(f, point, opts));
  }
  return best;
}

double effective_smoothness(const Computation& f, const Vector& theta,
                            double alpha, int grid) {
  if (alpha <= 0) throw std::invalid_argument("effective_smoothness: alpha > 0");
  if (grid < 1) throw std::invalid_argument("effective_smoothness: grid >= 1");
  const Vector g = f.gradient(theta);
  const double gnorm = g.norm();
  if (gnorm == 0.0) {
    throw std::invalid_argument("effective_smoothness: zero gradient");
  }
  double best = 0.0;
  for (int j = 1; j <= grid; ++j) {
    const double gamma = alpha * static_cast<double>(j) / grid;
    const Vector g2 = f.gradient(theta - gamma * g);
    best = std::max(best, (g - g2).norm() / (gamma * gnorm));
  }
  return best;
}

TaylorProbe taylor_probe(const Computation& f, const Vector& theta0, double eta,
                         int steps) {
  if (steps < 1) throw std::invalid_argument("taylor_probe: steps >= 1");
  if (eta <= 0) throw std::invalid_argument("taylor_probe: eta > 0");
  const Vector g0 = f.gradient(theta0);
  const double f0 = f.value(theta0);

  TaylorProbe probe;
  probe.losses.reserve(steps + 1);
  probe.iterates.reserve(steps + 1);
  probe.losses.push_back(f0);
  probe.iterates.push_back(theta0);

  Vector x = theta0;
  for (int t = 0; t < steps; ++t) {
    Vector grad_q = g0 + f.hvp(theta0, x - theta0);
    x = x - eta * grad_q;
    Vector delta = x - theta0;
    const double q = f0 + g0.dot(delta) + 0.5 * delta.dot(f.hvp(theta0, delta));
    probe.losses.push_back(q);
    probe.iterates.push_back(x);
    if (!std::isfinite(q)) break;
  }
  return probe;
}

GnSnapshot gn_snapshot(const ModelComputation& f, const Vector& theta,
                       const LanczosOptions& opts) {
  const LossSpec& loss = f.loss();
  if (loss.kind == LossKind::mse) {
    throw std::invalid_argument("gn_snapshot: cross_entropy or logistic only");
  }
  GnSnapshot snap;
  snap.hessian_top = sharpness(f, theta, opts);
  snap.gn_top = gn_top_eig(f, theta, GnWeighting::with_loss_hessian, opts);
  snap.jtj_top = gn_top_eig(f, theta, GnWeighting::without_loss_hessian, opts);

  const Matrix logits = f.outputs(theta);
  const Index n = logits.rows();
  snap.margins.resize(n);
  snap.loss_hessian_scalars.resize(n);
  for (Index i = 0; i < n; ++i) {
    const int label = f.data().labels[i];
    if (loss.kind == LossKind::logistic) {
      const int y = label == 1 ? 1 : -1;
      snap.margins(i) = margin(loss, logits.row(i).transpose(), y);
      const double p = stable_sigmoid(static_cast<double>(y) * logits(i, 0));
      snap.loss_hessian_scalars(i) = p * (1.0 - p);
    } else {
      snap.margins(i) = margin(loss, logits.row(i).transpose(), label);
      const Vector p = softmax(logits.row(i).transpose());
      snap.loss_hessian_scalars(i) = p(label) * (1.0 - p(label));
    }
  }
  return snap;
}

LossChangeEstimate expected_loss_change(const BatchedComputation& f,
                                        const Vector& theta, double eta,
                                        int batch_size, int n_samples,
                                        std::uint64_t seed) {
  const Index n = f.n_examples();
  if (batch_size < 1 || batch_size > n) {
    throw std::invalid_argument("expected_loss_change: 1 <= batch_size <= n");
  }
  if (n_samples < 2) {
    throw std::invalid_argument("expected_loss_change: n_samples >= 2");
  }
  const double base = f.value(theta);
  Rng rng(seed);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);

  std::vector<double> changes;
  changes.reserve(n_samples);
  std::vector<int> batch(batch_size);
  for (int s = 0; s < n_samples; ++s) {
    // Partial Fisher-Yates: the first batch_size slots become the sample.
    for (int i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(n) - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    batch.assign(all.begin(), all.begin() + batch_size);
    std::sort(batch.begin(), batch.end());
    Vector g = f.batch_gradient(theta, batch);
    changes.push_back(f.value(theta - eta * g) - base);
  }

  LossChangeEstimate est;
  est.samples = n_samples;
  est.mean = std::accumulate(changes.begin(), changes.end(), 0.0) / n_samples;
  double ss = 0;
  for (double c : changes) ss += (c - est.mean) * (c - est.mean);
  est.stderr_ = std::sqrt(ss / (n_samples - 1)) / std::sqrt(n_samples);
  return est;
}

}  // namespace eos
