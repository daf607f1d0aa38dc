#include "eos/models.hpp"

#include <cmath>
#include <numeric>

namespace eos {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::mlp ? "mlp" : "deep_linear";
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
    case Activation::softplus: return "softplus";
    case Activation::hardtanh: return "hardtanh";
    case Activation::identity: return "identity";
  }
  throw std::logic_error("unknown activation");
}

std::string to_string(Parameterization p) {
  return p == Parameterization::standard ? "standard" : "ntk";
}

std::string to_string(InitKind init) {
  switch (init) {
    case InitKind::torch_default_uniform: return "torch_default_uniform";
    case InitKind::xavier: return "xavier";
    case InitKind::gaussian_1_over_d: return "gaussian_1_over_d";
  }
  throw std::logic_error("unknown init");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mlp") return ModelKind::mlp;
  if (name == "deep_linear") return ModelKind::deep_linear;
  throw std::invalid_argument("unknown model kind: " + name);
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  if (name == "softplus") return Activation::softplus;
  if (name == "hardtanh") return Activation::hardtanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + name);
}

Parameterization parameterization_from_string(const std::string& name) {
  if (name == "standard") return Parameterization::standard;
  if (name == "ntk") return Parameterization::ntk;
  throw std::invalid_argument("unknown parameterization: " + name);
}

InitKind init_kind_from_string(const std::string& name) {
  if (name == "torch_default_uniform") return InitKind::torch_default_uniform;
  if (name == "xavier") return InitKind::xavier;
  if (name == "gaussian_1_over_d") return InitKind::gaussian_1_over_d;
  throw std::invalid_argument("unknown init: " + name);
}

std::vector<std::pair<int, int>> ModelSpec::layer_shapes() const {
  std::vector<std::pair<int, int>> shapes;
  int fan_in = input_dim;
  for (int width : hidden) {
    shapes.emplace_back(width, fan_in);
    fan_in = width;
  }
  shapes.emplace_back(output_dim, fan_in);
  return shapes;
}

Index ModelSpec::param_count() const {
  Index total = 0;
  for (auto [out, in] : layer_shapes()) {
    total += static_cast<Index>(out) * in + (has_biases() ? out : 0);
  }
  return total;
}

void ModelSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("model needs input_dim, output_dim >= 1");
  }
  for (int width : hidden) {
    if (width < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
  if (kind == ModelKind::deep_linear && activation != Activation::identity) {
    throw std::invalid_argument("deep_linear forces the identity activation");
  }
}

ParamLayout::ParamLayout(const ModelSpec& spec) : shapes(spec.layer_shapes()) {
  const bool biases = spec.has_biases();
  for (auto [out, in] : shapes) {
    weight_offset.push_back(total);
    total += static_cast<Index>(out) * in;
    bias_offset.push_back(biases ? total : -1);
    if (biases) total += out;
  }
}

ParamLayout::ConstWeightMap ParamLayout::weight(const Vector& theta,
                                                int layer) const {
  auto [out, in] = shapes[layer];
  return ConstWeightMap(theta.data() + weight_offset[layer], out, in);
}

ParamLayout::WeightMap ParamLayout::weight(Vector& theta, int layer) const {
  auto [out, in] = shapes[layer];
  return WeightMap(theta.data() + weight_offset[layer], out, in);
}

Eigen::Map<const Vector> ParamLayout::bias(const Vector& theta,
                                           int layer) const {
  return Eigen::Map<const Vector>(theta.data() + bias_offset[layer],
                                  shapes[layer].first);
}

Eigen::Map<Vector> ParamLayout::bias(Vector& theta, int layer) const {
  return Eigen::Map<Vector>(theta.data() + bias_offset[layer],
                            shapes[layer].first);
}

Vector init_params(const ModelSpec& spec) {
  spec.validate();
  ParamLayout layout(spec);
  Vector theta = Vector::Zero(layout.total);
  Rng rng(spec.seed);
  std::normal_distribution<double> unit_gauss(0.0, 1.0);

  for (int l = 0; l < layout.layers(); ++l) {
    auto [out, in] = layout.shapes[l];
    auto w = layout.weight(theta, l);
    if (spec.parameterization == Parameterization::ntk) {
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) w(r, c) = unit_gauss(rng);
      continue;  // biases stay zero under ntk
    }
    switch (spec.init) {
      case InitKind::torch_default_uniform: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        for (int r = 0; r < out; ++r)
          for (int c = 0; c < in; ++c) w(r, c) = uniform(rng);
        if (layout.has_bias(l)) {
          auto b = layout.bias(theta, l);
          for (int r = 0; r < out; ++r) b(r) = uniform(rng);
        }
        break;
      }
      case InitKind::xavier: {
        const double bound = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> uniform(-bound, bound);
        for (int r = 0; r < out; ++r)
          for (int c = 0; c < in; ++c) w(r, c) = uniform(rng);
        break;  // biases zero
      }
      case InitKind::gaussian_1_over_d: {
        const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
        for (int r = 0; r < out; ++r)
          for (int c = 0; c < in; ++c) w(r, c) = stddev * unit_gauss(rng);
        break;  // biases zero
      }
    }
  }
  return theta;
}

namespace {

Matrix act_forward(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::tanh: return z.array().tanh();
    case Activation::relu: return z.array().max(0.0);
    case Activation::elu:
      return (z.array() > 0.0).select(z.array(), z.array().exp() - 1.0);
    case Activation::softplus:
      // log(1 + e^z) = max(z, 0) + log1p(e^{-|z|})
      return z.array().max(0.0) +
             (-z.array().abs()).exp().unaryExpr([](double e) { return std::log1p(e); });
    case Activation::hardtanh: return z.array().min(1.0).max(-1.0);
    case Activation::identity: return z;
  }
  throw std::logic_error("unknown activation");
}

// First derivative from the pre-activation z and the cached output a.
Matrix act_prime(Activation act, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::tanh: return 1.0 - a.array().square();
    case Activation::relu:
      return (z.array() > 0.0).select(Matrix::Ones(z.rows(), z.cols()), 0.0);
    case Activation::elu:
      return (z.array() > 0.0).select(Matrix::Ones(z.rows(), z.cols()),
                                      a.array() + 1.0);
    case Activation::softplus:
      return z.unaryExpr([](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                      : std::exp(v) / (1.0 + std::exp(v));
      });
    case Activation::hardtanh:
      return (z.array().abs() < 1.0).select(Matrix::Ones(z.rows(), z.cols()), 0.0);
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
  }
  throw std::logic_error("unknown activation");
}

Matrix act_second(Activation act, const Matrix& z, const Matrix& a) {
  switch (act) {
    case Activation::tanh:
      return -2.0 * a.array() * (1.0 - a.array().square());
    case Activation::relu:
    case Activation::hardtanh:
    case Activation::identity:
      return Matrix::Zero(z.rows(), z.cols());
    case Activation::elu:
      return (z.array() > 0.0).select(Matrix::Zero(z.rows(), z.cols()),
                                      a.array() + 1.0);
    case Activation::softplus: {
      Matrix s = act_prime(Activation::softplus, z, a);
      return s.array() * (1.0 - s.array());
    }
  }
  throw std::logic_error("unknown activation");
}

Matrix gather_rows(const Matrix& source, std::span<const int> rows) {
  Matrix out(static_cast<Index>(rows.size()), source.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = source.row(rows[i]);
  return out;
}

}  // namespace

struct ModelComputation::Forward {
  Matrix x;                // batch inputs
  std::vector<Matrix> z;   // pre-activations per layer
  std::vector<Matrix> a;   // hidden activations, a[l] = act(z[l]) for l < L-1
  const Matrix& input(int layer) const { return layer == 0 ? x : a[layer - 1]; }
  const Matrix& logits() const { return z.back(); }
};

ModelComputation::ModelComputation(ModelSpec model, LossSpec loss, Dataset data)
    : model_(std::move(model)),
      loss_(std::move(loss)),
      data_(std::move(data)),
      layout_(model_) {
  model_.validate();
  loss_.validate();
  data_.validate();
  if (model_.input_dim != data_.feature_dim()) {
    throw std::invalid_argument("model input dim != dataset feature dim");
  }
  switch (loss_.kind) {
    case LossKind::mse:
      if (model_.output_dim != data_.target_dim()) {
        throw std::invalid_argument("mse: model output dim != target dim");
      }
      break;
    case LossKind::cross_entropy:
      if (data_.kind != Dataset::Kind::classification) {
        throw std::invalid_argument("cross_entropy needs a classification dataset");
      }
      if (model_.output_dim != loss_.classes) {
        throw std::invalid_argument("cross_entropy: model output dim != classes");
      }
      for (int y : data_.labels) {
        if (y < 0 || y >= loss_.classes) {
          throw std::invalid_argument("cross_entropy: label out of range");
        }
      }
      break;
    case LossKind::logistic:
      if (data_.kind != Dataset::Kind::classification || model_.output_dim != 1) {
        throw std::invalid_argument("logistic needs scalar output on a classification dataset");
      }
      for (int y : data_.labels) {
        if (y != 0 && y != 1) {
          throw std::invalid_argument("logistic: labels must be 0/1 (mapped to -1/+1)");
        }
      }
      break;
  }
  for (auto [out, in] : layout_.shapes) {
    (void)out;
    layer_scale_.push_back(model_.parameterization == Parameterization::ntk
                               ? 1.0 / std::sqrt(static_cast<double>(in))
                               : 1.0);
  }
  all_rows_.resize(data_.n());
  std::iota(all_rows_.begin(), all_rows_.end(), 0);
}

void ModelComputation::forward_batch(const Vector& theta,
                                     std::span<const int> batch,
                                     Forward& fwd) const {
  const int layers = layout_.layers();
  fwd.x = gather_rows(data_.features, batch);
  fwd.z.resize(layers);
  fwd.a.resize(layers - 1);
  for (int l = 0; l < layers; ++l) {
    const Matrix& in = fwd.input(l);
    fwd.z[l].noalias() = in * layout_.weight(theta, l).transpose();
    if (layer_scale_[l] != 1.0) fwd.z[l] *= layer_scale_[l];
    if (layout_.has_bias(l)) {
      fwd.z[l].rowwise() += layout_.bias(theta, l).transpose();
    }
    if (l < layers - 1) fwd.a[l] = act_forward(model_.activation, fwd.z[l]);
  }
}

double ModelComputation::loss_sum(const Matrix& logits,
                                  std::span<const int> batch) const {
  const Index nb = logits.rows();
  switch (loss_.kind) {
    case LossKind::mse: {
      Matrix t = gather_rows(data_.targets, batch);
      return 0.5 * (logits - t).squaredNorm();
    }
    case LossKind::cross_entropy: {
      double total = 0.0;
      for (Index i = 0; i < nb; ++i) {
        const auto row = logits.row(i);
        const double m = row.maxCoeff();
        const double lse = m + std::log((row.array() - m).exp().sum());
        total += lse - row(data_.labels[batch[i]]);
      }
      return total;
    }
    case LossKind::logistic: {
      double total = 0.0;
      for (Index i = 0; i < nb; ++i) {
        const double y = data_.labels[batch[i]] == 1 ? 1.0 : -1.0;
        const double m = y * logits(i, 0);
        total += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
      }
      return total;
    }
  }
  throw std::logic_error("unknown loss kind");
}

Matrix ModelComputation::loss_grad_rows(const Matrix& logits,
                                        std::span<const int> batch,
                                        double scale) const {
  const Index nb = logits.rows();
  switch (loss_.kind) {
    case LossKind::mse: {
      Matrix t = gather_rows(data_.targets, batch);
      return scale * (logits - t);
    }
    case LossKind::cross_entropy: {
      Matrix g(nb, logits.cols());
      for (Index i = 0; i < nb; ++i) {
        const auto row = logits.row(i);
        const double m = row.maxCoeff();
        Eigen::ArrayXd e = (row.array() - m).exp();
        g.row(i) = (e / e.sum()).matrix() * scale;
        g(i, data_.labels[batch[i]]) -= scale;
      }
      return g;
    }
    case LossKind::logistic: {
      Matrix g(nb, 1);
      for (Index i = 0; i < nb; ++i) {
        const double y = data_.labels[batch[i]] == 1 ? 1.0 : -1.0;
        const double p = stable_sigmoid(y * logits(i, 0));
        g(i, 0) = scale * (-y * (1.0 - p));
      }
      return g;
    }
  }
  throw std::logic_error("unknown loss kind");
}

Matrix ModelComputation::loss_hess_apply_rows(const Matrix& logits,
                                              const Matrix& u,
                                              double scale) const {
  const Index nb = logits.rows();
  switch (loss_.kind) {
    case LossKind::mse:
      return scale * u;
    case LossKind::cross_entropy: {
      Matrix out(nb, logits.cols());
      for (Index i = 0; i < nb; ++i) {
        const auto row = logits.row(i);
        const double m = row.maxCoeff();
        Eigen::ArrayXd e = (row.array() - m).exp();
        Eigen::ArrayXd p = e / e.sum();
        const double dot = (p * u.row(i).transpose().array()).sum();
        out.row(i) = (scale * (p * u.row(i).transpose().array() - p * dot)).matrix();
      }
      return out;
    }
    case LossKind::logistic: {
      Matrix out(nb, 1);
      for (Index i = 0; i < nb; ++i) {
        const double p = stable_sigmoid(logits(i, 0));
        out(i, 0) = scale * p * (1.0 - p) * u(i, 0);
      }
      return out;
    }
  }
  throw std::logic_error("unknown loss kind");
}

double ModelComputation::value(const Vector& theta) const {
  return batch_value(theta, all_rows());
}

Vector ModelComputation::gradient(const Vector& theta) const {
  return batch_gradient(theta, all_rows());
}

double ModelComputation::batch_value(const Vector& theta,
                                     std::span<const int> batch) const {
  require_dim(theta, "value");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Forward fwd;
  forward_batch(theta, batch, fwd);
  return loss_sum(fwd.logits(), batch) / static_cast<double>(batch.size());
}

Vector ModelComputation::batch_gradient(const Vector& theta,
                                        std::span<const int> batch) const {
  require_dim(theta, "gradient");
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Forward fwd;
  forward_batch(theta, batch, fwd);

  Vector grad = Vector::Zero(layout_.total);
  Matrix delta =
      loss_grad_rows(fwd.logits(), batch, 1.0 / static_cast<double>(batch.size()));
  for (int l = layout_.layers() - 1; l >= 0; --l) {
    const Matrix& in = fwd.input(l);
    layout_.weight(grad, l).noalias() = layer_scale_[l] * (delta.transpose() * in);
    if (layout_.has_bias(l)) {
      layout_.bias(grad, l) = delta.colwise().sum().transpose();
    }
    if (l > 0) {
      Matrix u = layer_scale_[l] * (delta * layout_.weight(theta, l));
      delta = u.cwiseProduct(act_prime(model_.activation, fwd.z[l - 1], fwd.a[l - 1]));
    }
  }
  return grad;
}

Vector ModelComputation::hvp(const Vector& theta, const Vector& v) const {
  require_dim(theta, "hvp");
  require_dim(v, "hvp direction");
  const auto batch = all_rows();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const int layers = layout_.layers();

  Forward fwd;
  forward_batch(theta, batch, fwd);

  // Forward tangent pass: zdot[l] = d z[l] / d eps along theta + eps v.
  std::vector<Matrix> zdot(layers), adot(layers - 1);
  for (int l = 0; l < layers; ++l) {
    const Matrix& in = fwd.input(l);
    zdot[l].noalias() = in * layout_.weight(v, l).transpose();
    if (l > 0) zdot[l].noalias() += adot[l - 1] * layout_.weight(theta, l).transpose();
    if (layer_scale_[l] != 1.0) zdot[l] *= layer_scale_[l];
    if (layout_.has_bias(l)) zdot[l].rowwise() += layout_.bias(v, l).transpose();
    if (l < layers - 1) {
      adot[l] = act_prime(model_.activation, fwd.z[l], fwd.a[l]).cwiseProduct(zdot[l]);
    }
  }

  // Reverse pass carrying (delta, deltadot) together.
  Vector result = Vector::Zero(layout_.total);
  Matrix delta = loss_grad_rows(fwd.logits(), batch, inv_n);
  Matrix deltadot = loss_hess_apply_rows(fwd.logits(), zdot.back(), inv_n);
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& in = fwd.input(l);
    auto hw = layout_.weight(result, l);
    hw.noalias() = deltadot.transpose() * in;
    if (l > 0) hw.noalias() += delta.transpose() * adot[l - 1];
    if (layer_scale_[l] != 1.0) hw *= layer_scale_[l];
    if (layout_.has_bias(l)) {
      layout_.bias(result, l) = deltadot.colwise().sum().transpose();
    }
    if (l > 0) {
      const Matrix prime = act_prime(model_.activation, fwd.z[l - 1], fwd.a[l - 1]);
      Matrix u = layer_scale_[l] * (delta * layout_.weight(theta, l));
      Matrix udot = layer_scale_[l] *
                    (deltadot * layout_.weight(theta, l) + delta * layout_.weight(v, l));
      deltadot = udot.cwiseProduct(prime) +
                 u.cwiseProduct(act_second(model_.activation, fwd.z[l - 1], fwd.a[l - 1]))
                     .cwiseProduct(zdot[l - 1]);
      delta = u.cwiseProduct(prime);
    }
  }
  return result;
}

Matrix ModelComputation::outputs(const Vector& theta) const {
  require_dim(theta, "outputs");
  Forward fwd;
  forward_batch(theta, all_rows(), fwd);
  return fwd.logits();
}

double ModelComputation::accuracy(const Vector& theta) const {
  if (data_.kind != Dataset::Kind::classification) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const Matrix logits = outputs(theta);
  Index correct = 0;
  if (loss_.kind == LossKind::logistic) {
    for (Index i = 0; i < logits.rows(); ++i) {
      const bool positive = logits(i, 0) >= 0;
      if (positive == (data_.labels[i] == 1)) ++correct;
    }
  } else {
    for (Index i = 0; i < logits.rows(); ++i) {
      Index argmax = 0;
      logits.row(i).maxCoeff(&argmax);
      if (argmax == data_.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

std::pair<double, double> ModelComputation::loss_and_accuracy(
    const Vector& theta) const {
  const Matrix logits = outputs(theta);
  const double loss = loss_sum(logits, all_rows()) / static_cast<double>(data_.n());
  if (data_.kind != Dataset::Kind::classification) {
    return {loss, std::numeric_limits<double>::quiet_NaN()};
  }
  Index correct = 0;
  if (loss_.kind == LossKind::logistic) {
    for (Index i = 0; i < logits.rows(); ++i) {
      if ((logits(i, 0) >= 0) == (data_.labels[i] == 1)) ++correct;
    }
  } else {
    for (Index i = 0; i < logits.rows(); ++i) {
      Index argmax = 0;
      logits.row(i).maxCoeff(&argmax);
      if (argmax == data_.labels[i]) ++correct;
    }
  }
  return {loss, static_cast<double>(correct) / static_cast<double>(logits.rows())};
}

Matrix ModelComputation::output_jvp(const Vector& theta, const Vector& v) const {
  require_dim(theta, "output_jvp");
  require_dim(v, "output_jvp direction");
  const auto batch = all_rows();
  const int layers = layout_.layers();
  Forward fwd;
  forward_batch(theta, batch, fwd);
  Matrix zdot, adot;
  for (int l = 0; l < layers; ++l) {
    const Matrix& in = fwd.input(l);
    Matrix next = in * layout_.weight(v, l).transpose();
    if (l > 0) next.noalias() += adot * layout_.weight(theta, l).transpose();
    if (layer_scale_[l] != 1.0) next *= layer_scale_[l];
    if (layout_.has_bias(l)) next.rowwise() += layout_.bias(v, l).transpose();
    zdot = std::move(next);
    if (l < layers - 1) {
      adot = act_prime(model_.activation, fwd.z[l], fwd.a[l]).cwiseProduct(zdot);
    }
  }
  return zdot;
}

Vector ModelComputation::output_vjp(const Vector& theta, const Matrix& u) const {
  require_dim(theta, "output_vjp");
  const auto batch = all_rows();
  if (u.rows() != static_cast<Index>(batch.size()) ||
      u.cols() != model_.output_dim) {
    throw std::invalid_argument("output_vjp: cotangent has wrong shape");
  }
  Forward fwd;
  forward_batch(theta, batch, fwd);
  Vector grad = Vector::Zero(layout_.total);
  Matrix delta = u;
  for (int l = layout_.layers() - 1; l >= 0; --l) {
    const Matrix& in = fwd.input(l);
    layout_.weight(grad, l).noalias() = layer_scale_[l] * (delta.transpose() * in);
    if (layout_.has_bias(l)) {
      layout_.bias(grad, l) = delta.colwise().sum().transpose();
    }
    if (l > 0) {
      Matrix next = layer_scale_[l] * (delta * layout_.weight(theta, l));
      delta = next.cwiseProduct(act_prime(model_.activation, fwd.z[l - 1], fwd.a[l - 1]));
    }
  }
  return grad;
}

Matrix ModelComputation::apply_loss_hessian(const Matrix& logits,
                                            const Matrix& u) const {
  if (logits.rows() != data_.n() || u.rows() != logits.rows() ||
      u.cols() != logits.cols()) {
    throw std::invalid_argument("apply_loss_hessian: shape mismatch");
  }
  return loss_hess_apply_rows(logits, u, 1.0);
}

std::unique_ptr<ModelComputation> build_computation(const ModelSpec& model,
                                                    const LossSpec& loss,
                                                    Dataset data) {
  return std::make_unique<ModelComputation>(model, loss, std::move(data));
}

}  // namespace eos
