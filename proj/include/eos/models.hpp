#pragma once

#include <memory>
#include <utility>

#include "eos/autodiff.hpp"
#include "eos/losses.hpp"
#include "eos/tasks.hpp"

namespace eos {

enum class ModelKind { mlp, deep_linear };
enum class Activation { tanh, relu, elu, softplus, hardtanh, identity };
enum class Parameterization { standard, ntk };
enum class InitKind { torch_default_uniform, xavier, gaussian_1_over_d };

std::string to_string(ModelKind kind);
std::string to_string(Activation act);
std::string to_string(Parameterization p);
std::string to_string(InitKind init);
ModelKind model_kind_from_string(const std::string& name);
Activation activation_from_string(const std::string& name);
Parameterization parameterization_from_string(const std::string& name);
InitKind init_kind_from_string(const std::string& name);

// Network constructor description. MLPs have biases and an activation on
// every hidden layer (the output layer is linear); deep_linear networks are
// bias-free pure matrix products and force the identity activation.
//
// NTK parameterization rescales each layer's forward map by 1/sqrt(fan_in)
// and initializes weights with unit-variance Gaussians (biases zero),
// whatever `init` says; standard parameterization follows `init`.
struct ModelSpec {
  ModelKind kind = ModelKind::mlp;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;
  Activation activation = Activation::tanh;
  Parameterization parameterization = Parameterization::standard;
  InitKind init = InitKind::torch_default_uniform;
  std::uint64_t seed = 0;

  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  bool has_biases() const { return kind == ModelKind::mlp; }
  std::vector<std::pair<int, int>> layer_shapes() const;  // (out, fan_in)
  Index param_count() const;
  void validate() const;
};

// Parameter layout: layer-major, weight block then bias block per layer.
// Weight matrices are flattened row-major (one row per output unit), so a
// layer's block reads W[0][0..in), W[1][0..in), ..., then b[0..out).
struct ParamLayout {
  explicit ParamLayout(const ModelSpec& spec);

  std::vector<std::pair<int, int>> shapes;
  std::vector<Index> weight_offset;
  std::vector<Index> bias_offset;  // -1 entries when the model has no biases
  Index total = 0;

  using ConstWeightMap = Eigen::Map<
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using WeightMap = Eigen::Map<
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  ConstWeightMap weight(const Vector& theta, int layer) const;
  WeightMap weight(Vector& theta, int layer) const;
  Eigen::Map<const Vector> bias(const Vector& theta, int layer) const;
  Eigen::Map<Vector> bias(Vector& theta, int layer) const;
  bool has_bias(int layer) const { return bias_offset[layer] >= 0; }
  int layers() const { return static_cast<int>(shapes.size()); }
};

// Deterministic for a fixed seed; see ModelSpec for the init conventions.
Vector init_params(const ModelSpec& spec);

// The full-batch objective f(theta) = (1/n) sum_i loss(h(x_i; theta), y_i),
// with exact gradients and Hessian-vector products (forward-over-reverse).
class ModelComputation final : public BatchedComputation {
 public:
  ModelComputation(ModelSpec model, LossSpec loss, Dataset data);

  Index dim() const override { return layout_.total; }
  double value(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;
  Vector hvp(const Vector& theta, const Vector& v) const override;

  Index n_examples() const override { return data_.n(); }
  double batch_value(const Vector& theta,
                     std::span<const int> batch) const override;
  Vector batch_gradient(const Vector& theta,
                        std::span<const int> batch) const override;

  // Logits for every example, one row each.
  Matrix outputs(const Vector& theta) const;
  // Fraction of examples predicted correctly; NaN for regression tasks.
  double accuracy(const Vector& theta) const;
  // Both quantities from a single forward pass.
  std::pair<double, double> loss_and_accuracy(const Vector& theta) const;

  // Network-output directional derivative: row i equals J_i v.
  Matrix output_jvp(const Vector& theta, const Vector& v) const;
  // sum_i J_i^T u_i over all examples (callers divide by n as needed).
  Vector output_vjp(const Vector& theta, const Matrix& u) const;
  // Row i of the result is (d^2 loss / d z^2 at logits row i) * u row i.
  Matrix apply_loss_hessian(const Matrix& logits, const Matrix& u) const;

  const ModelSpec& model() const { return model_; }
  const LossSpec& loss() const { return loss_; }
  const Dataset& data() const { return data_; }
  const ParamLayout& layout() const { return layout_; }

 private:
  struct Forward;

  void forward_batch(const Vector& theta, std::span<const int> batch,
                     Forward& fwd) const;
  double loss_sum(const Matrix& logits, std::span<const int> batch) const;
  Matrix loss_grad_rows(const Matrix& logits, std::span<const int> batch,
                        double scale) const;
  // Row-wise loss-Hessian application; depends only on the logits.
  Matrix loss_hess_apply_rows(const Matrix& logits, const Matrix& u,
                              double scale) const;
  std::span<const int> all_rows() const { return all_rows_; }

  ModelSpec model_;
  LossSpec loss_;
  Dataset data_;
  ParamLayout layout_;
  std::vector<double> layer_scale_;  // 1 or 1/sqrt(fan_in) per layer
  std::vector<int> all_rows_;
};

std::unique_ptr<ModelComputation> build_computation(const ModelSpec& model,
                                                    const LossSpec& loss,
                                                    Dataset data);

}  // namespace eos
