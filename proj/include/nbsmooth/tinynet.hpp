#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nbsmooth/random.hpp"

namespace nbs {

enum class Activation { ReLU, Linear, Sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view s);

/// y = act(x W^T + b). weight is out x in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Activation activation = Activation::Linear;
};

/// Dense feed-forward network. Batches are row-major in the sense that each
/// row is one example. An optional fixed input standardization
/// (x - input_shift) / input_scale is applied before the first layer; it is
/// not trained.
struct MlpModel {
  std::vector<DenseLayer> layers;
  Eigen::RowVectorXd input_shift;
  Eigen::RowVectorXd input_scale;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  bool has_input_transform() const { return input_shift.size() > 0; }
  Eigen::MatrixXd transform_input(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  std::size_t parameter_count() const;
};

struct LayerSpec {
  int units;
  Activation activation;
};

/// He-uniform weights for ReLU layers, Xavier-uniform otherwise; zero biases.
MlpModel make_mlp(int input_dim, const std::vector<LayerSpec>& layers, Rng& rng);

/// Throws ShapeError if layer dimensions do not chain or parameters are
/// non-finite.
void check_consistent(const MlpModel& model);

Eigen::MatrixXd forward(const MlpModel& model,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// Activations kept for backpropagation: values[0] is the (transformed)
/// input, values[i + 1] the output of layer i.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> values;
  const Eigen::MatrixXd& output() const { return values.back(); }
};

ForwardTrace forward_trace(const MlpModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& batch);

/// Parameter-shaped buffer used for gradients and optimizer moments.
struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const MlpModel& model);
  bool all_finite() const;
};

/// Backpropagates d(loss)/d(output). When d_input is non-null it receives
/// d(loss)/d(transformed input).
Gradients backpropagate(const MlpModel& model, const ForwardTrace& trace,
                        Eigen::MatrixXd d_output,
                        Eigen::MatrixXd* d_input = nullptr);

enum class LossKind { Mse, Bce };

struct LossValue {
  double value;
  Eigen::MatrixXd d_output;
};

/// Mean over every element of the batch: squared error for Mse, bce() for
/// Bce (outputs are probabilities).
LossValue evaluate_loss(LossKind kind, const Eigen::Ref<const Eigen::MatrixXd>& output,
                        const Eigen::Ref<const Eigen::MatrixXd>& target);

struct BackwardResult {
  double loss;
  Gradients gradients;
};

BackwardResult backward(const MlpModel& model,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch,
                        LossKind kind,
                        const Eigen::Ref<const Eigen::MatrixXd>& targets);

double sigmoid(double x);

inline constexpr double kBceEps = 1e-7;

/// Binary cross-entropy as a loss: -(p log q + (1 - p) log(1 - q)), with q
/// clamped to [kBceEps, 1 - kBceEps].
double bce(double p, double q);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW); 0 gives plain Adam
};

struct OptimizerState {
  AdamOptions options;
  long step = 0;
  Gradients first_moment;
  Gradients second_moment;

  static OptimizerState for_model(const MlpModel& model, AdamOptions options);
};

/// One bias-corrected Adam/AdamW update. Throws TrainingAbortError on
/// non-finite gradients or parameters.
void optimizer_step(MlpModel& model, const Gradients& gradients,
                    OptimizerState& state);

nlohmann::json to_json(const MlpModel& model);
MlpModel mlp_from_json(const nlohmann::json& doc);

void save_json(const std::filesystem::path& file, const nlohmann::json& doc);
nlohmann::json load_json(const std::filesystem::path& file);

}  // namespace nbs
