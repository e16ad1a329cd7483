#include "nbsmooth/tinynet.hpp"

#include <cmath>
#include <fstream>

#include "nbsmooth/error.hpp"

namespace nbs {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU:
      return "relu";
    case Activation::Linear:
      return "linear";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "linear";
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "linear") return Activation::Linear;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw FormatError("unknown activation '" + std::string(s) + "'");
}

Eigen::Index MlpModel::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

Eigen::Index MlpModel::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

Eigen::MatrixXd MlpModel::transform_input(
    const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  if (!has_input_transform()) return x;
  return ((x.rowwise() - input_shift).array().rowwise() / input_scale.array())
      .matrix();
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

MlpModel make_mlp(int input_dim, const std::vector<LayerSpec>& specs, Rng& rng) {
  if (input_dim < 1 || specs.empty()) {
    throw ShapeError("an MLP needs a positive input dimension and >= 1 layer");
  }
  MlpModel model;
  int fan_in = input_dim;
  for (const auto& s : specs) {
    if (s.units < 1) throw ShapeError("layer width must be >= 1");
    const double limit = s.activation == Activation::ReLU
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + s.units));
    DenseLayer layer;
    layer.activation = s.activation;
    layer.weight.resize(s.units, fan_in);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = rng.uniform(-limit, limit);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(s.units);
    model.layers.push_back(std::move(layer));
    fan_in = s.units;
  }
  return model;
}

void check_consistent(const MlpModel& model) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto& l = model.layers[i];
    if (l.bias.size() != l.weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                       std::to_string(l.bias.size()) + " != output width " +
                       std::to_string(l.weight.rows()));
    }
    if (i > 0 && l.weight.cols() != model.layers[i - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(i) + " expects " +
                       std::to_string(l.weight.cols()) + " inputs, previous "
                       "layer emits " +
                       std::to_string(model.layers[i - 1].weight.rows()));
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw ShapeError("layer " + std::to_string(i) + " has non-finite parameters");
    }
  }
  if (model.has_input_transform() &&
      (model.input_shift.size() != model.input_dim() ||
       model.input_scale.size() != model.input_dim())) {
    throw ShapeError("input standardization does not match input dimension");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce(double p, double q) {
  q = std::clamp(q, kBceEps, 1.0 - kBceEps);
  return -(p * std::log(q) + (1.0 - p) * std::log(1.0 - q));
}

namespace {

void apply_activation(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::ReLU:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Sigmoid:
      z = z.unaryExpr([](double v) { return sigmoid(v); });
      break;
    case Activation::Linear:
      break;
  }
}

void check_input(const MlpModel& model, Eigen::Index cols) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  if (cols != model.input_dim()) {
    throw ShapeError("input has " + std::to_string(cols) +
                     " columns, model expects " +
                     std::to_string(model.input_dim()));
  }
}

Eigen::MatrixXd affine(const DenseLayer& l, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * l.weight.transpose();
  z.rowwise() += l.bias.transpose();
  return z;
}

}  // namespace

Eigen::MatrixXd forward(const MlpModel& model,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  check_input(model, batch.cols());
  Eigen::MatrixXd x = model.transform_input(batch);
  for (const auto& l : model.layers) {
    x = affine(l, x);
    apply_activation(l.activation, x);
  }
  return x;
}

ForwardTrace forward_trace(const MlpModel& model,
                           const Eigen::Ref<const Eigen::MatrixXd>& batch) {
  check_input(model, batch.cols());
  ForwardTrace trace;
  trace.values.reserve(model.layers.size() + 1);
  trace.values.push_back(model.transform_input(batch));
  for (const auto& l : model.layers) {
    Eigen::MatrixXd z = affine(l, trace.values.back());
    apply_activation(l.activation, z);
    trace.values.push_back(std::move(z));
  }
  return trace;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& l : model.layers) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

bool Gradients::all_finite() const {
  for (const auto& w : weight) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : bias) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Gradients backpropagate(const MlpModel& model, const ForwardTrace& trace,
                        Eigen::MatrixXd d_output, Eigen::MatrixXd* d_input) {
  const std::size_t n_layers = model.layers.size();
  if (trace.values.size() != n_layers + 1) {
    throw ShapeError("forward trace does not match model depth");
  }
  if (d_output.rows() != trace.output().rows() ||
      d_output.cols() != trace.output().cols()) {
    throw ShapeError("output gradient shape does not match model output");
  }
  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);
  Eigen::MatrixXd delta = std::move(d_output);
  for (std::size_t i = n_layers; i-- > 0;) {
    const auto& l = model.layers[i];
    const Eigen::MatrixXd& out = trace.values[i + 1];
    switch (l.activation) {
      case Activation::ReLU:
        delta = (out.array() > 0.0).select(delta, 0.0);
        break;
      case Activation::Sigmoid:
        delta = (delta.array() * out.array() * (1.0 - out.array())).matrix();
        break;
      case Activation::Linear:
        break;
    }
    g.weight[i] = delta.transpose() * trace.values[i];
    g.bias[i] = delta.colwise().sum().transpose();
    if (i > 0 || d_input != nullptr) delta = delta * l.weight;
  }
  if (d_input != nullptr) *d_input = std::move(delta);
  return g;
}

LossValue evaluate_loss(LossKind kind,
                        const Eigen::Ref<const Eigen::MatrixXd>& output,
                        const Eigen::Ref<const Eigen::MatrixXd>& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw ShapeError("targets are " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()) + ", outputs " +
                     std::to_string(output.rows()) + "x" +
                     std::to_string(output.cols()));
  }
  const double n = static_cast<double>(output.size());
  if (n == 0.0) throw ShapeError("empty batch");
  LossValue lv;
  if (kind == LossKind::Mse) {
    const Eigen::MatrixXd diff = output - target;
    lv.value = diff.squaredNorm() / n;
    lv.d_output = diff * (2.0 / n);
    return lv;
  }
  lv.value = 0.0;
  lv.d_output.resize(output.rows(), output.cols());
  for (Eigen::Index r = 0; r < output.rows(); ++r) {
    for (Eigen::Index c = 0; c < output.cols(); ++c) {
      const double p = target(r, c);
      const double q = output(r, c);
      lv.value += bce(p, q);
      // Derivative of the clamped loss: flat outside the clamp range.
      lv.d_output(r, c) =
          (q < kBceEps || q > 1.0 - kBceEps) ? 0.0
                                             : (-p / q + (1.0 - p) / (1.0 - q)) / n;
    }
  }
  lv.value /= n;
  return lv;
}

BackwardResult backward(const MlpModel& model,
                        const Eigen::Ref<const Eigen::MatrixXd>& batch,
                        LossKind kind,
                        const Eigen::Ref<const Eigen::MatrixXd>& targets) {
  const ForwardTrace trace = forward_trace(model, batch);
  LossValue lv = evaluate_loss(kind, trace.output(), targets);
  return {lv.value, backpropagate(model, trace, std::move(lv.d_output))};
}

OptimizerState OptimizerState::for_model(const MlpModel& model,
                                         AdamOptions options) {
  OptimizerState s;
  s.options = options;
  s.first_moment = Gradients::zeros_like(model);
  s.second_moment = Gradients::zeros_like(model);
  return s;
}

void optimizer_step(MlpModel& model, const Gradients& gradients,
                    OptimizerState& state) {
  const std::size_t n = model.layers.size();
  if (gradients.weight.size() != n || gradients.bias.size() != n ||
      state.first_moment.weight.size() != n) {
    throw ShapeError("gradient/optimizer state does not match model depth");
  }
  if (!gradients.all_finite()) {
    throw TrainingAbortError("non-finite gradient at optimizer step " +
                             std::to_string(state.step + 1));
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
      throw ShapeError("gradient shape does not match parameter shape");
    }
    m = o.beta1 * m + (1.0 - o.beta1) * grad;
    v = o.beta2 * v + (1.0 - o.beta2) * grad.cwiseProduct(grad);
    if (o.weight_decay != 0.0) param *= 1.0 - o.learning_rate * o.weight_decay;
    param.array() -= o.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + o.epsilon);
  };
  for (std::size_t i = 0; i < n; ++i) {
    auto& l = model.layers[i];
    update(l.weight, gradients.weight[i], state.first_moment.weight[i],
           state.second_moment.weight[i]);
    update(l.bias, gradients.bias[i], state.first_moment.bias[i],
           state.second_moment.bias[i]);
  }
  for (const auto& l : model.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw TrainingAbortError("non-finite parameter after optimizer step " +
                               std::to_string(state.step));
    }
  }
}

namespace {

nlohmann::json row_major(const Eigen::MatrixXd& m) {
  nlohmann::json flat = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return flat;
}

template <typename Vec>
nlohmann::json vector_json(const Vec& v) {
  nlohmann::json flat = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) flat.push_back(v[i]);
  return flat;
}

std::vector<double> numbers(const nlohmann::json& j, std::size_t expected,
                            const char* what) {
  if (!j.is_array() || j.size() != expected) {
    throw FormatError(std::string("model JSON: '") + what + "' must hold " +
                      std::to_string(expected) + " numbers");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw FormatError(std::string("model JSON: non-numeric entry in '") +
                        what + "'");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const MlpModel& model) {
  nlohmann::json doc;
  doc["format"] = "nbsmooth-mlp";
  doc["version"] = 1;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"in", l.weight.cols()},
                      {"out", l.weight.rows()},
                      {"activation", to_string(l.activation)},
                      {"weight", row_major(l.weight)},
                      {"bias", vector_json(l.bias)}});
  }
  doc["layers"] = std::move(layers);
  if (model.has_input_transform()) {
    doc["input_shift"] = vector_json(model.input_shift);
    doc["input_scale"] = vector_json(model.input_scale);
  }
  return doc;
}

MlpModel mlp_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("format", "") != "nbsmooth-mlp") {
    throw FormatError("not an nbsmooth-mlp document");
  }
  MlpModel model;
  for (const auto& lj : doc.at("layers")) {
    const auto in = lj.at("in").get<Eigen::Index>();
    const auto out = lj.at("out").get<Eigen::Index>();
    if (in < 1 || out < 1) throw FormatError("model JSON: bad layer size");
    DenseLayer l;
    l.activation = parse_activation(lj.at("activation").get<std::string>());
    const auto w = numbers(lj.at("weight"), static_cast<std::size_t>(in * out),
                           "weight");
    l.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
    }
    const auto b = numbers(lj.at("bias"), static_cast<std::size_t>(out), "bias");
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    model.layers.push_back(std::move(l));
  }
  if (doc.contains("input_shift")) {
    const auto dim = static_cast<std::size_t>(model.input_dim());
    const auto s = numbers(doc.at("input_shift"), dim, "input_shift");
    const auto k = numbers(doc.at("input_scale"), dim, "input_scale");
    model.input_shift = Eigen::Map<const Eigen::RowVectorXd>(s.data(), s.size());
    model.input_scale = Eigen::Map<const Eigen::RowVectorXd>(k.data(), k.size());
  }
  check_consistent(model);
  return model;
}

void save_json(const std::filesystem::path& file, const nlohmann::json& doc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  out << doc.dump(1) << '\n';
}

nlohmann::json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

}  // namespace nbs
