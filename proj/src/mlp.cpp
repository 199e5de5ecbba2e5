#include "slowdown/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "slowdown/error.hpp"
#include "slowdown/random.hpp"
#include "slowdown/timeseries.hpp"

namespace slowdown {

namespace {

constexpr std::string_view kModelMagic{"SDMLP\0\0\0", 8};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kProbFloor = 1e-12;

std::size_t output_width(Head head) { return head == Head::kSoftmaxClassifier ? 2 : 1; }

Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = layer.weights * x;
  z.colwise() += layer.biases;
  return z;
}

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
}

void sigmoid_inplace(Eigen::MatrixXd& z) {
  z = z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Eigen::MatrixXd window_column(const MlpModel& model, std::span<const double> window) {
  if (window.size() != model.dims()[0]) {
    fail(ErrorCode::kShapeMismatch, "window has " + std::to_string(window.size()) +
                                        " values, model expects " + std::to_string(model.dims()[0]));
  }
  return Eigen::Map<const Eigen::VectorXd>(window.data(), static_cast<Eigen::Index>(window.size()));
}

void require_head(const MlpModel& model, Head head) {
  if (model.head() != head) {
    fail(ErrorCode::kWrongHead, std::string("model head is ") + head_name(model.head()) +
                                    ", operation needs " + head_name(head));
  }
}

}  // namespace

const char* head_name(Head head) noexcept {
  switch (head) {
    case Head::kSoftmaxClassifier: return "softmax_classifier";
    case Head::kSigmoidRegressor: return "sigmoid_regressor";
  }
  return "unknown";
}

MlpModel::MlpModel(Dims dims, Head head) : dims_(dims), head_(head) {
  if (head != Head::kSoftmaxClassifier && head != Head::kSigmoidRegressor) {
    fail(ErrorCode::kInvalidArgument, "unknown head tag");
  }
  if (std::any_of(dims.begin(), dims.end(), [](std::size_t d) { return d == 0; })) {
    fail(ErrorCode::kShapeMismatch, "layer widths must be positive");
  }
  if (dims[3] != output_width(head)) {
    fail(ErrorCode::kShapeMismatch, std::string(head_name(head)) + " needs " +
                                        std::to_string(output_width(head)) + " outputs");
  }
  for (std::size_t l = 0; l < 3; ++l) {
    layers_[l].weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[l + 1]),
                                               static_cast<Eigen::Index>(dims[l]));
    layers_[l].biases = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[l + 1]));
  }
}

MlpModel MlpModel::initialized(Dims dims, Head head, std::uint64_t seed) {
  MlpModel model(dims, head);
  Rng rng(seed);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto fan_in = static_cast<double>(dims[l]);
    const auto fan_out = static_cast<double>(dims[l + 1]);
    const double limit = l < 2 ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    auto& w = model.layers_[l].weights;
    // Row-major fill so the draw order matches the on-disk order.
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return model;
}

MlpModel::Dims MlpModel::detection_dims() { return {kWindowLength, kHiddenWidth, kHiddenWidth, 2}; }
MlpModel::Dims MlpModel::regressor_dims() { return {kWindowLength, kHiddenWidth, kHiddenWidth, 1}; }

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
  return n;
}

bool MlpModel::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.biases.allFinite();
  });
}

DropoutMasks sample_dropout_masks(const MlpModel& model, std::size_t batch_size, double rate,
                                  Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) fail(ErrorCode::kInvalidArgument, "dropout rate must be in [0, 1)");
  const double keep_scale = 1.0 / (1.0 - rate);
  auto draw = [&](std::size_t rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(batch_size));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, c) = (rate > 0.0 && rng.uniform() < rate) ? 0.0 : keep_scale;
      }
    }
    return m;
  };
  DropoutMasks masks;
  masks.hidden1 = draw(model.dims()[1]);
  masks.hidden2 = draw(model.dims()[2]);
  return masks;
}

ForwardCache forward(const MlpModel& model, const Eigen::MatrixXd& batch, const DropoutMasks* masks) {
  const auto& dims = model.dims();
  if (static_cast<std::size_t>(batch.rows()) != dims[0]) {
    fail(ErrorCode::kShapeMismatch, "batch rows " + std::to_string(batch.rows()) +
                                        " != input width " + std::to_string(dims[0]));
  }
  if (masks != nullptr &&
      (static_cast<std::size_t>(masks->hidden1.rows()) != dims[1] ||
       static_cast<std::size_t>(masks->hidden2.rows()) != dims[2] ||
       masks->hidden1.cols() != batch.cols() || masks->hidden2.cols() != batch.cols())) {
    fail(ErrorCode::kShapeMismatch, "dropout masks do not match the batch");
  }
  const auto& layers = model.layers();
  ForwardCache cache;
  cache.input = batch;
  cache.z1 = affine(layers[0], batch);
  cache.a1 = cache.z1.cwiseMax(0.0);
  if (masks != nullptr) {
    cache.mask1 = masks->hidden1;
    cache.a1.array() *= cache.mask1.array();
  }
  cache.z2 = affine(layers[1], cache.a1);
  cache.a2 = cache.z2.cwiseMax(0.0);
  if (masks != nullptr) {
    cache.mask2 = masks->hidden2;
    cache.a2.array() *= cache.mask2.array();
  }
  cache.output = affine(layers[2], cache.a2);
  if (model.head() == Head::kSoftmaxClassifier) {
    softmax_columns(cache.output);
  } else {
    sigmoid_inplace(cache.output);
  }
  return cache;
}

double loss(Head head, const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    fail(ErrorCode::kShapeMismatch, "outputs and targets differ in shape");
  }
  if (outputs.cols() == 0) fail(ErrorCode::kShapeMismatch, "empty batch");
  const auto batch = static_cast<double>(outputs.cols());
  if (head == Head::kSoftmaxClassifier) {
    const Eigen::ArrayXXd logp = outputs.array().max(kProbFloor).min(1.0 - kProbFloor).log();
    return -(targets.array() * logp).sum() / batch;
  }
  return (outputs - targets).squaredNorm() / (batch * static_cast<double>(outputs.rows()));
}

LayerParams backward(const MlpModel& model, const ForwardCache& cache, const Eigen::MatrixXd& targets) {
  const auto& dims = model.dims();
  const Eigen::Index batch = cache.input.cols();
  const bool consistent =
      static_cast<std::size_t>(cache.input.rows()) == dims[0] &&
      static_cast<std::size_t>(cache.z1.rows()) == dims[1] &&
      static_cast<std::size_t>(cache.z2.rows()) == dims[2] &&
      static_cast<std::size_t>(cache.output.rows()) == dims[3] && cache.z1.cols() == batch &&
      cache.a1.cols() == batch && cache.z2.cols() == batch && cache.a2.cols() == batch &&
      cache.output.cols() == batch;
  if (!consistent) fail(ErrorCode::kStaleCache, "forward cache does not match the model");
  if (targets.rows() != cache.output.rows() || targets.cols() != batch) {
    fail(ErrorCode::kShapeMismatch, "targets do not match the cached batch");
  }
  const auto n = static_cast<double>(batch);
  const auto& layers = model.layers();

  Eigen::MatrixXd delta;
  if (model.head() == Head::kSoftmaxClassifier) {
    delta = (cache.output - targets) / n;
  } else {
    const auto& y = cache.output;
    delta = (2.0 / (n * static_cast<double>(y.rows()))) *
            ((y - targets).array() * y.array() * (1.0 - y.array())).matrix();
  }

  LayerParams grads;
  grads[2].weights = delta * cache.a2.transpose();
  grads[2].biases = delta.rowwise().sum();

  Eigen::MatrixXd back = layers[2].weights.transpose() * delta;
  Eigen::ArrayXXd gate = (cache.z2.array() > 0.0).cast<double>();
  if (cache.mask2.size() != 0) gate *= cache.mask2.array();
  delta = (back.array() * gate).matrix();
  grads[1].weights = delta * cache.a1.transpose();
  grads[1].biases = delta.rowwise().sum();

  back = layers[1].weights.transpose() * delta;
  gate = (cache.z1.array() > 0.0).cast<double>();
  if (cache.mask1.size() != 0) gate *= cache.mask1.array();
  delta = (back.array() * gate).matrix();
  grads[0].weights = delta * cache.input.transpose();
  grads[0].biases = delta.rowwise().sum();
  return grads;
}

DetectionProbabilities predict_detection(const MlpModel& model, std::span<const double> window) {
  require_head(model, Head::kSoftmaxClassifier);
  const auto cache = forward(model, window_column(model, window));
  return DetectionProbabilities{cache.output(0, 0), cache.output(1, 0)};
}

double predict_time(const MlpModel& model, std::span<const double> window) {
  require_head(model, Head::kSigmoidRegressor);
  return forward(model, window_column(model, window)).output(0, 0);
}

Eigen::VectorXd predict_detection_batch(const MlpModel& model, const Eigen::MatrixXd& batch) {
  require_head(model, Head::kSoftmaxClassifier);
  return forward(model, batch).output.row(0).transpose();
}

Eigen::VectorXd predict_time_batch(const MlpModel& model, const Eigen::MatrixXd& batch) {
  require_head(model, Head::kSigmoidRegressor);
  return forward(model, batch).output.row(0).transpose();
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes(kModelMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.head()));
  for (auto d : model.dims()) w.u32(static_cast<std::uint32_t>(d));
  for (const auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.f64(layer.weights(r, c));
    }
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) w.f64(layer.biases(i));
  }
  w.u64(detail::fnv1a64(w.data()));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) fail(ErrorCode::kIo, "cannot write model '" + path.string() + "'");
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) {
    fail(ErrorCode::kCorruptModel, "'" + path.string() + "': " + why);
  };
  if (data.size() < kModelMagic.size() + 8) corrupt("truncated");
  const std::string_view body(data.data(), data.size() - 8);
  detail::ByteReader tail(std::string_view(data).substr(data.size() - 8));
  std::uint64_t stored = 0;
  tail.u64(stored);

  detail::ByteReader r(body);
  std::string_view magic;
  if (!r.bytes(kModelMagic.size(), magic) || magic != kModelMagic) corrupt("bad magic");
  std::uint32_t version = 0;
  if (!r.u32(version) || version != kModelVersion) corrupt("unsupported format version");
  std::uint8_t head_tag = 0;
  if (!r.u8(head_tag)) corrupt("truncated header");
  if (head_tag != static_cast<std::uint8_t>(Head::kSoftmaxClassifier) &&
      head_tag != static_cast<std::uint8_t>(Head::kSigmoidRegressor)) {
    corrupt("unknown head tag");
  }
  MlpModel::Dims dims{};
  for (auto& d : dims) {
    std::uint32_t v = 0;
    if (!r.u32(v) || v == 0 || v > (1U << 20)) corrupt("bad dimensions");
    d = v;
  }
  if (detail::fnv1a64(body) != stored) corrupt("checksum mismatch");

  const auto head = static_cast<Head>(head_tag);
  if (dims[3] != output_width(head)) corrupt("output width does not match head");
  MlpModel model(dims, head);
  if (r.remaining() != model.parameter_count() * 8) corrupt("parameter block has the wrong size");
  for (auto& layer : model.layers()) {
    for (Eigen::Index row = 0; row < layer.weights.rows(); ++row) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) r.f64(layer.weights(row, c));
    }
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) r.f64(layer.biases(i));
  }
  if (!model.all_finite()) corrupt("non-finite parameters");
  return model;
}

}  // namespace slowdown
