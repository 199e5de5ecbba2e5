#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

namespace slowdown {

class Rng;

inline constexpr std::size_t kHiddenWidth = 70;

enum class Head : std::uint8_t {
  kSoftmaxClassifier = 1,  // 2 outputs: (p(sd_included), p(non_sd_included))
  kSigmoidRegressor = 2,   // 1 output in (0, 1)
};

const char* head_name(Head head) noexcept;

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd biases;   // fan_out
};

// Gradients share the parameter layout.
using LayerParams = std::array<DenseLayer, 3>;

// Fully connected net with two ReLU hidden layers: dims = {input, hidden1,
// hidden2, output}.
class MlpModel {
 public:
  using Dims = std::array<std::size_t, 4>;

  // All parameters zero.
  MlpModel(Dims dims, Head head);

  // He-uniform hidden layers, Xavier-uniform output layer, zero biases.
  static MlpModel initialized(Dims dims, Head head, std::uint64_t seed);

  // {600, 70, 70, 2} classifier and {600, 70, 70, 1} regressor.
  static Dims detection_dims();
  static Dims regressor_dims();

  const Dims& dims() const noexcept { return dims_; }
  Head head() const noexcept { return head_; }
  const LayerParams& layers() const noexcept { return layers_; }
  LayerParams& layers() noexcept { return layers_; }
  std::size_t parameter_count() const noexcept;
  bool all_finite() const;

 private:
  Dims dims_;
  Head head_;
  LayerParams layers_;
};

// Per-unit multipliers for the hidden activations: 0 for dropped units,
// 1/(1-rate) for kept units (inverted dropout).
struct DropoutMasks {
  Eigen::MatrixXd hidden1;
  Eigen::MatrixXd hidden2;
};

DropoutMasks sample_dropout_masks(const MlpModel& model, std::size_t batch_size, double rate,
                                  Rng& rng);

struct ForwardCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd z1, a1;
  Eigen::MatrixXd z2, a2;
  Eigen::MatrixXd output;
  Eigen::MatrixXd mask1, mask2;  // empty when run without dropout
};

// `batch` holds one window per column (input_dim x batch_size).
ForwardCache forward(const MlpModel& model, const Eigen::MatrixXd& batch,
                     const DropoutMasks* masks = nullptr);

// Classifier: mean over the batch of -sum target * log(clamped prob).
// Regressor: mean squared error. `targets` has the shape of `outputs`.
double loss(Head head, const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets);

// Exact gradients of loss() for the batch held in `cache`.
LayerParams backward(const MlpModel& model, const ForwardCache& cache,
                     const Eigen::MatrixXd& targets);

struct DetectionProbabilities {
  double sd_included = 0.5;
  double non_sd_included = 0.5;

  bool is_sd(double threshold = 0.5) const noexcept { return sd_included >= threshold; }
};

DetectionProbabilities predict_detection(const MlpModel& model, std::span<const double> window);
// Fraction of the window length in (0, 1); multiply by 600 for minutes.
double predict_time(const MlpModel& model, std::span<const double> window);

// Column-batched inference: p(sd_included) or the regressor output per column.
Eigen::VectorXd predict_detection_batch(const MlpModel& model, const Eigen::MatrixXd& batch);
Eigen::VectorXd predict_time_batch(const MlpModel& model, const Eigen::MatrixXd& batch);

// Container: "SDMLP\0\0\0", u32 format version, u8 head tag, 4 x u32 dims,
// little-endian f64 parameters (per layer: weights row-major, then biases),
// u64 FNV-1a checksum of everything before it.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace slowdown
