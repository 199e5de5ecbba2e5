#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "slowdown/error.hpp"
#include "slowdown/mlp.hpp"
#include "slowdown/windows.hpp"

namespace slowdown {

enum class LrSchedule { kConstant, kStepDecay };

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 512;
  double dropout_rate = 0.15;
  double learning_rate = 0.05;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double decay_factor = 0.5;  // step decay multiplier
  int decay_every = 250;      // epochs between decays
  std::uint64_t seed = 1;

  void validate() const;
  double rate_at(int epoch) const;
};

// Which label of a WindowSample a network learns.
enum class TrainTarget { kDetection, kStartTime, kEndTime };

const char* train_target_name(TrainTarget target) noexcept;

struct TrainReport {
  std::vector<double> train_loss;  // per epoch, mean minibatch loss with dropout
  std::vector<double> val_loss;    // per epoch, full pass without dropout
  int best_epoch = 0;              // 1-based epoch of the returned snapshot
  double train_accuracy = 0.0;     // classifier only
  double val_accuracy = 0.0;
  double train_mse = 0.0;          // regressors only, on [0, 1] targets
  double val_mse = 0.0;
  double wall_seconds = 0.0;
};

// Thrown when a loss turns non-finite; carries the epochs completed so far.
class DivergedLoss : public Error {
 public:
  DivergedLoss(const std::string& what, TrainReport report)
      : Error(ErrorCode::kDivergedLoss, what), report_(std::move(report)) {}
  const TrainReport& report() const noexcept { return report_; }

 private:
  TrainReport report_;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

// Minibatch SGD with inverted dropout on hidden units. Returns the snapshot
// with the lowest validation loss.
TrainResult train(MlpModel model, const DatasetSplit& split, const TrainConfig& cfg,
                  TrainTarget target, const EpochCallback& on_epoch = {});

// Column matrix of sample features and the matching target matrix.
Eigen::MatrixXd feature_matrix(const std::vector<WindowSample>& samples);
Eigen::MatrixXd target_matrix(const std::vector<WindowSample>& samples, TrainTarget target);

// Classification accuracy (argmax) or MSE, evaluated without dropout.
double evaluate_accuracy(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t);
double evaluate_mse(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t);

// `epoch,train_loss,val_loss`
void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace slowdown
