#include "slowdown/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "slowdown/csv_io.hpp"
#include "slowdown/random.hpp"

namespace slowdown {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c65ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f706f7574ULL;
constexpr Eigen::Index kEvalChunk = 4096;

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

// Full-batch loss without dropout, chunked to bound memory.
double full_loss(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  double total = 0.0;
  for (Eigen::Index begin = 0; begin < x.cols(); begin += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.cols() - begin);
    const auto cache = forward(model, x.middleCols(begin, n));
    total += loss(model.head(), cache.output, t.middleCols(begin, n)) * static_cast<double>(n);
  }
  return total / static_cast<double>(x.cols());
}

void apply_step(MlpModel& model, const LayerParams& grads, double rate) {
  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weights.noalias() -= rate * grads[l].weights;
    layers[l].biases.noalias() -= rate * grads[l].biases;
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "dropout_rate must be in [0, 1)");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kInvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (lr_schedule == LrSchedule::kStepDecay && (decay_every < 1 || !(decay_factor > 0.0))) {
    fail(ErrorCode::kInvalidArgument, "step decay needs decay_every >= 1 and decay_factor > 0");
  }
}

double TrainConfig::rate_at(int epoch) const {
  if (lr_schedule == LrSchedule::kConstant) return learning_rate;
  return learning_rate * std::pow(decay_factor, static_cast<double>(epoch / decay_every));
}

const char* train_target_name(TrainTarget target) noexcept {
  switch (target) {
    case TrainTarget::kDetection: return "detection";
    case TrainTarget::kStartTime: return "start";
    case TrainTarget::kEndTime: return "end";
  }
  return "unknown";
}

Eigen::MatrixXd feature_matrix(const std::vector<WindowSample>& samples) {
  if (samples.empty()) return Eigen::MatrixXd(static_cast<Eigen::Index>(kWindowLength), 0);
  const auto rows = static_cast<Eigen::Index>(samples.front().features().size());
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto f = samples[i].features();
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(f.data(), rows);
  }
  return x;
}

Eigen::MatrixXd target_matrix(const std::vector<WindowSample>& samples, TrainTarget target) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (target == TrainTarget::kDetection) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, n);
    for (Eigen::Index i = 0; i < n; ++i) t(samples[static_cast<std::size_t>(i)].positive() ? 0 : 1, i) = 1.0;
    return t;
  }
  Eigen::MatrixXd t(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& label = samples[static_cast<std::size_t>(i)].label();
    const auto& value = target == TrainTarget::kStartTime ? label.start_target : label.end_target;
    if (!value) {
      fail(ErrorCode::kInvalidArgument, "time regressors train on sd_included windows only");
    }
    t(0, i) = *value;
  }
  return t;
}

double evaluate_accuracy(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  if (x.cols() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index begin = 0; begin < x.cols(); begin += kEvalChunk) {
    const Eigen::Index n = std::min(kEvalChunk, x.cols() - begin);
    const auto cache = forward(model, x.middleCols(begin, n));
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index predicted = 0;
      Eigen::Index truth = 0;
      cache.output.col(i).maxCoeff(&predicted);
      t.col(begin + i).maxCoeff(&truth);
      if (predicted == truth) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(x.cols());
}

double evaluate_mse(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  if (x.cols() == 0) return 0.0;
  return full_loss(model, x, t);
}

TrainResult train(MlpModel model, const DatasetSplit& split, const TrainConfig& cfg,
                  TrainTarget target, const EpochCallback& on_epoch) {
  cfg.validate();
  const bool classifier = target == TrainTarget::kDetection;
  if (classifier != (model.head() == Head::kSoftmaxClassifier)) {
    fail(ErrorCode::kWrongHead, std::string("model head ") + head_name(model.head()) +
                                    " cannot learn the " + train_target_name(target) + " target");
  }
  if (split.train.empty()) fail(ErrorCode::kTooFewSamples, "training split is empty");

  const auto started = std::chrono::steady_clock::now();
  const Eigen::MatrixXd x_train = feature_matrix(split.train);
  const Eigen::MatrixXd t_train = target_matrix(split.train, target);
  const Eigen::MatrixXd x_val = feature_matrix(split.val);
  const Eigen::MatrixXd t_val = target_matrix(split.val, target);
  const bool has_val = x_val.cols() > 0;

  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x_train.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainReport report;
  MlpModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<Eigen::Index>(order));
    const double rate = cfg.rate_at(epoch);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min(order.size() - begin, static_cast<std::size_t>(cfg.batch_size));
      const std::span<const Eigen::Index> cols(order.data() + begin, n);
      const Eigen::MatrixXd xb = gather_columns(x_train, cols);
      const Eigen::MatrixXd tb = gather_columns(t_train, cols);
      ForwardCache cache;
      if (cfg.dropout_rate > 0.0) {
        const auto masks = sample_dropout_masks(model, n, cfg.dropout_rate, dropout_rng);
        cache = forward(model, xb, &masks);
      } else {
        cache = forward(model, xb);
      }
      const double batch_loss = loss(model.head(), cache.output, tb);
      if (!std::isfinite(batch_loss)) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        throw DivergedLoss("DivergedLoss: non-finite training loss in epoch " +
                               std::to_string(epoch + 1),
                           report);
      }
      epoch_loss += batch_loss * static_cast<double>(n);
      if (rate > 0.0) apply_step(model, backward(model, cache, tb), rate);
    }
    epoch_loss /= static_cast<double>(order.size());
    const double val_loss = has_val ? full_loss(model, x_val, t_val) : epoch_loss;
    report.train_loss.push_back(epoch_loss);
    report.val_loss.push_back(val_loss);
    if (!std::isfinite(val_loss)) {
      report.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      throw DivergedLoss("DivergedLoss: non-finite validation loss in epoch " +
                             std::to_string(epoch + 1),
                         report);
    }
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      report.best_epoch = epoch + 1;
    }
    if (on_epoch) on_epoch(epoch + 1, epoch_loss, val_loss);
  }

  if (classifier) {
    report.train_accuracy = evaluate_accuracy(best, x_train, t_train);
    report.val_accuracy = evaluate_accuracy(best, x_val, t_val);
  } else {
    report.train_mse = evaluate_mse(best, x_train, t_train);
    report.val_mse = evaluate_mse(best, x_val, t_val);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return TrainResult{std::move(best), std::move(report)};
}

void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < report.train_loss.size(); ++i) {
    out << i + 1 << ',' << format_fixed(report.train_loss[i], 10) << ','
        << format_fixed(report.val_loss[i], 10) << '\n';
  }
}

}  // namespace slowdown
