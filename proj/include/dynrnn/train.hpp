#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dynrnn/adam.hpp"
#include "dynrnn/rnn.hpp"

namespace dynrnn {

// Eq.-(7)-style normalized root mean square error over a set of sequences:
// sqrt( (1/|Y|) * sum_n ||y_n - yhat_n||_F^2 ), |Y| = number of sequences.
inline double rmse(const std::vector<Mat>& predicted, const std::vector<Mat>& truth) {
  if (predicted.size() != truth.size())
    throw DataError("rmse: " + std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(truth.size()) + " truths");
  if (predicted.empty()) throw DataError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t n = 0; n < predicted.size(); ++n) {
    if (predicted[n].rows() != truth[n].rows() || predicted[n].cols() != truth[n].cols())
      throw DataError("rmse: shape mismatch at sequence " + std::to_string(n));
    sum += (predicted[n] - truth[n]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

// Per-day RMSE of two equal-length series: each entry counts as one
// observation, sqrt(mean squared error).
inline double series_rmse(const std::vector<double>& predicted, const std::vector<double>& truth) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw DataError("series_rmse: size mismatch or empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

inline std::vector<Mat> predict_all(const RnnParams& params, const RnnConfig& config,
                                    const std::vector<Mat>& inputs) {
  std::vector<Mat> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) out.push_back(predict(params, config, x));
  return out;
}

inline double batch_loss(const RnnParams& params, const RnnConfig& config,
                         const SequenceBatch& batch) {
  return mse_loss(predict_all(params, config, batch.inputs), batch.labels);
}

struct TrainResult {
  RnnParams params;                 // parameters after the second pass
  std::vector<double> loss_history; // loss_history[e-1] = training loss after e epochs (pass 1)
  int best_epoch = 0;               // 1-based argmin of loss_history, ties -> smallest
  double initial_loss = 0.0;        // training loss of the freshly initialized parameters
};

// 1-based epoch whose recorded loss is smallest; ties resolve to the
// smallest epoch index.
inline int best_epoch_of(const std::vector<double>& loss_history) {
  if (loss_history.empty()) throw DataError("best_epoch_of: empty history");
  int best = 0;
  for (int e = 1; e < static_cast<int>(loss_history.size()); ++e)
    if (loss_history[e] < loss_history[best]) best = e;
  return best + 1;
}

namespace detail {

// One training pass from a fresh init. Returns parameters after `epochs`
// epochs; when `history` is non-null it records the training loss after each
// epoch's update(s). An epoch is one ADAM update on the full batch, or one
// update per instance in batch order.
inline RnnParams run_pass(const RnnConfig& config, const SequenceBatch& train, int epochs,
                          int jobs, std::vector<double>* history, double* initial_loss) {
  RnnParams params = init_params(config, config.rng_seed);
  AdamState adam = AdamState::fresh(config);
  if (history) {
    history->clear();
    history->reserve(epochs);
  }

  auto check = [&](double loss, int epoch) {
    if (!std::isfinite(loss))
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
  };

  if (config.batch_mode == BatchMode::FullBatch) {
    // The forward pass inside bptt_grads evaluates the loss of the current
    // parameters, i.e. the post-update loss of the previous epoch; reuse it
    // instead of re-running the network each epoch.
    BpttResult step = bptt_grads(params, config, train, jobs);
    if (initial_loss) *initial_loss = step.loss;
    check(step.loss, 0);
    for (int e = 1; e <= epochs; ++e) {
      adam_step(params, step.grads, adam, config.learning_rate);
      if (e < epochs || history) {
        if (e < epochs) {
          step = bptt_grads(params, config, train, jobs);
          if (history) history->push_back(step.loss);
          check(step.loss, e);
        } else {
          const double loss = batch_loss(params, config, train);
          history->push_back(loss);
          check(loss, e);
        }
      }
    }
  } else {
    if (initial_loss) *initial_loss = batch_loss(params, config, train);
    SequenceBatch one;
    one.inputs.resize(1);
    one.labels.resize(1);
    for (int e = 1; e <= epochs; ++e) {
      for (std::size_t n = 0; n < train.size(); ++n) {
        one.inputs[0] = train.inputs[n];
        one.labels[0] = train.labels[n];
        BpttResult step = bptt_grads(params, config, one, 1);
        check(step.loss, e);
        adam_step(params, step.grads, adam, config.learning_rate);
      }
      if (history) {
        const double loss = batch_loss(params, config, train);
        history->push_back(loss);
        check(loss, e);
      }
    }
  }
  return params;
}

}  // namespace detail

// Two-pass epoch selection: pass 1 trains for config.max_epochs recording the
// loss after every epoch, best_epoch is the argmin (ties -> smallest), pass 2
// retrains from the same seed for exactly best_epoch epochs.
inline TrainResult train_two_pass(const RnnConfig& config, const SequenceBatch& train,
                                  int jobs = 1) {
  config.validate();
  if (train.size() == 0) throw DataError("train_two_pass: empty training batch");
  check_batch(train, config);

  TrainResult result;
  detail::run_pass(config, train, config.max_epochs, jobs, &result.loss_history,
                   &result.initial_loss);
  result.best_epoch = best_epoch_of(result.loss_history);

  result.params = detail::run_pass(config, train, result.best_epoch, jobs, nullptr, nullptr);
  return result;
}

}  // namespace dynrnn
