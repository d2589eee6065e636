#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dynrnn/common.hpp"
#include "dynrnn/rng.hpp"

namespace dynrnn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { Tanh, Relu };
enum class BatchMode { FullBatch, PerInstance };

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }
inline std::string to_string(BatchMode m) {
  return m == BatchMode::FullBatch ? "full_batch" : "per_instance";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

inline BatchMode batch_mode_from_string(const std::string& s) {
  if (s == "full_batch") return BatchMode::FullBatch;
  if (s == "per_instance") return BatchMode::PerInstance;
  throw ConfigError("unknown batch mode '" + s + "' (expected full_batch or per_instance)");
}

struct RnnConfig {
  int seq_len = 1;      // T
  int input_size = 1;   // N_i
  int output_size = 1;  // N_o
  int num_layers = 1;   // K
  int hidden_size = 1;  // N_h, uniform across layers
  double learning_rate = 1e-3;
  int max_epochs = 1;
  Activation hidden_activation = Activation::Tanh;
  BatchMode batch_mode = BatchMode::FullBatch;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
    if (input_size < 1) throw ConfigError("input_size must be >= 1");
    if (output_size < 1) throw ConfigError("output_size must be >= 1");
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must be in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must be in [0,1)");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
  }
};

// One parameter set shared across all time-steps. Layers are 0-based;
// w_stack[k-1] / b_stack[k-1] feed layer k from layer k-1 (k >= 1).
struct RnnParams {
  Mat w_in;                  // N_h x N_i
  std::vector<Mat> w_rec;    // K matrices, N_h x N_h
  std::vector<Mat> w_stack;  // K-1 matrices, N_h x N_h
  Mat w_out;                 // N_o x N_h
  Vec b_in;                  // N_h
  std::vector<Vec> b_rec;    // K vectors, N_h
  std::vector<Vec> b_stack;  // K-1 vectors, N_h
  Vec b_out;                 // N_o

  static RnnParams zeros(const RnnConfig& c) {
    RnnParams p;
    p.w_in = Mat::Zero(c.hidden_size, c.input_size);
    p.w_rec.assign(c.num_layers, Mat::Zero(c.hidden_size, c.hidden_size));
    p.w_stack.assign(c.num_layers - 1, Mat::Zero(c.hidden_size, c.hidden_size));
    p.w_out = Mat::Zero(c.output_size, c.hidden_size);
    p.b_in = Vec::Zero(c.hidden_size);
    p.b_rec.assign(c.num_layers, Vec::Zero(c.hidden_size));
    p.b_stack.assign(c.num_layers - 1, Vec::Zero(c.hidden_size));
    p.b_out = Vec::Zero(c.output_size);
    return p;
  }
};

// Visits every tensor in the canonical order used by init, flatten and
// serialization: w_in, w_rec[0..K), w_stack[0..K-1), w_out, then biases in
// the same order.
template <class P, class F>
void visit_params(P&& p, F&& f) {
  f(p.w_in);
  for (auto& m : p.w_rec) f(m);
  for (auto& m : p.w_stack) f(m);
  f(p.w_out);
  f(p.b_in);
  for (auto& v : p.b_rec) f(v);
  for (auto& v : p.b_stack) f(v);
  f(p.b_out);
}

template <class F>
void visit_params(RnnParams& a, RnnParams& b, F&& f) {
  f(a.w_in, b.w_in);
  for (std::size_t i = 0; i < a.w_rec.size(); ++i) f(a.w_rec[i], b.w_rec[i]);
  for (std::size_t i = 0; i < a.w_stack.size(); ++i) f(a.w_stack[i], b.w_stack[i]);
  f(a.w_out, b.w_out);
  f(a.b_in, b.b_in);
  for (std::size_t i = 0; i < a.b_rec.size(); ++i) f(a.b_rec[i], b.b_rec[i]);
  for (std::size_t i = 0; i < a.b_stack.size(); ++i) f(a.b_stack[i], b.b_stack[i]);
  f(a.b_out, b.b_out);
}

inline std::size_t param_count(const RnnParams& p) {
  std::size_t n = 0;
  visit_params(p, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

inline Vec flatten_params(const RnnParams& p) {
  Vec out(param_count(p));
  Eigen::Index at = 0;
  visit_params(p, [&](const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) out[at++] = t.data()[i];
  });
  return out;
}

inline void unflatten_params(const Vec& flat, RnnParams& p) {
  Eigen::Index at = 0;
  visit_params(p, [&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = flat[at++];
  });
}

inline bool params_finite(const RnnParams& p) {
  bool ok = true;
  visit_params(p, [&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

// Weights i.i.d. uniform on [-1/sqrt(N_h), +1/sqrt(N_h)], biases zero.
// Weight entries are drawn in canonical visit order, column-major within
// each matrix, so a fixed seed gives bitwise-identical parameters.
inline RnnParams init_params(const RnnConfig& config, std::uint64_t seed) {
  config.validate();
  RnnParams p = RnnParams::zeros(config);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  Rng rng(seed);
  auto fill = [&](Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  };
  fill(p.w_in);
  for (auto& m : p.w_rec) fill(m);
  for (auto& m : p.w_stack) fill(m);
  fill(p.w_out);
  return p;
}

// Sequences are stored time-major: row t of a T x N matrix is the vector at
// time-step t.
struct SequenceBatch {
  std::vector<Mat> inputs;  // each T x N_i
  std::vector<Mat> labels;  // each T x N_o

  std::size_t size() const { return inputs.size(); }
};

inline void check_batch(const SequenceBatch& b, const RnnConfig& c) {
  if (b.inputs.size() != b.labels.size())
    throw DataError("batch has " + std::to_string(b.inputs.size()) + " inputs but " +
                    std::to_string(b.labels.size()) + " labels");
  for (std::size_t n = 0; n < b.inputs.size(); ++n) {
    if (b.inputs[n].rows() != c.seq_len || b.inputs[n].cols() != c.input_size)
      throw DataError("input sequence " + std::to_string(n) + " has shape " +
                      std::to_string(b.inputs[n].rows()) + "x" + std::to_string(b.inputs[n].cols()) +
                      ", expected " + std::to_string(c.seq_len) + "x" + std::to_string(c.input_size));
    if (b.labels[n].rows() != c.seq_len || b.labels[n].cols() != c.output_size)
      throw DataError("label sequence " + std::to_string(n) + " has shape " +
                      std::to_string(b.labels[n].rows()) + "x" + std::to_string(b.labels[n].cols()) +
                      ", expected " + std::to_string(c.seq_len) + "x" + std::to_string(c.output_size));
  }
}

struct ForwardCache {
  std::vector<Mat> hidden;  // K matrices, (T+1) x N_h; row 0 is the zero initial state
  std::vector<Mat> preact;  // K matrices, T x N_h
  Mat outputs;              // T x N_o
};

namespace detail {

inline void apply_activation(Activation a, Vec& v) {
  if (a == Activation::Tanh) {
    v = v.array().tanh();
  } else {
    v = v.cwiseMax(0.0);
  }
}

// Derivative of the activation from preactivation a and activation h.
inline Vec activation_grad(Activation act, const Vec& a, const Vec& h) {
  if (act == Activation::Tanh) return 1.0 - h.array().square();
  return (a.array() > 0.0).cast<double>();
}

}  // namespace detail

// Eqs: h_1(t) = f(w_in x(t) + b_in + w_rec[0] h_1(t-1) + b_rec[0]),
//      h_k(t) = f(w_stack[k-1] h_{k-1}(t) + b_stack[k-1] + w_rec[k] h_k(t-1) + b_rec[k]),
//      y(t)   = w_out h_K(t) + b_out   (linear output).
inline ForwardCache forward(const RnnParams& params, const RnnConfig& config, const Mat& x) {
  if (x.rows() != config.seq_len || x.cols() != config.input_size)
    throw DataError("forward: input has shape " + std::to_string(x.rows()) + "x" +
                    std::to_string(x.cols()) + ", expected " + std::to_string(config.seq_len) +
                    "x" + std::to_string(config.input_size));
  const int T = config.seq_len;
  const int K = config.num_layers;
  const int H = config.hidden_size;

  ForwardCache cache;
  cache.hidden.assign(K, Mat::Zero(T + 1, H));
  cache.preact.assign(K, Mat(T, H));
  cache.outputs.resize(T, config.output_size);

  Vec a(H), h(H);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      if (k == 0) {
        a = params.w_in * x.row(t).transpose() + params.b_in;
      } else {
        a = params.w_stack[k - 1] * cache.hidden[k - 1].row(t + 1).transpose() +
            params.b_stack[k - 1];
      }
      a.noalias() += params.w_rec[k] * cache.hidden[k].row(t).transpose();
      a += params.b_rec[k];
      cache.preact[k].row(t) = a;
      h = a;
      detail::apply_activation(config.hidden_activation, h);
      if (!h.allFinite())
        throw NumericError("forward: non-finite hidden state at time-step " + std::to_string(t + 1) +
                           ", layer " + std::to_string(k + 1));
      cache.hidden[k].row(t + 1) = h;
    }
    Vec y = params.w_out * cache.hidden[K - 1].row(t + 1).transpose() + params.b_out;
    if (!y.allFinite())
      throw NumericError("forward: non-finite output at time-step " + std::to_string(t + 1));
    cache.outputs.row(t) = y;
  }
  return cache;
}

inline Mat predict(const RnnParams& params, const RnnConfig& config, const Mat& x) {
  return forward(params, config, x).outputs;
}

// Mean of squared element-wise differences over all N*T*N_o scalar entries.
inline double mse_loss(const std::vector<Mat>& outputs, const std::vector<Mat>& labels) {
  if (outputs.size() != labels.size())
    throw DataError("mse_loss: " + std::to_string(outputs.size()) + " outputs vs " +
                    std::to_string(labels.size()) + " labels");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < outputs.size(); ++n) {
    if (outputs[n].rows() != labels[n].rows() || outputs[n].cols() != labels[n].cols())
      throw DataError("mse_loss: shape mismatch at sequence " + std::to_string(n));
    sum += (outputs[n] - labels[n]).squaredNorm();
    count += static_cast<std::size_t>(outputs[n].size());
  }
  if (count == 0) throw DataError("mse_loss: empty input");
  return sum / static_cast<double>(count);
}

inline double mse_loss(const Mat& outputs, const Mat& labels) {
  if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols())
    throw DataError("mse_loss: shape mismatch");
  if (outputs.size() == 0) throw DataError("mse_loss: empty input");
  return (outputs - labels).squaredNorm() / static_cast<double>(outputs.size());
}

namespace detail {

// Exact gradient contribution of one sequence; scale is d(loss)/d(sum of
// squared residuals of this sequence) * 2, i.e. 2 / (N*T*N_o) for the batch
// mean reduction. Accumulates into grads and returns the sequence's sum of
// squared residuals.
inline double bptt_accumulate(const RnnParams& params, const RnnConfig& config, const Mat& x,
                              const Mat& y, double scale, RnnParams& grads) {
  const int T = config.seq_len;
  const int K = config.num_layers;
  const int H = config.hidden_size;

  const ForwardCache cache = forward(params, config, x);

  // carry[k] = w_rec[k]^T * da_k(t+1), the within-layer contribution flowing
  // backward from the next time-step.
  std::vector<Vec> carry(K, Vec::Zero(H));
  std::vector<Vec> da(K, Vec(H));

  Vec dy, dh;
  for (int t = T - 1; t >= 0; --t) {
    dy = scale * (cache.outputs.row(t) - y.row(t)).transpose();
    grads.w_out.noalias() += dy * cache.hidden[K - 1].row(t + 1);
    grads.b_out += dy;
    for (int k = K - 1; k >= 0; --k) {
      if (k == K - 1) {
        dh = params.w_out.transpose() * dy;
      } else {
        dh = params.w_stack[k].transpose() * da[k + 1];
      }
      dh += carry[k];
      const Vec fprime = activation_grad(config.hidden_activation,
                                         cache.preact[k].row(t).transpose(),
                                         cache.hidden[k].row(t + 1).transpose());
      da[k] = fprime.cwiseProduct(dh);
      grads.w_rec[k].noalias() += da[k] * cache.hidden[k].row(t);
      grads.b_rec[k] += da[k];
      if (k == 0) {
        grads.w_in.noalias() += da[0] * x.row(t);
        grads.b_in += da[0];
      } else {
        grads.w_stack[k - 1].noalias() += da[k] * cache.hidden[k - 1].row(t + 1);
        grads.b_stack[k - 1] += da[k];
      }
      carry[k].noalias() = params.w_rec[k].transpose() * da[k];
    }
  }
  return (cache.outputs - y).squaredNorm();
}

}  // namespace detail

struct BpttResult {
  RnnParams grads;
  double loss = 0.0;  // mse_loss of the batch at the evaluated parameters
};

// Exact gradient of mse_loss over the batch. With jobs > 1 the per-sequence
// contributions are computed concurrently; the final reduction sums them in
// instance order, so the result is bitwise independent of the thread count.
inline BpttResult bptt_grads(const RnnParams& params, const RnnConfig& config,
                             const SequenceBatch& batch, int jobs = 1) {
  if (batch.size() == 0) throw DataError("bptt_grads: empty batch");
  check_batch(batch, config);
  const std::size_t N = batch.size();
  const double scale =
      2.0 / (static_cast<double>(N) * config.seq_len * config.output_size);

  BpttResult result;
  result.grads = RnnParams::zeros(config);

  std::vector<double> losses(N, 0.0);
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(N)));
  if (n_threads == 1) {
    for (std::size_t n = 0; n < N; ++n) {
      losses[n] = detail::bptt_accumulate(params, config, batch.inputs[n], batch.labels[n],
                                          scale, result.grads);
    }
  } else {
    std::vector<RnnParams> partial(N);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::size_t chunk = (N + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(N, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi]() {
        for (std::size_t n = lo; n < hi; ++n) {
          partial[n] = RnnParams::zeros(config);
          losses[n] = detail::bptt_accumulate(params, config, batch.inputs[n], batch.labels[n],
                                              scale, partial[n]);
        }
      });
    }
    for (auto& th : pool) th.join();
    for (std::size_t n = 0; n < N; ++n)
      visit_params(result.grads, partial[n], [](auto& g, auto& p) { g += p; });
  }

  double sum = 0.0;
  for (std::size_t n = 0; n < N; ++n) sum += losses[n];
  result.loss = sum / (static_cast<double>(N) * config.seq_len * config.output_size);
  if (!params_finite(result.grads))
    throw NumericError("bptt_grads: non-finite gradient");
  return result;
}

}  // namespace dynrnn
