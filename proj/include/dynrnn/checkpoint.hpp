#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynrnn/adam.hpp"
#include "dynrnn/rnn.hpp"

namespace dynrnn {

using json = nlohmann::json;

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const json& j) {
  const auto rows = j.size();
  if (rows == 0) throw DataError("checkpoint: empty matrix");
  const auto cols = j.at(0).size();
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (j.at(r).size() != cols) throw DataError("checkpoint: ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Vec vec_from_json(const json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

inline json rnn_config_to_json(const RnnConfig& c) {
  return json{{"seq_len", c.seq_len},
              {"input_size", c.input_size},
              {"output_size", c.output_size},
              {"num_layers", c.num_layers},
              {"hidden_size", c.hidden_size},
              {"learning_rate", c.learning_rate},
              {"max_epochs", c.max_epochs},
              {"hidden_activation", to_string(c.hidden_activation)},
              {"batch_mode", to_string(c.batch_mode)},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_epsilon", c.adam_epsilon},
              {"rng_seed", c.rng_seed}};
}

inline RnnConfig rnn_config_from_json(const json& j) {
  RnnConfig c;
  c.seq_len = j.at("seq_len").get<int>();
  c.input_size = j.at("input_size").get<int>();
  c.output_size = j.at("output_size").get<int>();
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
  c.batch_mode = batch_mode_from_string(j.at("batch_mode").get<std::string>());
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

inline json params_to_json(const RnnParams& p) {
  json w_rec = json::array(), w_stack = json::array();
  json b_rec = json::array(), b_stack = json::array();
  for (const auto& m : p.w_rec) w_rec.push_back(mat_to_json(m));
  for (const auto& m : p.w_stack) w_stack.push_back(mat_to_json(m));
  for (const auto& v : p.b_rec) b_rec.push_back(vec_to_json(v));
  for (const auto& v : p.b_stack) b_stack.push_back(vec_to_json(v));
  return json{{"w_in", mat_to_json(p.w_in)},   {"w_rec", std::move(w_rec)},
              {"w_stack", std::move(w_stack)}, {"w_out", mat_to_json(p.w_out)},
              {"b_in", vec_to_json(p.b_in)},   {"b_rec", std::move(b_rec)},
              {"b_stack", std::move(b_stack)}, {"b_out", vec_to_json(p.b_out)}};
}

inline RnnParams params_from_json(const json& j) {
  RnnParams p;
  p.w_in = mat_from_json(j.at("w_in"));
  for (const auto& m : j.at("w_rec")) p.w_rec.push_back(mat_from_json(m));
  for (const auto& m : j.at("w_stack")) p.w_stack.push_back(mat_from_json(m));
  p.w_out = mat_from_json(j.at("w_out"));
  p.b_in = vec_from_json(j.at("b_in"));
  for (const auto& v : j.at("b_rec")) p.b_rec.push_back(vec_from_json(v));
  for (const auto& v : j.at("b_stack")) p.b_stack.push_back(vec_from_json(v));
  p.b_out = vec_from_json(j.at("b_out"));
  return p;
}

struct Checkpoint {
  RnnConfig config;
  RnnParams params;
  AdamState adam;
  int epoch = 0;
  json extra;  // experiment-specific metadata (window length, standardizer, ...)
};

constexpr int kCheckpointVersion = 1;

// Self-describing JSON container; doubles serialize with round-trip
// precision, so params survive save->load bit-exactly.
inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  json j{{"format", "dynrnn-checkpoint"},
         {"version", kCheckpointVersion},
         {"config", rnn_config_to_json(ck.config)},
         {"epoch", ck.epoch},
         {"params", params_to_json(ck.params)},
         {"adam",
          json{{"step_count", ck.adam.step_count},
               {"beta1", ck.adam.beta1},
               {"beta2", ck.adam.beta2},
               {"epsilon", ck.adam.epsilon},
               {"m", params_to_json(ck.adam.m)},
               {"v", params_to_json(ck.adam.v)}}}};
  if (!ck.extra.is_null()) j["extra"] = ck.extra;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "dynrnn-checkpoint")
    throw DataError("not a dynrnn checkpoint: " + path);
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw DataError("unsupported checkpoint version in " + path);
  Checkpoint ck;
  ck.config = rnn_config_from_json(j.at("config"));
  ck.epoch = j.at("epoch").get<int>();
  ck.params = params_from_json(j.at("params"));
  const json& a = j.at("adam");
  ck.adam.step_count = a.at("step_count").get<long>();
  ck.adam.beta1 = a.at("beta1").get<double>();
  ck.adam.beta2 = a.at("beta2").get<double>();
  ck.adam.epsilon = a.at("epsilon").get<double>();
  ck.adam.m = params_from_json(a.at("m"));
  ck.adam.v = params_from_json(a.at("v"));
  if (j.contains("extra")) ck.extra = j.at("extra");
  return ck;
}

}  // namespace dynrnn
