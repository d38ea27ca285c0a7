#include "mvtpp/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "mvtpp/rng.hpp"
#include "json.hpp"

namespace mvtpp {

using nlohmann::json;

void adam_step(ParamStore& params, AdamState& state, double learning_rate, double weight_decay) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (const std::string& name : params.names()) {
    Var p = params.get(name);
    Tensor& value = p.mutable_value();
    const Tensor& grad = p.grad();
    Tensor& m = state.m.try_emplace(name, value.rows, value.cols).first->second;
    Tensor& v = state.v.try_emplace(name, value.rows, value.cols).first->second;
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      const double g = grad.data[i];
      m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
      v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      value.data[i] -= learning_rate * (m_hat / (std::sqrt(v_hat) + state.epsilon) +
                                        weight_decay * value.data[i]);
    }
  }
}

double clip_gradients(ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const std::string& name : params.names())
    for (double g : params.get(name).grad().data) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const std::string& name : params.names())
      for (double& g : params.get(name).mutable_grad().data) g *= scale;
  }
  return norm;
}

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0.0)) throw ValidationError("train: learning_rate must be positive");
  if (weight_decay < 0.0) throw ValidationError("train: weight_decay must be nonnegative");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (patience < 0) throw ValidationError("train: patience must be >= 0");
  if (max_epochs < 1) throw ValidationError("train: max_epochs must be >= 1");
}

std::string TrainConfig::to_json() const {
  json j;
  j["model"] = to_string(model.kind);
  j["num_marks"] = model.num_marks;
  j["mixture_components"] = model.mixture_components;
  j["hidden_size"] = model.hidden_size;
  j["embed_size"] = model.embed_size;
  j["input_time_transform"] = model.log_time_input ? "log" : "raw";
  j["raw_mu"] = model.raw_mu;
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["batch_size"] = batch_size;
  j["patience"] = patience;
  j["max_epochs"] = max_epochs;
  j["seed"] = seed;
  j["grad_clip"] = grad_clip;
  j["train_mc"] = train_likelihood.use_mc;
  j["train_mc_samples"] = train_likelihood.mc_samples;
  j["eval_mc"] = eval_likelihood.use_mc;
  j["eval_mc_samples"] = eval_likelihood.mc_samples;
  return j.dump();
}

void TrainConfig::merge_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (j.contains("model")) model.kind = model_kind_from_string(j["model"].get<std::string>());
  if (j.contains("num_marks")) model.num_marks = j["num_marks"].get<int>();
  if (j.contains("mixture_components")) model.mixture_components = j["mixture_components"].get<int>();
  if (j.contains("hidden_size")) model.hidden_size = j["hidden_size"].get<int>();
  if (j.contains("embed_size")) model.embed_size = j["embed_size"].get<int>();
  if (j.contains("input_time_transform")) {
    const std::string v = j["input_time_transform"].get<std::string>();
    if (v != "log" && v != "raw") throw ValidationError("config: input_time_transform must be log or raw");
    model.log_time_input = v == "log";
  }
  if (j.contains("raw_mu")) model.raw_mu = j["raw_mu"].get<bool>();
  if (j.contains("learning_rate")) learning_rate = j["learning_rate"].get<double>();
  if (j.contains("weight_decay")) weight_decay = j["weight_decay"].get<double>();
  if (j.contains("batch_size")) batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("patience")) patience = j["patience"].get<int>();
  if (j.contains("max_epochs")) max_epochs = j["max_epochs"].get<int>();
  if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
  if (j.contains("grad_clip")) grad_clip = j["grad_clip"].get<double>();
  if (j.contains("train_mc")) train_likelihood.use_mc = j["train_mc"].get<bool>();
  if (j.contains("train_mc_samples")) train_likelihood.mc_samples = j["train_mc_samples"].get<int>();
  if (j.contains("eval_mc")) eval_likelihood.use_mc = j["eval_mc"].get<bool>();
  if (j.contains("eval_mc_samples")) eval_likelihood.mc_samples = j["eval_mc_samples"].get<int>();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig cfg;
  cfg.merge_json(text);
  return cfg;
}

std::string TrainConfig::config_hash() const {
  // FNV-1a over the canonical JSON dump.
  const std::string s = to_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

std::map<std::string, std::vector<double>> snapshot_params(const ParamStore& params) {
  std::map<std::string, std::vector<double>> snap;
  for (const std::string& name : params.names()) snap[name] = params.get(name).value().data;
  return snap;
}

void restore_params(ParamStore& params, const std::map<std::string, std::vector<double>>& snap) {
  for (const auto& [name, data] : snap) params.get(name).mutable_value().data = data;
}

bool grads_finite(const ParamStore& params) {
  for (const std::string& name : params.names())
    for (double g : params.get(name).grad().data)
      if (!std::isfinite(g)) return false;
  return true;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_ds, const Dataset& val_ds) {
  config.validate();
  if (train_ds.sequences.empty() || val_ds.sequences.empty())
    throw ValidationError("train: train and val splits must be non-empty");

  ModelConfig mc = config.model;
  mc.num_marks = train_ds.num_marks;
  TrainResult result(Model(mc, config.seed));
  Model& model = result.model;
  AdamState adam;

  std::vector<std::size_t> val_indices(val_ds.size());
  std::iota(val_indices.begin(), val_indices.end(), std::size_t{0});

  auto best = snapshot_params(model.params());
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int wait = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t shuffle_seed = Rng::child(config.seed, static_cast<std::uint64_t>(epoch)).next_u64();
    const std::vector<Batch> batches = make_batches(train_ds, config.batch_size, shuffle_seed);

    double train_nll = 0.0;
    for (const Batch& batch : batches) {
      model.params().zero_grad();
      BatchLoss bl = batch_nll(model, batch, config.train_likelihood);
      train_nll += bl.breakdown.total;
      if (!std::isfinite(bl.breakdown.total)) {
        ++result.skipped_steps;
        continue;
      }
      backward(bl.loss);
      clip_gradients(model.params(), config.grad_clip);
      if (!grads_finite(model.params())) {
        ++result.skipped_steps;
        continue;
      }
      adam_step(model.params(), adam, config.learning_rate, config.weight_decay);
    }

    const double val_nll =
        dataset_nll(model, val_ds, val_indices, config.eval_likelihood, config.eval_threads).total;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back({epoch, train_nll, val_nll, seconds});
    result.epochs_run = epoch;

    if (!std::isfinite(val_nll)) {
      result.diverged = true;
      break;
    }
    if (val_nll < best_val) {
      best_val = val_nll;
      best_epoch = epoch;
      best = snapshot_params(model.params());
      wait = 0;
    } else {
      ++wait;
      if (wait > config.patience) break;
    }
  }

  restore_params(model.params(), best);
  result.best_epoch = best_epoch;
  result.best_val_nll = best_val;
  return result;
}

}  // namespace mvtpp
