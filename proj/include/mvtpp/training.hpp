#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvtpp/likelihood.hpp"
#include "mvtpp/model.hpp"

namespace mvtpp {

// Adam with decoupled weight decay (beta1=0.9, beta2=0.999, eps=1e-8).
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::map<std::string, Tensor> m, v;
};

// One update from the gradients currently stored in the ParamStore.
void adam_step(ParamStore& params, AdamState& state, double learning_rate, double weight_decay);

// Global gradient norm across all parameters; scales grads down to max_norm
// when exceeded. Returns the pre-clip norm.
double clip_gradients(ParamStore& params, double max_norm);

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  std::size_t batch_size = 512;
  int patience = 50;
  int max_epochs = 500;
  std::uint64_t seed = 0;
  double grad_clip = 10.0;  // <= 0 disables
  LikelihoodOptions train_likelihood;  // mc_samples default 20 when use_mc
  LikelihoodOptions eval_likelihood;
  int eval_threads = 1;

  TrainConfig() {
    train_likelihood.mc_samples = 20;
    eval_likelihood.mc_samples = 1000;
  }

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  // Merge keys present in `text` over the current values.
  void merge_json(const std::string& text);
  std::string config_hash() const;
};

struct EpochLog {
  int epoch = 0;
  double train_nll = 0.0;
  double val_nll = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  explicit TrainResult(Model m) : model(std::move(m)) {}

  Model model;  // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_nll = 0.0;
  bool diverged = false;
  int skipped_steps = 0;
  int epochs_run = 0;
};

// MLE training with per-epoch reshuffling from (seed, epoch), validation
// after each epoch, and early stopping once `patience` is exceeded. On NaN
// validation loss, training aborts and the last good parameters are kept.
TrainResult train(const TrainConfig& config, const Dataset& train_ds, const Dataset& val_ds);

}  // namespace mvtpp
