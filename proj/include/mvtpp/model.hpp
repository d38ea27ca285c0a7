#pragma once

#include <cstdint>
#include <string>

#include "mvtpp/graph.hpp"

namespace mvtpp {

// The five decoder families. The *_dep kinds condition the inter-event time
// distribution on the candidate mark; the others factorize time and mark
// given history only.
enum class ModelKind { CP, Rmtpp, Lnm, RmtppDep, LnmDep };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

inline bool is_dependent(ModelKind k) { return k == ModelKind::RmtppDep || k == ModelKind::LnmDep; }
inline bool is_mixture(ModelKind k) { return k == ModelKind::Lnm || k == ModelKind::LnmDep; }
inline bool is_intensity(ModelKind k) { return !is_mixture(k); }

struct ModelConfig {
  ModelKind kind = ModelKind::LnmDep;
  int num_marks = 1;            // K
  int mixture_components = 64;  // C
  int hidden_size = 64;         // d_h
  int embed_size = 32;          // d_emb
  bool log_time_input = true;   // feed log(tau + 1e-8) instead of raw tau
  bool raw_mu = false;          // lift the exp() constraint on mixture locations

  void validate() const;
};

// Parameter container for one encoder+decoder pair. Parameters live in the
// ParamStore; the Vars cached here are the same leaves.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t init_seed);

  // copying would alias the underlying parameter nodes
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // encoder
  Var embedding, gru_wz, gru_uz, gru_bz, gru_wr, gru_ur, gru_br, gru_wh, gru_uh, gru_bh, h0;
  // mark softmax head (mixture kinds)
  Var mark_w, mark_b;
  // log-normal mixture heads; [d_h, C] for lnm, [d_h, K*C] mark-major for lnm_dep
  Var mix_ww, mix_bw, mix_wmu, mix_bmu, mix_ws, mix_bs;
  // exponential intensity head; slope is [1,1] for rmtpp, [1,K] for rmtpp_dep
  Var exp_w1, exp_b1, exp_slope;
  // conditional Poisson MLP
  Var cp_w1, cp_b1, cp_w2, cp_b2;

  void save_checkpoint(const std::string& path, const std::string& extra_config_json = "{}") const;
  // Reconstructs a model (kind, sizes and weights) from a checkpoint file.
  static Model load_checkpoint(const std::string& path, std::string* extra_config_json = nullptr);

 private:
  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace mvtpp
