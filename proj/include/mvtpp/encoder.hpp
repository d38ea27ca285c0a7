#pragma once

#include <vector>

#include "mvtpp/event_data.hpp"
#include "mvtpp/model.hpp"

namespace mvtpp {

// Time feature fed to the GRU; log transform is the config default.
double time_feature(const Model& model, double tau);

// Row `mark` of the embedding table.
std::vector<double> embed_mark(const Model& model, int mark);

// Input vector (time_feature, embedding); time entry first.
std::vector<double> build_input(const Model& model, double tau, int mark);

// Incremental GRU evaluation without graph bookkeeping; used by evaluation
// and sampling.
class EncoderState {
 public:
  explicit EncoderState(const Model& model);

  void reset();
  void step(double tau, int mark);
  const std::vector<double>& hidden() const { return h_; }

 private:
  const Model* model_;
  std::vector<double> h_, zr_buf_, cand_buf_, input_buf_;
};

// All N+1 history vectors of a sequence: row 0 is h0 and row i conditions
// event i+1; the last row conditions the tail interval.
Tensor encode_prefixes(const Model& model, const EventSequence& seq);

// Graph-side batched encoding. states[t] is [B, hidden] and conditions event
// t (0-based); states has max_len+1 entries.
struct BatchEncoding {
  std::vector<Var> states;
};

BatchEncoding encode_batch(const Model& model, const Batch& batch);

// Per-row hidden state at position lengths[b], i.e. the state that conditions
// the tail interval.
Var gather_tail_states(const BatchEncoding& enc, const Batch& batch);

}  // namespace mvtpp
