#pragma once

#include <cstdint>
#include <vector>

#include "mvtpp/decoders.hpp"
#include "mvtpp/encoder.hpp"
#include "mvtpp/event_data.hpp"

namespace mvtpp {

// NLL in nats, split so that total == time_nll + mark_nll exactly. The time
// part collects the inter-event/log-density terms plus the survival term of
// the unobserved last interval; the mark part the categorical terms.
struct NLLBreakdown {
  double total = 0.0;
  double time_nll = 0.0;
  double mark_nll = 0.0;
  std::vector<double> per_sequence;
  std::size_t num_events = 0;
  double observed_time = 0.0;

  void accumulate(const NLLBreakdown& other);
};

struct LikelihoodOptions {
  // Monte Carlo estimate of the intensity integral instead of the closed
  // form; only meaningful for the intensity-based kinds.
  bool use_mc = false;
  int mc_samples = 20;
  std::uint64_t mc_seed = 0;
  // Identifies the sequence in the MC stream so batched and per-sequence
  // paths draw identical samples.
  std::uint64_t mc_stream = 0;
};

// Closed-form per-sequence NLL (no graph). Throws NumericalError naming the
// event index on non-finite intermediates.
NLLBreakdown sequence_nll(const Model& model, const EventSequence& seq, const LikelihoodOptions& opts = {});

// Unbiased per-mark estimate of the compensator integral over [0, dt] from
// uniform samples.
std::vector<double> mc_compensator(const Model& model, const std::vector<double>& h, double dt,
                                   int num_samples, std::uint64_t seed);

// Training loss: summed NLL over the batch as a graph node, plus the value
// breakdown. Padded positions contribute exactly zero.
struct BatchLoss {
  Var loss;
  NLLBreakdown breakdown;
};

BatchLoss batch_nll(const Model& model, const Batch& batch, const LikelihoodOptions& opts = {});

// Evaluation over a set of sequences: NLL plus mark predictions for F1.
struct SplitEval {
  NLLBreakdown nll;
  std::vector<int> true_marks;
  std::vector<int> predicted_marks;
};

SplitEval evaluate_sequences(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                             const LikelihoodOptions& opts = {}, int threads = 1);

NLLBreakdown dataset_nll(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                         const LikelihoodOptions& opts = {}, int threads = 1);

}  // namespace mvtpp
