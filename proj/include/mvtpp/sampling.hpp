#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvtpp/event_data.hpp"
#include "mvtpp/model.hpp"
#include "mvtpp/rng.hpp"

namespace mvtpp {

struct NextEvent {
  double tau = 0.0;
  int mark = 0;
};

// Closed-form draw of the next event given the current history vector.
// Mixture kinds sample the mark first, then the selected mixture; intensity
// kinds run the per-mark competing-risks inversion of the closed-form
// compensator and take the earliest arrival.
NextEvent sample_next(const Model& model, std::span<const double> h, Rng& rng);
NextEvent sample_next(const Model& model, std::span<const double> h, std::uint64_t seed);

struct SampleOptions {
  std::size_t max_events = 1000000;
};

// Autoregressive rollout on [0, t_end]; the final overshooting draw is
// discarded. Deterministic per seed.
EventSequence sample_sequence(const Model& model, double t_end, std::uint64_t seed,
                              const SampleOptions& options = {});

Dataset sample_dataset(const Model& model, std::size_t num_seq, double t_end, std::uint64_t seed,
                       const SampleOptions& options = {});

struct Histogram {
  std::vector<double> bin_edges;  // size bins+1
  std::vector<std::size_t> counts;
};

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins);

// Summary statistics comparing generated sequences against a reference
// split: length histograms, empirical mark frequencies, arrival-time
// histograms and the generated/real mean-length ratio.
struct SamplingReport {
  Histogram real_lengths, generated_lengths;
  Histogram real_arrivals, generated_arrivals;
  std::vector<double> real_mark_freq, generated_mark_freq;
  double real_mean_length = 0.0;
  double generated_mean_length = 0.0;
  double mean_length_ratio = 0.0;
  double mark_freq_l1 = 0.0;
};

SamplingReport sampling_report(const Dataset& real, const Dataset& generated);
std::string sampling_report_to_json(const SamplingReport& report);

}  // namespace mvtpp
