#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mvtpp/errors.hpp"

namespace mvtpp {

// Ordered event sequence with categorical marks on an observation window.
// Marks are 0-based; arrival times are strictly increasing within
// [t_start, t_end].
struct EventSequence {
  std::vector<double> arrival_times;
  std::vector<int> marks;
  double t_start = 0.0;
  double t_end = 0.0;

  std::size_t size() const { return arrival_times.size(); }
  double window() const { return t_end - t_start; }

  // Throws ValidationError on any violated invariant; `label` names the
  // sequence in the message.
  void validate(int num_marks, const std::string& label = "") const;
};

// Inter-event representation: taus[i] = t_i - t_{i-1} with t_0 = t_start,
// plus the last unobserved interval t_end - t_N.
struct InterEventView {
  std::vector<double> taus;
  double tail_gap = 0.0;
};

InterEventView to_inter_event(const EventSequence& seq);
EventSequence from_inter_event(const InterEventView& view, const std::vector<int>& marks, double t_start,
                               double t_end);

struct Dataset {
  std::vector<EventSequence> sequences;
  int num_marks = 1;
  double time_scale = 1.0;

  std::size_t size() const { return sequences.size(); }
  std::size_t total_events() const;
  double total_observed_time() const;
  void validate() const;
};

// One JSON object per line: {"arrival_times": [...], "marks": [...],
// "t_start": ..., "t_end": ...}. Times (including the window) are multiplied
// by time_scale on load. K is inferred as 1 + max mark unless num_marks is
// given. dedup_jitter > 0 spaces out duplicate timestamps instead of
// rejecting them.
Dataset load_dataset(const std::string& path, double time_scale = 1.0,
                     std::optional<int> num_marks = std::nullopt, double dedup_jitter = 0.0);

// Inverse of load_dataset: divides times by the dataset's time_scale so a
// round-trip reproduces the original file content.
void save_dataset(const Dataset& ds, const std::string& path);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Seeded uniform shuffle, then sizes floor(f*n) for train/val with the
// remainder going to test.
SplitIndices split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed);

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

void save_split(const SplitIndices& s, const std::string& path);
SplitIndices load_split(const std::string& path);

// Zero-padded batch; positions >= lengths[b] are padding in both matrices.
struct Batch {
  std::vector<std::size_t> sequence_indices;
  std::vector<double> padded_taus;   // [B x L_max], row-major
  std::vector<int> padded_marks;     // [B x L_max]
  std::vector<std::size_t> lengths;  // B
  std::vector<double> tail_gaps;     // B
  std::size_t batch_size = 0;
  std::size_t max_len = 0;

  double tau(std::size_t b, std::size_t t) const { return padded_taus[b * max_len + t]; }
  int mark(std::size_t b, std::size_t t) const { return padded_marks[b * max_len + t]; }
};

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);
std::vector<Batch> make_batches(const Dataset& ds, const std::vector<std::size_t>& indices,
                                std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt);

// Recovers the (taus, marks, tail_gap) triple of row b.
InterEventView unbatch_row(const Batch& batch, std::size_t b, std::vector<int>* marks_out = nullptr);

}  // namespace mvtpp
