#include "mvtpp/event_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mvtpp/rng.hpp"
#include "json.hpp"

namespace mvtpp {

using nlohmann::json;

void EventSequence::validate(int num_marks, const std::string& label) const {
  const std::string where = label.empty() ? "sequence" : label;
  if (arrival_times.size() != marks.size())
    throw ValidationError(where + ": arrival_times and marks length mismatch (" +
                          std::to_string(arrival_times.size()) + " vs " + std::to_string(marks.size()) + ")");
  if (!(t_end >= t_start)) throw ValidationError(where + ": t_end < t_start");
  double prev = t_start;
  for (std::size_t i = 0; i < arrival_times.size(); ++i) {
    const double t = arrival_times[i];
    if (!std::isfinite(t)) throw ValidationError(where + ": non-finite time at event " + std::to_string(i));
    const bool first = i == 0;
    if (first ? t < prev : t <= prev)
      throw ValidationError(where + ": arrival times not strictly increasing at event " + std::to_string(i));
    if (t > t_end) throw ValidationError(where + ": event " + std::to_string(i) + " past t_end");
    if (marks[i] < 0 || marks[i] >= num_marks)
      throw ValidationError(where + ": mark " + std::to_string(marks[i]) + " out of range [0," +
                            std::to_string(num_marks) + ") at event " + std::to_string(i));
    prev = t;
  }
}

InterEventView to_inter_event(const EventSequence& seq) {
  InterEventView v;
  v.taus.reserve(seq.size());
  double prev = seq.t_start;
  for (double t : seq.arrival_times) {
    v.taus.push_back(t - prev);
    prev = t;
  }
  v.tail_gap = seq.t_end - prev;
  return v;
}

EventSequence from_inter_event(const InterEventView& view, const std::vector<int>& marks, double t_start,
                               double t_end) {
  EventSequence seq;
  seq.t_start = t_start;
  seq.t_end = t_end;
  seq.marks = marks;
  double t = t_start;
  for (double tau : view.taus) {
    t += tau;
    seq.arrival_times.push_back(t);
  }
  return seq;
}

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

double Dataset::total_observed_time() const {
  double t = 0.0;
  for (const auto& s : sequences) t += s.window();
  return t;
}

void Dataset::validate() const {
  if (num_marks < 1) throw ValidationError("dataset: num_marks must be >= 1");
  for (std::size_t i = 0; i < sequences.size(); ++i)
    sequences[i].validate(num_marks, "sequence " + std::to_string(i));
}

namespace {

double get_number(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_number()) throw ParseError(std::string("missing or non-numeric '") + key + "'", line);
  return j[key].get<double>();
}

}  // namespace

Dataset load_dataset(const std::string& path, double time_scale, std::optional<int> num_marks,
                     double dedup_jitter) {
  if (!(time_scale > 0.0)) throw ValidationError("load_dataset: time_scale must be positive");
  std::ifstream in(path);
  if (!in) throw ValidationError("load_dataset: cannot open '" + path + "'");

  Dataset ds;
  ds.time_scale = time_scale;
  int max_mark = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object() || !j.contains("arrival_times") || !j.contains("marks"))
      throw ParseError("expected object with 'arrival_times' and 'marks'", line_no);

    EventSequence seq;
    seq.t_start = get_number(j, "t_start", line_no) * time_scale;
    seq.t_end = get_number(j, "t_end", line_no) * time_scale;
    try {
      seq.arrival_times = j["arrival_times"].get<std::vector<double>>();
      seq.marks = j["marks"].get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid arrays: ") + e.what(), line_no);
    }
    for (double& t : seq.arrival_times) t *= time_scale;

    if (dedup_jitter > 0.0) {
      double prev = seq.t_start - dedup_jitter;
      for (double& t : seq.arrival_times) {
        if (t <= prev) t = prev + dedup_jitter;
        prev = t;
      }
      if (!seq.arrival_times.empty() && seq.arrival_times.back() > seq.t_end)
        seq.t_end = seq.arrival_times.back();
    }
    for (int m : seq.marks) max_mark = std::max(max_mark, m);
    ds.sequences.push_back(std::move(seq));
  }
  ds.num_marks = num_marks.value_or(max_mark + 1 < 1 ? 1 : max_mark + 1);

  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    try {
      ds.sequences[i].validate(ds.num_marks, "sequence " + std::to_string(i));
    } catch (const ValidationError& e) {
      throw ValidationError(std::string(e.what()) + " (use --dedup-jitter for duplicate timestamps)");
    }
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_dataset: cannot open '" + path + "' for writing");
  const double inv = 1.0 / ds.time_scale;
  out.precision(17);
  for (const auto& seq : ds.sequences) {
    json j;
    json times = json::array();
    for (double t : seq.arrival_times) times.push_back(t * inv);
    j["arrival_times"] = std::move(times);
    j["marks"] = seq.marks;
    j["t_start"] = seq.t_start * inv;
    j["t_end"] = seq.t_end * inv;
    out << j.dump() << "\n";
  }
}

SplitIndices split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                   std::uint64_t seed) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ValidationError("split: fractions must sum to 1");
  if (ds.sequences.empty()) throw ValidationError("split: dataset is empty");

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::child(seed, 0x51171);
  rng.shuffle(order);

  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));

  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_marks = ds.num_marks;
  out.time_scale = ds.time_scale;
  out.sequences.reserve(indices.size());
  for (std::size_t i : indices) out.sequences.push_back(ds.sequences.at(i));
  return out;
}

void save_split(const SplitIndices& s, const std::string& path) {
  json j;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  std::ofstream out(path);
  if (!out) throw ValidationError("save_split: cannot open '" + path + "'");
  out << j.dump() << "\n";
}

SplitIndices load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_split: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid split file: ") + e.what(), 1);
  }
  SplitIndices s;
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.val = j.at("val").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

std::vector<Batch> make_batches(const Dataset& ds, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed) {
  std::vector<std::size_t> indices(ds.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  return make_batches(ds, indices, batch_size, shuffle_seed);
}

std::vector<Batch> make_batches(const Dataset& ds, const std::vector<std::size_t>& indices,
                                std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order = indices;
  if (shuffle_seed) {
    Rng rng = Rng::child(*shuffle_seed, 0xba7c4);
    rng.shuffle(order);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    Batch b;
    b.batch_size = end - start;
    b.sequence_indices.assign(order.begin() + start, order.begin() + end);
    for (std::size_t i : b.sequence_indices) b.max_len = std::max(b.max_len, ds.sequences[i].size());

    b.padded_taus.assign(b.batch_size * b.max_len, 0.0);
    b.padded_marks.assign(b.batch_size * b.max_len, 0);
    b.lengths.resize(b.batch_size);
    b.tail_gaps.resize(b.batch_size);
    for (std::size_t r = 0; r < b.batch_size; ++r) {
      const EventSequence& seq = ds.sequences[b.sequence_indices[r]];
      const InterEventView view = to_inter_event(seq);
      b.lengths[r] = seq.size();
      b.tail_gaps[r] = view.tail_gap;
      for (std::size_t t = 0; t < seq.size(); ++t) {
        b.padded_taus[r * b.max_len + t] = view.taus[t];
        b.padded_marks[r * b.max_len + t] = seq.marks[t];
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

InterEventView unbatch_row(const Batch& batch, std::size_t b, std::vector<int>* marks_out) {
  InterEventView v;
  const std::size_t n = batch.lengths.at(b);
  v.taus.reserve(n);
  if (marks_out) marks_out->clear();
  for (std::size_t t = 0; t < n; ++t) {
    v.taus.push_back(batch.tau(b, t));
    if (marks_out) marks_out->push_back(batch.mark(b, t));
  }
  v.tail_gap = batch.tail_gaps[b];
  return v;
}

}  // namespace mvtpp
