#include "mvtpp/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "mvtpp/decoders.hpp"
#include "mvtpp/encoder.hpp"
#include "json.hpp"

namespace mvtpp {

namespace {

constexpr double kSlopeEps = 1e-8;

// Earliest-arrival inversion: smallest dt with Lambda_k(dt) = E_k, one
// exponential race per mark.
NextEvent sample_intensity_race(const Model& model, std::span<const double> h, Rng& rng) {
  const int k = model.config().num_marks;
  NextEvent next;
  next.tau = std::numeric_limits<double>::infinity();
  next.mark = 0;
  const bool cp = model.config().kind == ModelKind::CP;
  std::vector<double> base = cp ? cp_intensity(model, h) : rmtpp_loglinear(model, h);
  for (int j = 0; j < k; ++j) {
    const double target = rng.exponential(1.0);
    double dt;
    if (cp) {
      const double rate = base[static_cast<std::size_t>(j)];
      dt = rate > 0.0 ? target / rate : std::numeric_limits<double>::infinity();
    } else {
      const double a = base[static_cast<std::size_t>(j)];
      const double w = rmtpp_slope(model, j);
      const double g = target * std::exp(std::clamp(-a, -kExpMax, kExpMax));
      if (std::abs(w) < kSlopeEps) {
        dt = g;
      } else {
        const double arg = 1.0 + w * g;
        dt = arg > 0.0 ? std::log1p(w * g) / w : std::numeric_limits<double>::infinity();
      }
    }
    if (dt < next.tau) {
      next.tau = dt;
      next.mark = j;
    }
  }
  return next;
}

}  // namespace

NextEvent sample_next(const Model& model, std::span<const double> h, Rng& rng) {
  if (is_mixture(model.config().kind)) {
    NextEvent next;
    const std::vector<double> pmf = mark_pmf(model, h);
    next.mark = rng.categorical(pmf);
    const MixtureParams mix = lnm_head_for_mark(model, h, next.mark);
    std::vector<double> w(mix.log_w.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(mix.log_w[c]);
    const int c = rng.categorical(w);
    next.tau = std::exp(rng.normal(mix.mu[static_cast<std::size_t>(c)], mix.s[static_cast<std::size_t>(c)]));
    return next;
  }
  return sample_intensity_race(model, h, rng);
}

NextEvent sample_next(const Model& model, std::span<const double> h, std::uint64_t seed) {
  Rng rng(seed);
  return sample_next(model, h, rng);
}

EventSequence sample_sequence(const Model& model, double t_end, std::uint64_t seed,
                              const SampleOptions& options) {
  if (!(t_end > 0.0)) throw ValidationError("sample_sequence: t_end must be positive");
  Rng rng(seed);
  EncoderState state(model);
  EventSequence seq;
  seq.t_start = 0.0;
  seq.t_end = t_end;
  double t = 0.0;
  while (true) {
    const NextEvent next = sample_next(model, state.hidden(), rng);
    double arrival = t + next.tau;
    if (!(arrival < t_end)) break;
    if (arrival <= t) arrival = std::nextafter(t, std::numeric_limits<double>::infinity());
    seq.arrival_times.push_back(arrival);
    seq.marks.push_back(next.mark);
    if (seq.arrival_times.size() > options.max_events)
      throw NumericalError("sample_sequence: event count exceeded cap " +
                           std::to_string(options.max_events));
    state.step(arrival - t, next.mark);
    t = arrival;
  }
  return seq;
}

Dataset sample_dataset(const Model& model, std::size_t num_seq, double t_end, std::uint64_t seed,
                       const SampleOptions& options) {
  Dataset ds;
  ds.num_marks = model.config().num_marks;
  ds.sequences.resize(num_seq);
  for (std::size_t i = 0; i < num_seq; ++i)
    ds.sequences[i] = sample_sequence(model, t_end, Rng::child(seed, i).next_u64(), options);
  return ds;
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi, std::size_t bins) {
  Histogram h;
  if (bins == 0 || !(hi > lo)) {
    h.bin_edges = {lo, hi};
    h.counts = {values.size()};
    return h;
  }
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i)
    h.bin_edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

namespace {

void collect_stats(const Dataset& ds, int num_marks, std::vector<double>* lengths,
                   std::vector<double>* arrivals, std::vector<double>* mark_freq) {
  mark_freq->assign(static_cast<std::size_t>(num_marks), 0.0);
  double total_marks = 0.0;
  for (const auto& seq : ds.sequences) {
    lengths->push_back(static_cast<double>(seq.size()));
    for (double t : seq.arrival_times) arrivals->push_back(t);
    for (int m : seq.marks) {
      (*mark_freq)[static_cast<std::size_t>(m)] += 1.0;
      total_marks += 1.0;
    }
  }
  if (total_marks > 0.0)
    for (double& f : *mark_freq) f /= total_marks;
}

nlohmann::json histogram_to_json(const Histogram& h) {
  return {{"bin_edges", h.bin_edges}, {"counts", h.counts}};
}

}  // namespace

SamplingReport sampling_report(const Dataset& real, const Dataset& generated) {
  if (generated.sequences.empty()) throw ValidationError("sampling_report: no samples");
  if (real.num_marks != generated.num_marks)
    throw ValidationError("sampling_report: mark count mismatch between real and generated data");

  SamplingReport rep;
  std::vector<double> real_lengths, real_arrivals, gen_lengths, gen_arrivals;
  collect_stats(real, real.num_marks, &real_lengths, &real_arrivals, &rep.real_mark_freq);
  collect_stats(generated, generated.num_marks, &gen_lengths, &gen_arrivals, &rep.generated_mark_freq);

  double max_len = 1.0;
  for (double v : real_lengths) max_len = std::max(max_len, v);
  for (double v : gen_lengths) max_len = std::max(max_len, v);
  double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
  for (const auto& ds : {&real, &generated})
    for (const auto& seq : ds->sequences) {
      t_lo = std::min(t_lo, seq.t_start);
      t_hi = std::max(t_hi, seq.t_end);
    }
  if (!std::isfinite(t_lo)) t_lo = 0.0;
  if (!std::isfinite(t_hi)) t_hi = 1.0;

  rep.real_lengths = make_histogram(real_lengths, 0.0, max_len, 20);
  rep.generated_lengths = make_histogram(gen_lengths, 0.0, max_len, 20);
  rep.real_arrivals = make_histogram(real_arrivals, t_lo, t_hi, 20);
  rep.generated_arrivals = make_histogram(gen_arrivals, t_lo, t_hi, 20);

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  rep.real_mean_length = mean(real_lengths);
  rep.generated_mean_length = mean(gen_lengths);
  rep.mean_length_ratio =
      rep.real_mean_length > 0.0 ? rep.generated_mean_length / rep.real_mean_length : 0.0;
  rep.mark_freq_l1 = 0.0;
  for (std::size_t k = 0; k < rep.real_mark_freq.size(); ++k)
    rep.mark_freq_l1 += std::abs(rep.real_mark_freq[k] - rep.generated_mark_freq[k]);
  return rep;
}

std::string sampling_report_to_json(const SamplingReport& report) {
  nlohmann::json j;
  j["sequence_lengths"] = {{"real", histogram_to_json(report.real_lengths)},
                           {"generated", histogram_to_json(report.generated_lengths)}};
  j["arrival_times"] = {{"real", histogram_to_json(report.real_arrivals)},
                        {"generated", histogram_to_json(report.generated_arrivals)}};
  j["mark_frequencies"] = {{"real", report.real_mark_freq}, {"generated", report.generated_mark_freq}};
  j["real_mean_length"] = report.real_mean_length;
  j["generated_mean_length"] = report.generated_mean_length;
  j["mean_length_ratio"] = report.mean_length_ratio;
  j["mark_freq_l1"] = report.mark_freq_l1;
  return j.dump();
}

}  // namespace mvtpp
