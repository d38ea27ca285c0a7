#include "mvtpp/metrics.hpp"

#include <algorithm>

#include "json.hpp"

namespace mvtpp {

using nlohmann::json;

namespace {

void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size())
    throw ValidationError("f1: length mismatch (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.empty()) throw ValidationError("f1: empty inputs");
}

}  // namespace

double micro_f1(const std::vector<int>& true_marks, const std::vector<int>& predicted_marks) {
  check_lengths(true_marks, predicted_marks);
  const int k = 1 + std::max(*std::max_element(true_marks.begin(), true_marks.end()),
                             *std::max_element(predicted_marks.begin(), predicted_marks.end()));
  std::vector<std::size_t> tp(static_cast<std::size_t>(k), 0), fp(tp), fn(tp);
  for (std::size_t i = 0; i < true_marks.size(); ++i) {
    if (true_marks[i] == predicted_marks[i]) {
      ++tp[static_cast<std::size_t>(true_marks[i])];
    } else {
      ++fp[static_cast<std::size_t>(predicted_marks[i])];
      ++fn[static_cast<std::size_t>(true_marks[i])];
    }
  }
  double tps = 0.0, fps = 0.0, fns = 0.0;
  for (int c = 0; c < k; ++c) {
    tps += static_cast<double>(tp[static_cast<std::size_t>(c)]);
    fps += static_cast<double>(fp[static_cast<std::size_t>(c)]);
    fns += static_cast<double>(fn[static_cast<std::size_t>(c)]);
  }
  const double denom = tps + 0.5 * (fps + fns);
  return denom > 0.0 ? 100.0 * tps / denom : 0.0;
}

double weighted_f1(const std::vector<int>& true_marks, const std::vector<int>& predicted_marks,
                   int num_classes) {
  check_lengths(true_marks, predicted_marks);
  std::vector<double> tp(static_cast<std::size_t>(num_classes), 0.0), fp(tp), fn(tp), support(tp);
  for (std::size_t i = 0; i < true_marks.size(); ++i) {
    const int t = true_marks[i];
    const int p = predicted_marks[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw ValidationError("weighted_f1: mark out of range");
    support[static_cast<std::size_t>(t)] += 1.0;
    if (t == p)
      tp[static_cast<std::size_t>(t)] += 1.0;
    else {
      fp[static_cast<std::size_t>(p)] += 1.0;
      fn[static_cast<std::size_t>(t)] += 1.0;
    }
  }
  double weighted = 0.0;
  const double total = static_cast<double>(true_marks.size());
  for (int c = 0; c < num_classes; ++c) {
    const double denom = tp[static_cast<std::size_t>(c)] +
                         0.5 * (fp[static_cast<std::size_t>(c)] + fn[static_cast<std::size_t>(c)]);
    const double f1 = denom > 0.0 ? tp[static_cast<std::size_t>(c)] / denom : 0.0;
    weighted += (support[static_cast<std::size_t>(c)] / total) * f1;
  }
  return 100.0 * weighted;
}

EvalReport assemble_report(const NLLBreakdown& nll, double micro, double weighted,
                           const std::string& split, const std::string& model,
                           const std::string& config_hash) {
  EvalReport r;
  r.split = split;
  r.model = model;
  r.total_nll = nll.total;
  r.time_nll = nll.time_nll;
  r.mark_nll = nll.mark_nll;
  r.observed_time = nll.observed_time;
  r.nll_per_time = nll.observed_time > 0.0 ? nll.total / nll.observed_time : 0.0;
  r.num_sequences = nll.per_sequence.size();
  r.nll_per_sequence = r.num_sequences > 0 ? nll.total / static_cast<double>(r.num_sequences) : 0.0;
  r.micro_f1 = micro;
  r.weighted_f1 = weighted;
  r.num_events = nll.num_events;
  r.config_hash = config_hash;
  return r;
}

EvalReport make_report(const SplitEval& eval, int num_classes, const std::string& split,
                       const std::string& model, const std::string& config_hash) {
  const bool any = !eval.true_marks.empty();
  return assemble_report(eval.nll, any ? micro_f1(eval.true_marks, eval.predicted_marks) : 0.0,
                         any ? weighted_f1(eval.true_marks, eval.predicted_marks, num_classes) : 0.0,
                         split, model, config_hash);
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["split"] = r.split;
  j["model"] = r.model;
  j["total_nll"] = r.total_nll;
  j["time_nll"] = r.time_nll;
  j["mark_nll"] = r.mark_nll;
  j["nll_per_time"] = r.nll_per_time;
  j["nll_per_sequence"] = r.nll_per_sequence;
  j["micro_f1"] = r.micro_f1;
  j["weighted_f1"] = r.weighted_f1;
  j["num_events"] = r.num_events;
  j["num_sequences"] = r.num_sequences;
  j["observed_time"] = r.observed_time;
  j["config_hash"] = r.config_hash;
  return j.dump();
}

EvalReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report: invalid JSON: ") + e.what());
  }
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.total_nll = j.at("total_nll").get<double>();
  r.time_nll = j.at("time_nll").get<double>();
  r.mark_nll = j.at("mark_nll").get<double>();
  r.nll_per_time = j.at("nll_per_time").get<double>();
  r.nll_per_sequence = j.at("nll_per_sequence").get<double>();
  r.micro_f1 = j.at("micro_f1").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.num_events = j.at("num_events").get<std::size_t>();
  r.num_sequences = j.at("num_sequences").get<std::size_t>();
  r.observed_time = j.at("observed_time").get<double>();
  r.config_hash = j.at("config_hash").get<std::string>();
  return r;
}

}  // namespace mvtpp
