#pragma once

#include <string>
#include <vector>

#include "mvtpp/likelihood.hpp"

namespace mvtpp {

// Micro-averaged F1 in percent; equal to accuracy for single-label
// multiclass prediction.
double micro_f1(const std::vector<int>& true_marks, const std::vector<int>& predicted_marks);

// Support-weighted mean of per-class F1 in percent. A class with zero
// denominator contributes F1 = 0.
double weighted_f1(const std::vector<int>& true_marks, const std::vector<int>& predicted_marks,
                   int num_classes);

struct EvalReport {
  std::string split;
  std::string model;
  double total_nll = 0.0;
  double time_nll = 0.0;
  double mark_nll = 0.0;
  double nll_per_time = 0.0;
  double nll_per_sequence = 0.0;
  double micro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::size_t num_events = 0;
  std::size_t num_sequences = 0;
  double observed_time = 0.0;
  std::string config_hash;
};

EvalReport assemble_report(const NLLBreakdown& nll, double micro, double weighted,
                           const std::string& split, const std::string& model,
                           const std::string& config_hash);

EvalReport make_report(const SplitEval& eval, int num_classes, const std::string& split,
                       const std::string& model, const std::string& config_hash);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace mvtpp
