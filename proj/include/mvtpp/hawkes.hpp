#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvtpp/event_data.hpp"

namespace mvtpp {

// Exponential kernel convention. AlphaBeta is the textbook form
// phi_kj(t) = alpha_kj * beta_kj * exp(-beta_kj t), whose branching matrix is
// alpha itself. Alpha drops the beta prefactor (phi = alpha * exp(-beta t),
// branching alpha/beta); the reference synthetic datasets are only
// reproducible under this variant, so both are supported.
enum class HawkesKernel { AlphaBeta, Alpha };

// Multivariate Hawkes parameters for K mark types. Row k of alpha/beta is the
// receiving type, column j the exciting type.
struct HawkesParams {
  std::vector<double> mu;                     // K
  std::vector<std::vector<double>> alpha;     // K x K
  std::vector<std::vector<double>> beta;      // K x K
  HawkesKernel kernel = HawkesKernel::AlphaBeta;

  int num_marks() const { return static_cast<int>(mu.size()); }
  void validate() const;
  // Kernel integral matrix: alpha (AlphaBeta) or alpha/beta (Alpha).
  std::vector<std::vector<double>> branching() const;
  // Jump added to lambda_k when a type-j event fires.
  double jump(int k, int j) const;
};

HawkesParams hawkes_preset(const std::string& name);  // hawkes_ind | hawkes_dep1 | hawkes_dep2
std::string hawkes_params_to_json(const HawkesParams& p);
HawkesParams hawkes_params_from_json(const std::string& text);

// lambda_k(t) given the events of `history` strictly before t. t must not
// precede the last event.
std::vector<double> intensity_at(const HawkesParams& params, const EventSequence& history, double t);

double spectral_radius(const std::vector<std::vector<double>>& m);

// Solves rate = mu + branching * rate; requires spectral radius < 1.
std::vector<double> stationary_rate(const HawkesParams& params);

struct SimOptions {
  std::size_t max_events = 1000000;
};

// Exact simulation by Ogata thinning on [0, t_end]; deterministic per seed.
EventSequence simulate_hawkes(const HawkesParams& params, double t_end, std::uint64_t seed,
                              const SimOptions& options = {});

// num_seq sequences with per-sequence seeds derived from (seed, index).
Dataset simulate_hawkes_dataset(const HawkesParams& params, std::size_t num_seq, double t_end,
                                std::uint64_t seed, const SimOptions& options = {});

}  // namespace mvtpp
