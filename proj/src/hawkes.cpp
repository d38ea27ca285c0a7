#include "mvtpp/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvtpp/rng.hpp"
#include "json.hpp"

namespace mvtpp {

using nlohmann::json;

void HawkesParams::validate() const {
  const std::size_t k = mu.size();
  if (k == 0) throw ValidationError("hawkes: mu is empty");
  auto check_matrix = [&](const std::vector<std::vector<double>>& m, const char* name) {
    if (m.size() != k) throw ValidationError(std::string("hawkes: ") + name + " must be KxK");
    for (const auto& row : m)
      if (row.size() != k) throw ValidationError(std::string("hawkes: ") + name + " must be KxK");
  };
  check_matrix(alpha, "alpha");
  check_matrix(beta, "beta");
  for (double m : mu)
    if (m < 0.0) throw ValidationError("hawkes: mu must be nonnegative");
  for (const auto& row : alpha)
    for (double a : row)
      if (a < 0.0) throw ValidationError("hawkes: alpha must be nonnegative");
  for (const auto& row : beta)
    for (double b : row)
      if (!(b > 0.0)) throw ValidationError("hawkes: beta must be positive");
}

std::vector<std::vector<double>> HawkesParams::branching() const {
  std::vector<std::vector<double>> b = alpha;
  if (kernel == HawkesKernel::Alpha)
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) b[i][j] /= beta[i][j];
  return b;
}

double HawkesParams::jump(int k, int j) const {
  return kernel == HawkesKernel::AlphaBeta ? alpha[k][j] * beta[k][j] : alpha[k][j];
}

HawkesParams hawkes_preset(const std::string& name) {
  HawkesParams p;
  if (name == "hawkes_ind") {
    p.mu = {0.1, 0.05};
    p.alpha = {{0.2, 0.0}, {0.0, 0.4}};
    p.beta = {{1.0, 1.0}, {1.0, 2.0}};
  } else if (name == "hawkes_dep1") {
    p.mu = {0.1, 0.05};
    p.alpha = {{0.2, 0.1}, {0.2, 0.3}};
    p.beta = {{1.0, 1.0}, {1.0, 1.0}};
  } else if (name == "hawkes_dep2") {
    p.mu = {0.713, 0.057, 0.844, 0.254, 0.344};
    p.alpha = {{0.689, 0.549, 0.066, 0.819, 0.007},
               {0.630, 0.000, 0.457, 0.622, 0.141},
               {0.134, 0.579, 0.821, 0.527, 0.795},
               {0.199, 0.556, 0.147, 0.030, 0.649},
               {0.353, 0.557, 0.892, 0.638, 0.836}};
    p.beta = {{9.325, 9.764, 2.581, 4.007, 9.319},
              {5.759, 8.742, 4.741, 7.320, 9.768},
              {2.841, 4.349, 6.920, 5.640, 3.839},
              {6.710, 7.460, 3.685, 4.052, 6.813},
              {2.486, 2.214, 8.718, 4.594, 2.642}};
  } else {
    throw ValidationError("unknown Hawkes preset '" + name +
                          "' (expected hawkes_ind, hawkes_dep1 or hawkes_dep2)");
  }
  return p;
}

std::string hawkes_params_to_json(const HawkesParams& p) {
  json j;
  j["mu"] = p.mu;
  j["alpha"] = p.alpha;
  j["beta"] = p.beta;
  j["kernel"] = p.kernel == HawkesKernel::AlphaBeta ? "alpha-beta" : "alpha";
  return j.dump();
}

HawkesParams hawkes_params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hawkes params: invalid JSON: ") + e.what());
  }
  HawkesParams p;
  p.mu = j.at("mu").get<std::vector<double>>();
  p.alpha = j.at("alpha").get<std::vector<std::vector<double>>>();
  p.beta = j.at("beta").get<std::vector<std::vector<double>>>();
  if (j.contains("kernel")) {
    const std::string k = j["kernel"].get<std::string>();
    if (k == "alpha-beta")
      p.kernel = HawkesKernel::AlphaBeta;
    else if (k == "alpha")
      p.kernel = HawkesKernel::Alpha;
    else
      throw ValidationError("hawkes params: unknown kernel '" + k + "'");
  }
  p.validate();
  return p;
}

std::vector<double> intensity_at(const HawkesParams& params, const EventSequence& history, double t) {
  const int k = params.num_marks();
  if (!history.arrival_times.empty() && t < history.arrival_times.back())
    throw ValidationError("intensity_at: t precedes the last event in history");
  std::vector<double> lambda = params.mu;
  for (std::size_t i = 0; i < history.arrival_times.size(); ++i) {
    const double dt = t - history.arrival_times[i];
    const int j = history.marks[i];
    if (dt < 0.0) break;
    for (int r = 0; r < k; ++r) lambda[r] += params.jump(r, j) * std::exp(-params.beta[r][j] * dt);
  }
  return lambda;
}

double spectral_radius(const std::vector<std::vector<double>>& m) {
  const std::size_t n = m.size();
  if (n == 0) return 0.0;
  std::vector<double> v(n, 1.0), w(n, 0.0);
  double radius = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += m[i][j] * v[j];
      w[i] = s;
    }
    const double norm = *std::max_element(w.begin(), w.end(),
                                          [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (std::abs(norm) < 1e-300) return 0.0;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (std::abs(std::abs(norm) - radius) < 1e-12) return std::abs(norm);
    radius = std::abs(norm);
  }
  return radius;
}

namespace {

// Gaussian elimination with partial pivoting; sizes here are tiny.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-14) throw NumericalError("stationary_rate: singular system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

std::vector<double> stationary_rate(const HawkesParams& params) {
  params.validate();
  const auto b = params.branching();
  const double rho = spectral_radius(b);
  if (rho >= 1.0)
    throw NumericalError("stationary_rate: branching spectral radius " + std::to_string(rho) +
                         " >= 1, process is non-stationary");
  const int k = params.num_marks();
  std::vector<std::vector<double>> a(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - b[i][j];
  return solve_linear(std::move(a), params.mu);
}

EventSequence simulate_hawkes(const HawkesParams& params, double t_end, std::uint64_t seed,
                              const SimOptions& options) {
  params.validate();
  if (!(t_end > 0.0)) throw ValidationError("simulate: t_end must be positive");
  const double rho = spectral_radius(params.branching());

  const int k = params.num_marks();
  Rng rng(seed);
  EventSequence seq;
  seq.t_start = 0.0;
  seq.t_end = t_end;

  // excitation[r][j]: contribution to lambda_r from past type-j events,
  // maintained recursively at the current time.
  std::vector<std::vector<double>> excitation(k, std::vector<double>(k, 0.0));
  std::vector<double> lambda(k, 0.0);
  double t = 0.0;

  auto advance = [&](double dt) {
    for (int r = 0; r < k; ++r)
      for (int j = 0; j < k; ++j) excitation[r][j] *= std::exp(-params.beta[r][j] * dt);
  };
  auto total_intensity = [&]() {
    double total = 0.0;
    for (int r = 0; r < k; ++r) {
      lambda[r] = params.mu[r];
      for (int j = 0; j < k; ++j) lambda[r] += excitation[r][j];
      total += lambda[r];
    }
    return total;
  };

  while (true) {
    const double bound = total_intensity();
    if (bound <= 0.0) break;
    const double dt = rng.exponential(bound);
    if (!(t + dt < t_end)) break;
    t += dt;
    advance(dt);
    const double u = rng.uniform() * bound;
    const double current = total_intensity();
    if (u < current) {
      // accepted; pick the component whose cumulative intensity covers u
      int mark = k - 1;
      double acc = 0.0;
      for (int r = 0; r < k; ++r) {
        acc += lambda[r];
        if (u < acc) {
          mark = r;
          break;
        }
      }
      seq.arrival_times.push_back(t);
      seq.marks.push_back(mark);
      for (int r = 0; r < k; ++r) excitation[r][mark] += params.jump(r, mark);
      if (seq.arrival_times.size() > options.max_events)
        throw NumericalError("simulate: event count exceeded cap " + std::to_string(options.max_events) +
                             " before t=" + std::to_string(t) + " (branching spectral radius " +
                             std::to_string(rho) + "); raise --max-events or check parameters");
    }
  }
  return seq;
}

Dataset simulate_hawkes_dataset(const HawkesParams& params, std::size_t num_seq, double t_end,
                                std::uint64_t seed, const SimOptions& options) {
  Dataset ds;
  ds.num_marks = params.num_marks();
  ds.sequences.resize(num_seq);
  for (std::size_t i = 0; i < num_seq; ++i)
    ds.sequences[i] = simulate_hawkes(params, t_end, Rng::child(seed, i).next_u64(), options);
  return ds;
}

}  // namespace mvtpp
