#include "mvtpp/decoders.hpp"

#include <algorithm>
#include <cmath>

#include "mvtpp/errors.hpp"

namespace mvtpp {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;
constexpr double kSlopeEps = 1e-8;

std::vector<double> affine(std::span<const double> x, const Tensor& w, const Tensor& b) {
  std::vector<double> out(b.data.begin(), b.data.end());
  for (std::int64_t i = 0; i < w.rows; ++i) {
    const double xv = x[static_cast<std::size_t>(i)];
    if (xv == 0.0) continue;
    const double* wrow = w.data.data() + i * w.cols;
    for (std::int64_t j = 0; j < w.cols; ++j) out[static_cast<std::size_t>(j)] += xv * wrow[j];
  }
  return out;
}

// Affine restricted to output columns [lo, hi).
std::vector<double> affine_cols(std::span<const double> x, const Tensor& w, const Tensor& b,
                                std::int64_t lo, std::int64_t hi) {
  std::vector<double> out(b.data.begin() + lo, b.data.begin() + hi);
  const std::int64_t n = hi - lo;
  for (std::int64_t i = 0; i < w.rows; ++i) {
    const double xv = x[static_cast<std::size_t>(i)];
    if (xv == 0.0) continue;
    const double* wrow = w.data.data() + i * w.cols + lo;
    for (std::int64_t j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] += xv * wrow[j];
  }
  return out;
}

double clamped_exp(double x) { return std::exp(std::min(x, kExpMax)); }

MixtureParams finish_mixture(const Model& model, std::vector<double> w_logits, std::vector<double> mu_lin,
                             std::vector<double> s_lin) {
  MixtureParams mix;
  log_softmax_inplace(w_logits);
  mix.log_w = std::move(w_logits);
  if (!model.config().raw_mu)
    for (double& v : mu_lin) v = clamped_exp(v);
  mix.mu = std::move(mu_lin);
  for (double& v : s_lin) v = clamped_exp(v);
  mix.s = std::move(s_lin);
  return mix;
}

int argmax_small_tie(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

}  // namespace

double log_softmax_inplace(std::vector<double>& logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) m = std::max(m, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  const double lse = m + std::log(s);
  for (double& v : logits) v -= lse;
  return lse;
}

std::vector<double> mark_logits(const Model& model, std::span<const double> h) {
  switch (model.config().kind) {
    case ModelKind::Lnm:
    case ModelKind::LnmDep:
      return affine(h, model.mark_w.value(), model.mark_b.value());
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep:
      return rmtpp_loglinear(model, h);
    case ModelKind::CP: {
      std::vector<double> rates = cp_intensity(model, h);
      for (double& r : rates) r = guarded_log(r);
      return rates;
    }
  }
  throw ValidationError("mark_logits: unknown kind");
}

std::vector<double> mark_pmf(const Model& model, std::span<const double> h) {
  std::vector<double> logits = mark_logits(model, h);
  log_softmax_inplace(logits);
  for (double& v : logits) v = std::exp(v);
  return logits;
}

MixtureParams lnm_heads(const Model& model, std::span<const double> h) {
  return finish_mixture(model, affine(h, model.mix_ww.value(), model.mix_bw.value()),
                        affine(h, model.mix_wmu.value(), model.mix_bmu.value()),
                        affine(h, model.mix_ws.value(), model.mix_bs.value()));
}

MixtureParams lnm_head_for_mark(const Model& model, std::span<const double> h, int mark) {
  if (model.config().kind == ModelKind::Lnm) return lnm_heads(model, h);
  const std::int64_t c = model.config().mixture_components;
  const std::int64_t lo = static_cast<std::int64_t>(mark) * c;
  return finish_mixture(model, affine_cols(h, model.mix_ww.value(), model.mix_bw.value(), lo, lo + c),
                        affine_cols(h, model.mix_wmu.value(), model.mix_bmu.value(), lo, lo + c),
                        affine_cols(h, model.mix_ws.value(), model.mix_bs.value(), lo, lo + c));
}

std::vector<MixtureParams> proposed_lnm_heads(const Model& model, std::span<const double> h) {
  std::vector<MixtureParams> heads;
  heads.reserve(static_cast<std::size_t>(model.config().num_marks));
  for (int k = 0; k < model.config().num_marks; ++k) heads.push_back(lnm_head_for_mark(model, h, k));
  return heads;
}

double lnm_log_pdf(double tau, const MixtureParams& mix) {
  if (!(tau > 0.0)) throw ValidationError("lnm_pdf: tau must be positive");
  const double log_tau = guarded_log(tau);
  double best = -std::numeric_limits<double>::infinity();
  const int c = mix.components();
  std::vector<double> terms(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    const double s = mix.s[static_cast<std::size_t>(i)];
    const double z = (log_tau - mix.mu[static_cast<std::size_t>(i)]) / s;
    terms[static_cast<std::size_t>(i)] =
        mix.log_w[static_cast<std::size_t>(i)] - log_tau - std::log(s) - kHalfLog2Pi - 0.5 * z * z;
    best = std::max(best, terms[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(best)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  return best + std::log(acc);
}

double lnm_pdf(double tau, const MixtureParams& mix) { return std::exp(lnm_log_pdf(tau, mix)); }

double lnm_log_survival(double tau, const MixtureParams& mix) {
  if (tau < 0.0) throw ValidationError("lnm_log_survival: tau must be nonnegative");
  if (tau == 0.0) return 0.0;  // no mass below tau = 0
  const double log_tau = guarded_log(tau);
  const int c = mix.components();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    const double z = (log_tau - mix.mu[static_cast<std::size_t>(i)]) / mix.s[static_cast<std::size_t>(i)];
    terms[static_cast<std::size_t>(i)] = mix.log_w[static_cast<std::size_t>(i)] + normal_log_sf_scalar(z);
    best = std::max(best, terms[static_cast<std::size_t>(i)]);
  }
  if (!std::isfinite(best)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - best);
  // survival is a probability; clamp tiny positive rounding overshoot
  return std::min(best + std::log(acc), 0.0);
}

namespace {
MixtureParams raw_mixture(std::span<const double> w, std::span<const double> mu, std::span<const double> s) {
  MixtureParams mix;
  mix.log_w.assign(w.begin(), w.end());
  for (double& v : mix.log_w) v = guarded_log(v);
  log_softmax_inplace(mix.log_w);
  mix.mu.assign(mu.begin(), mu.end());
  mix.s.assign(s.begin(), s.end());
  return mix;
}
}  // namespace

double lnm_pdf(double tau, std::span<const double> w, std::span<const double> mu, std::span<const double> s) {
  return lnm_pdf(tau, raw_mixture(w, mu, s));
}

double lnm_log_survival(double tau, std::span<const double> w, std::span<const double> mu,
                        std::span<const double> s) {
  return lnm_log_survival(tau, raw_mixture(w, mu, s));
}

std::vector<double> rmtpp_loglinear(const Model& model, std::span<const double> h) {
  return affine(h, model.exp_w1.value(), model.exp_b1.value());
}

double rmtpp_slope(const Model& model, int mark) {
  const Tensor& slope = model.exp_slope.value();
  return slope.cols == 1 ? slope.data[0] : slope.data[static_cast<std::size_t>(mark)];
}

std::vector<double> rmtpp_intensity(const Model& model, std::span<const double> h, double dt) {
  std::vector<double> a = rmtpp_loglinear(model, h);
  for (std::size_t k = 0; k < a.size(); ++k)
    a[k] = clamped_exp(a[k] + rmtpp_slope(model, static_cast<int>(k)) * dt);
  return a;
}

double exp_compensator_value(double a, double w, double dt) {
  if (dt <= 0.0) return 0.0;
  const double wdt = w * dt;
  double log_g;
  if (std::abs(w) < kSlopeEps)
    log_g = std::log(dt * (1.0 + 0.5 * wdt));
  else if (wdt > 30.0)
    log_g = wdt - std::log(w);
  else
    log_g = std::log(std::expm1(wdt) / w);
  return clamped_exp(a + log_g);
}

void exp_compensator_partials(double a, double w, double dt, double* d_a, double* d_w) {
  if (dt <= 0.0) {
    *d_a = 0.0;
    *d_w = 0.0;
    return;
  }
  const double value = exp_compensator_value(a, w, dt);
  const double wdt = w * dt;
  double log_g;
  double dlog_g_dw;
  if (std::abs(w) < kSlopeEps) {
    log_g = std::log(dt * (1.0 + 0.5 * wdt));
    dlog_g_dw = (0.5 * dt) / (1.0 + 0.5 * wdt);
  } else if (wdt > 30.0) {
    log_g = wdt - std::log(w);
    dlog_g_dw = dt - 1.0 / w;
  } else {
    const double g = std::expm1(wdt) / w;
    log_g = std::log(g);
    dlog_g_dw = (dt * std::exp(wdt) - g) / (w * g);
  }
  const bool clamped = a + log_g >= kExpMax;
  *d_a = clamped ? 0.0 : value;
  *d_w = clamped ? 0.0 : value * dlog_g_dw;
}

std::vector<double> rmtpp_compensator(const Model& model, std::span<const double> h, double dt) {
  std::vector<double> a = rmtpp_loglinear(model, h);
  for (std::size_t k = 0; k < a.size(); ++k)
    a[k] = exp_compensator_value(a[k], rmtpp_slope(model, static_cast<int>(k)), dt);
  return a;
}

std::vector<double> cp_intensity(const Model& model, std::span<const double> h) {
  std::vector<double> u = affine(h, model.cp_w1.value(), model.cp_b1.value());
  for (double& v : u) v = std::tanh(v);
  std::vector<double> rates = affine(u, model.cp_w2.value(), model.cp_b2.value());
  for (double& v : rates) v = stable_softplus(v);
  return rates;
}

std::vector<double> intensity_vector(const Model& model, std::span<const double> h, double dt) {
  switch (model.config().kind) {
    case ModelKind::CP:
      return cp_intensity(model, h);
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep:
      return rmtpp_intensity(model, h, dt);
    default:
      throw ValidationError("intensity_vector: not an intensity-based kind");
  }
}

std::vector<double> compensator_vector(const Model& model, std::span<const double> h, double dt) {
  switch (model.config().kind) {
    case ModelKind::CP: {
      std::vector<double> rates = cp_intensity(model, h);
      for (double& r : rates) r *= std::max(dt, 0.0);
      return rates;
    }
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep:
      return rmtpp_compensator(model, h, dt);
    default:
      throw ValidationError("compensator_vector: not an intensity-based kind");
  }
}

std::vector<double> joint_density(const Model& model, std::span<const double> h, double tau) {
  const int k = model.config().num_marks;
  std::vector<double> out(static_cast<std::size_t>(k));
  switch (model.config().kind) {
    case ModelKind::Lnm: {
      std::vector<double> pmf = mark_pmf(model, h);
      const double f = lnm_pdf(tau, lnm_heads(model, h));
      for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = f * pmf[static_cast<std::size_t>(i)];
      return out;
    }
    case ModelKind::LnmDep: {
      std::vector<double> pmf = mark_pmf(model, h);
      for (int i = 0; i < k; ++i)
        out[static_cast<std::size_t>(i)] =
            pmf[static_cast<std::size_t>(i)] * lnm_pdf(tau, lnm_head_for_mark(model, h, i));
      return out;
    }
    case ModelKind::CP:
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep: {
      const std::vector<double> lambda = intensity_vector(model, h, tau);
      const std::vector<double> comp = compensator_vector(model, h, tau);
      double total_comp = 0.0;
      for (double c : comp) total_comp += c;
      const double surv = std::exp(std::max(-total_comp, -kExpMax));
      for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = lambda[static_cast<std::size_t>(i)] * surv;
      return out;
    }
  }
  throw ValidationError("joint_density: unknown kind");
}

double log_survival_prob(const Model& model, std::span<const double> h, double dt) {
  if (dt <= 0.0) return 0.0;
  switch (model.config().kind) {
    case ModelKind::Lnm:
      return lnm_log_survival(dt, lnm_heads(model, h));
    case ModelKind::LnmDep: {
      std::vector<double> logits = mark_logits(model, h);
      log_softmax_inplace(logits);
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < model.config().num_marks; ++i) {
        logits[static_cast<std::size_t>(i)] += lnm_log_survival(dt, lnm_head_for_mark(model, h, i));
        best = std::max(best, logits[static_cast<std::size_t>(i)]);
      }
      double acc = 0.0;
      for (double v : logits) acc += std::exp(v - best);
      return std::min(best + std::log(acc), 0.0);
    }
    default: {
      const std::vector<double> comp = compensator_vector(model, h, dt);
      double total = 0.0;
      for (double c : comp) total += c;
      return -total;
    }
  }
}

int predict_mark(const Model& model, std::span<const double> h, double tau_observed) {
  if (is_dependent(model.config().kind)) {
    if (!(tau_observed > 0.0)) throw ValidationError("predict_mark: dependent kinds need tau > 0");
    if (model.config().kind == ModelKind::RmtppDep) {
      // argmax of the joint reduces to the per-mark log intensity at tau
      std::vector<double> a = rmtpp_loglinear(model, h);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += rmtpp_slope(model, static_cast<int>(i)) * tau_observed;
      return argmax_small_tie(a);
    }
    std::vector<double> score = mark_logits(model, h);
    log_softmax_inplace(score);
    for (int i = 0; i < model.config().num_marks; ++i)
      score[static_cast<std::size_t>(i)] += lnm_log_pdf(tau_observed, lnm_head_for_mark(model, h, i));
    return argmax_small_tie(score);
  }
  return argmax_small_tie(mark_logits(model, h));
}

}  // namespace mvtpp
