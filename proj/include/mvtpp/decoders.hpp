#pragma once

#include <span>
#include <vector>

#include "mvtpp/errors.hpp"
#include "mvtpp/model.hpp"

namespace mvtpp {

// One log-normal mixture: log weights (normalized), locations and scales.
struct MixtureParams {
  std::vector<double> log_w, mu, s;
  int components() const { return static_cast<int>(log_w.size()); }
};

// log softmax in place; returns the logsumexp that normalized it.
double log_softmax_inplace(std::vector<double>& logits);

// Mark softmax head p(m=k|h) for kinds that carry one (mixture kinds). For
// intensity kinds the pmf implied by the intensities at dt=0 is returned,
// which is the exact factorized pmf for the conditionally independent kinds.
std::vector<double> mark_logits(const Model& model, std::span<const double> h);
std::vector<double> mark_pmf(const Model& model, std::span<const double> h);

// Mixture heads. The dependent decoder has one affine head per mark.
MixtureParams lnm_heads(const Model& model, std::span<const double> h);
MixtureParams lnm_head_for_mark(const Model& model, std::span<const double> h, int mark);
std::vector<MixtureParams> proposed_lnm_heads(const Model& model, std::span<const double> h);

double lnm_log_pdf(double tau, const MixtureParams& mix);
double lnm_pdf(double tau, const MixtureParams& mix);
double lnm_log_survival(double tau, const MixtureParams& mix);
// Raw-parameter forms; w need not be normalized.
double lnm_pdf(double tau, std::span<const double> w, std::span<const double> mu, std::span<const double> s);
double lnm_log_survival(double tau, std::span<const double> w, std::span<const double> mu,
                        std::span<const double> s);

// Exponential intensity decoder: lambda_k(dt) = exp(a_k + slope_k * dt) with
// a = W1^T h + b1 and a shared slope for the independent variant.
std::vector<double> rmtpp_loglinear(const Model& model, std::span<const double> h);
double rmtpp_slope(const Model& model, int mark);
std::vector<double> rmtpp_intensity(const Model& model, std::span<const double> h, double dt);
std::vector<double> rmtpp_compensator(const Model& model, std::span<const double> h, double dt);

// Constant positive rates from the CP MLP.
std::vector<double> cp_intensity(const Model& model, std::span<const double> h);

// Per-mark intensity/compensator under any intensity kind.
std::vector<double> intensity_vector(const Model& model, std::span<const double> h, double dt);
std::vector<double> compensator_vector(const Model& model, std::span<const double> h, double dt);

// Joint next-event density f(tau, m=k | h) for every k; the quantity behind
// both prediction rules and the normalization checks.
std::vector<double> joint_density(const Model& model, std::span<const double> h, double tau);

// Probability of no event within dt of the last one.
double log_survival_prob(const Model& model, std::span<const double> h, double dt);

// Independent kinds: argmax_k p(m=k). Dependent kinds: argmax_k of the joint
// density at the observed inter-event time. Ties break toward smaller k.
int predict_mark(const Model& model, std::span<const double> h, double tau_observed);

// Scalar core of the exponential-intensity compensator e^a * (e^{w dt}-1)/w
// with a series branch near w=0; partials match the clamped forward exactly.
double exp_compensator_value(double a, double w, double dt);
void exp_compensator_partials(double a, double w, double dt, double* d_a, double* d_w);

}  // namespace mvtpp
