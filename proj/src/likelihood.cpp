#include "mvtpp/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mvtpp/rng.hpp"

namespace mvtpp {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;

double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

Rng event_mc_rng(const LikelihoodOptions& opts, std::size_t event_index) {
  return Rng::child(opts.mc_seed + 0x7c0ffee + opts.mc_stream * 0x9E3779B97F4A7C15ull, event_index);
}

std::vector<double> mc_compensator_rng(const Model& model, std::span<const double> h, double dt,
                                       int num_samples, Rng& rng) {
  const int k = model.config().num_marks;
  std::vector<double> acc(static_cast<std::size_t>(k), 0.0);
  if (dt <= 0.0 || num_samples < 1) return acc;
  for (int s = 0; s < num_samples; ++s) {
    const double u = rng.uniform() * dt;
    const std::vector<double> lambda = intensity_vector(model, h, u);
    for (int j = 0; j < k; ++j) acc[static_cast<std::size_t>(j)] += lambda[static_cast<std::size_t>(j)];
  }
  const double scale = dt / static_cast<double>(num_samples);
  for (double& v : acc) v *= scale;
  return acc;
}

struct EventTerms {
  double time_nll = 0.0;
  double mark_nll = 0.0;
};

EventTerms event_nll_terms(const Model& model, std::span<const double> h, double tau, int mark,
                           const LikelihoodOptions& opts, std::size_t event_index) {
  EventTerms terms;
  switch (model.config().kind) {
    case ModelKind::Lnm:
    case ModelKind::LnmDep: {
      terms.time_nll = -lnm_log_pdf(tau, lnm_head_for_mark(model, h, mark));
      std::vector<double> logits = mark_logits(model, h);
      log_softmax_inplace(logits);
      terms.mark_nll = -logits[static_cast<std::size_t>(mark)];
      return terms;
    }
    case ModelKind::CP:
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep: {
      std::vector<double> lam_log;
      if (model.config().kind == ModelKind::CP) {
        lam_log = cp_intensity(model, h);
        for (double& v : lam_log) v = guarded_log(v);
      } else {
        lam_log = rmtpp_loglinear(model, h);
        for (std::size_t j = 0; j < lam_log.size(); ++j)
          lam_log[j] += rmtpp_slope(model, static_cast<int>(j)) * tau;
      }
      std::vector<double> comp;
      if (opts.use_mc) {
        Rng rng = event_mc_rng(opts, event_index);
        comp = mc_compensator_rng(model, h, tau, opts.mc_samples, rng);
      } else {
        comp = compensator_vector(model, h, tau);
      }
      double total_comp = 0.0;
      for (double c : comp) total_comp += c;
      const double lse = logsumexp(lam_log);
      terms.time_nll = total_comp - lse;
      terms.mark_nll = lse - lam_log[static_cast<std::size_t>(mark)];
      return terms;
    }
  }
  throw ValidationError("event_nll_terms: unknown kind");
}

double tail_nll(const Model& model, std::span<const double> h, double gap, const LikelihoodOptions& opts,
                std::size_t event_index) {
  if (gap <= 0.0) return 0.0;
  if (opts.use_mc && is_intensity(model.config().kind)) {
    Rng rng = event_mc_rng(opts, event_index);
    const std::vector<double> comp = mc_compensator_rng(model, h, gap, opts.mc_samples, rng);
    double total = 0.0;
    for (double c : comp) total += c;
    return total;
  }
  return -log_survival_prob(model, h, gap);
}

void walk_sequence(const Model& model, const EventSequence& seq, const LikelihoodOptions& opts,
                   NLLBreakdown* nll, std::vector<int>* true_marks, std::vector<int>* predictions) {
  const InterEventView view = to_inter_event(seq);
  EncoderState state(model);
  for (std::size_t i = 0; i < view.taus.size(); ++i) {
    const double tau = view.taus[i];
    const int mark = seq.marks[i];
    if (predictions) {
      predictions->push_back(predict_mark(model, state.hidden(), std::max(tau, kLogEps)));
      true_marks->push_back(mark);
    }
    if (nll) {
      const EventTerms t = event_nll_terms(model, state.hidden(), tau, mark, opts, i);
      if (!std::isfinite(t.time_nll) || !std::isfinite(t.mark_nll))
        throw NumericalError("sequence_nll: non-finite term at event " + std::to_string(i));
      nll->time_nll += t.time_nll;
      nll->mark_nll += t.mark_nll;
    }
    state.step(tau, mark);
  }
  if (nll) {
    const double surv = tail_nll(model, state.hidden(), view.tail_gap, opts, view.taus.size());
    if (!std::isfinite(surv))
      throw NumericalError("sequence_nll: non-finite survival term after event " +
                           std::to_string(view.taus.size()));
    nll->time_nll += surv;
    nll->total = nll->time_nll + nll->mark_nll;
    nll->per_sequence.assign(1, nll->total);
    nll->num_events = seq.size();
    nll->observed_time = seq.window();
  }
}

}  // namespace

void NLLBreakdown::accumulate(const NLLBreakdown& other) {
  total += other.total;
  time_nll += other.time_nll;
  mark_nll += other.mark_nll;
  per_sequence.insert(per_sequence.end(), other.per_sequence.begin(), other.per_sequence.end());
  num_events += other.num_events;
  observed_time += other.observed_time;
}

NLLBreakdown sequence_nll(const Model& model, const EventSequence& seq, const LikelihoodOptions& opts) {
  NLLBreakdown nll;
  walk_sequence(model, seq, opts, &nll, nullptr, nullptr);
  return nll;
}

std::vector<double> mc_compensator(const Model& model, const std::vector<double>& h, double dt,
                                   int num_samples, std::uint64_t seed) {
  if (dt < 0.0) throw ValidationError("mc_compensator: dt must be nonnegative");
  if (num_samples < 1) throw ValidationError("mc_compensator: num_samples must be >= 1");
  Rng rng = Rng::child(seed, 0x3c);
  return mc_compensator_rng(model, h, dt, num_samples, rng);
}

namespace {

// Column k of the slope parameter used for entry (m, k); handles the shared
// scalar slope of the independent variant.
inline double slope_entry(const Tensor& slope, std::int64_t k) {
  return slope.cols == 1 ? slope.data[0] : slope.data[static_cast<std::size_t>(k)];
}

// Lambda_k over all rows, with dt per row: value[m,k] = e^{a[m,k]} g(w_k, dt_m).
Var exp_compensator_op(const Var& a, const Var& slope, std::vector<double> dt) {
  const Tensor& va = a.value();
  const Tensor& vs = slope.value();
  Tensor out(va.rows, va.cols);
  for (std::int64_t m = 0; m < va.rows; ++m)
    for (std::int64_t k = 0; k < va.cols; ++k)
      out.at(m, k) = exp_compensator_value(va.at(m, k), slope_entry(vs, k), dt[static_cast<std::size_t>(m)]);
  return make_custom_op(
      "exp_compensator", std::move(out), {a, slope},
      [an = a.node(), sn = slope.node(), dt = std::move(dt)](Node& self) {
        const Tensor& va = an->value;
        const Tensor& vs = sn->value;
        for (std::int64_t m = 0; m < va.rows; ++m)
          for (std::int64_t k = 0; k < va.cols; ++k) {
            const double g = self.grad.at(m, k);
            if (g == 0.0) continue;
            double da, dw;
            exp_compensator_partials(va.at(m, k), slope_entry(vs, k), dt[static_cast<std::size_t>(m)], &da,
                                     &dw);
            if (an->requires_grad) an->grad.at(m, k) += g * da;
            if (sn->requires_grad) sn->grad.at(0, vs.cols == 1 ? 0 : k) += g * dw;
          }
      });
}

struct FlatBatch {
  Var log_tau;   // [M,1]
  Var tau;       // [M,1]
  Var mask;      // [M,1] 1 for real events
  std::vector<int> marks;       // M
  std::vector<double> tau_raw;  // M
  std::int64_t m = 0;
};

FlatBatch flatten_batch(const Batch& batch) {
  const auto b = static_cast<std::int64_t>(batch.batch_size);
  const auto l = static_cast<std::int64_t>(batch.max_len);
  FlatBatch f;
  f.m = b * l;
  Tensor log_tau(f.m, 1), tau(f.m, 1), mask(f.m, 1);
  f.marks.resize(static_cast<std::size_t>(f.m));
  f.tau_raw.resize(static_cast<std::size_t>(f.m));
  for (std::int64_t t = 0; t < l; ++t)
    for (std::int64_t r = 0; r < b; ++r) {
      const std::int64_t m = t * b + r;
      const double tv = batch.tau(static_cast<std::size_t>(r), static_cast<std::size_t>(t));
      tau.at(m, 0) = tv;
      log_tau.at(m, 0) = guarded_log(tv);
      mask.at(m, 0) = t < static_cast<std::int64_t>(batch.lengths[static_cast<std::size_t>(r)]) ? 1.0 : 0.0;
      f.marks[static_cast<std::size_t>(m)] = batch.mark(static_cast<std::size_t>(r), static_cast<std::size_t>(t));
      f.tau_raw[static_cast<std::size_t>(m)] = tv;
    }
  f.log_tau = Var::constant(std::move(log_tau));
  f.tau = Var::constant(std::move(tau));
  f.mask = Var::constant(std::move(mask));
  return f;
}

// Component log densities -> row-wise mixture log pdf. Inputs are [R,C]
// heads and a [R,1] log tau.
Var mixture_log_pdf_rows(const Model& model, const Var& w_logits, const Var& mu_lin, const Var& s_lin,
                         const Var& log_tau) {
  Var log_w = sub(w_logits, logsumexp_rows(w_logits));
  Var mu = model.config().raw_mu ? mu_lin : exp(mu_lin);
  Var s = exp(s_lin);  // log s == s_lin
  Var z = div(sub(log_tau, mu), s);
  Var comp = sub(sub(sub(log_w, s_lin), log_tau), add(mul(mul(z, z), 0.5), kHalfLog2Pi));
  return logsumexp_rows(comp);
}

// Row-wise log survival: log sum_c w_c NormalSF((log tau - mu_c)/s_c).
Var mixture_log_sf_rows(const Model& model, const Var& w_logits, const Var& mu_lin, const Var& s_lin,
                        const Var& log_tau) {
  Var log_w = sub(w_logits, logsumexp_rows(w_logits));
  Var mu = model.config().raw_mu ? mu_lin : exp(mu_lin);
  Var s = exp(s_lin);
  Var z = div(sub(log_tau, mu), s);
  return logsumexp_rows(add(log_w, normal_log_sf(z)));
}

Var repeat_rows_per_mark(const Var& col, int k) {
  // [R,1] -> [R*K,1] with row r*K+j = col[r]; matches the reshape of a
  // mark-major [R, K*C] head block into [R*K, C].
  const Tensor& v = col.value();
  Tensor rep(v.rows * k, 1);
  for (std::int64_t r = 0; r < v.rows; ++r)
    for (int j = 0; j < k; ++j) rep.at(r * k + j, 0) = v.at(r, 0);
  return Var::constant(std::move(rep));
}

}  // namespace

BatchLoss batch_nll(const Model& model, const Batch& batch, const LikelihoodOptions& opts) {
  const ModelConfig& cfg = model.config();
  const auto b = static_cast<std::int64_t>(batch.batch_size);
  const auto l = static_cast<std::int64_t>(batch.max_len);
  const int k = cfg.num_marks;
  const std::int64_t m = b * l;

  BatchEncoding enc = encode_batch(model, batch);
  FlatBatch flat;
  Var hcat;
  if (l > 0) {
    flat = flatten_batch(batch);
    std::vector<Var> states(enc.states.begin(), enc.states.begin() + l);
    hcat = concat_rows(states);
  }
  Var htail = gather_tail_states(enc, batch);

  Tensor gaps(b, 1), gap_mask(b, 1), log_gaps(b, 1);
  for (std::int64_t r = 0; r < b; ++r) {
    const double g = batch.tail_gaps[static_cast<std::size_t>(r)];
    gaps.at(r, 0) = g;
    gap_mask.at(r, 0) = g > 0.0 ? 1.0 : 0.0;
    log_gaps.at(r, 0) = guarded_log(g);
  }
  const Var gaps_v = Var::constant(std::move(gaps));
  const Var gap_mask_v = Var::constant(std::move(gap_mask));
  const Var log_gaps_v = Var::constant(std::move(log_gaps));

  Var time_events, mark_events;  // [M,1] masked
  Var time_tail;                 // [B,1]

  switch (cfg.kind) {
    case ModelKind::Lnm:
    case ModelKind::LnmDep: {
      const bool dep = cfg.kind == ModelKind::LnmDep;
      const int groups = dep ? k : 1;
      if (l > 0) {
        Var w_logits = add(matmul(hcat, model.mix_ww), model.mix_bw);
        Var mu_lin = add(matmul(hcat, model.mix_wmu), model.mix_bmu);
        Var s_lin = add(matmul(hcat, model.mix_ws), model.mix_bs);
        Var log_f;
        if (dep) {
          const std::int64_t rows = m * groups;
          Var log_pdf_all = mixture_log_pdf_rows(
              model, reshape(w_logits, rows, cfg.mixture_components),
              reshape(mu_lin, rows, cfg.mixture_components), reshape(s_lin, rows, cfg.mixture_components),
              repeat_rows_per_mark(flat.log_tau, groups));
          log_f = take_columns(reshape(log_pdf_all, m, groups), flat.marks);
        } else {
          log_f = mixture_log_pdf_rows(model, w_logits, mu_lin, s_lin, flat.log_tau);
        }
        time_events = mul(neg(log_f), flat.mask);

        Var logits_m = add(matmul(hcat, model.mark_w), model.mark_b);
        Var log_pmf = sub(logits_m, logsumexp_rows(logits_m));
        mark_events = mul(neg(take_columns(log_pmf, flat.marks)), flat.mask);
      }
      // survival of the tail interval
      Var w_logits_t = add(matmul(htail, model.mix_ww), model.mix_bw);
      Var mu_lin_t = add(matmul(htail, model.mix_wmu), model.mix_bmu);
      Var s_lin_t = add(matmul(htail, model.mix_ws), model.mix_bs);
      if (dep) {
        const std::int64_t rows = b * groups;
        Var log_sf_all = mixture_log_sf_rows(
            model, reshape(w_logits_t, rows, cfg.mixture_components),
            reshape(mu_lin_t, rows, cfg.mixture_components), reshape(s_lin_t, rows, cfg.mixture_components),
            repeat_rows_per_mark(log_gaps_v, groups));
        Var logits_mt = add(matmul(htail, model.mark_w), model.mark_b);
        Var log_pmf_t = sub(logits_mt, logsumexp_rows(logits_mt));
        Var joint = add(log_pmf_t, reshape(log_sf_all, b, groups));
        time_tail = mul(neg(logsumexp_rows(joint)), gap_mask_v);
      } else {
        Var log_sf = mixture_log_sf_rows(model, w_logits_t, mu_lin_t, s_lin_t, log_gaps_v);
        time_tail = mul(neg(log_sf), gap_mask_v);
      }
      break;
    }
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep: {
      if (l > 0) {
        Var a = add(matmul(hcat, model.exp_w1), model.exp_b1);
        Var lam_log_tau = add(a, mul(flat.tau, model.exp_slope));
        Var lse = logsumexp_rows(lam_log_tau);
        Var comp;
        if (opts.use_mc) {
          Var acc;
          for (int s = 0; s < opts.mc_samples; ++s) {
            Tensor u(m, 1);
            for (std::int64_t t = 0; t < l; ++t)
              for (std::int64_t r = 0; r < b; ++r) {
                const std::int64_t row = t * b + r;
                LikelihoodOptions row_opts = opts;
                row_opts.mc_stream = batch.sequence_indices[static_cast<std::size_t>(r)];
                Rng rng = event_mc_rng(row_opts, static_cast<std::size_t>(t));
                for (int skip = 0; skip < s; ++skip) rng.uniform();
                u.at(row, 0) = rng.uniform() * flat.tau_raw[static_cast<std::size_t>(row)];
              }
            Var term = exp(add(a, mul(Var::constant(std::move(u)), model.exp_slope)));
            acc = acc.defined() ? add(acc, term) : term;
          }
          comp = mul(acc, mul(flat.tau, 1.0 / static_cast<double>(opts.mc_samples)));
        } else {
          comp = exp_compensator_op(a, model.exp_slope, flat.tau_raw);
        }
        time_events = mul(sub(sum_rows(comp), lse), flat.mask);
        mark_events = mul(sub(lse, take_columns(lam_log_tau, flat.marks)), flat.mask);
      }
      Var a_t = add(matmul(htail, model.exp_w1), model.exp_b1);
      if (opts.use_mc) {
        Var acc;
        for (int s = 0; s < opts.mc_samples; ++s) {
          Tensor u(b, 1);
          for (std::int64_t r = 0; r < b; ++r) {
            LikelihoodOptions row_opts = opts;
            row_opts.mc_stream = batch.sequence_indices[static_cast<std::size_t>(r)];
            Rng rng = event_mc_rng(row_opts, batch.lengths[static_cast<std::size_t>(r)]);
            for (int skip = 0; skip < s; ++skip) rng.uniform();
            u.at(r, 0) = rng.uniform() * batch.tail_gaps[static_cast<std::size_t>(r)];
          }
          Var term = exp(add(a_t, mul(Var::constant(std::move(u)), model.exp_slope)));
          acc = acc.defined() ? add(acc, term) : term;
        }
        time_tail =
            sum_rows(mul(acc, mul(gaps_v, 1.0 / static_cast<double>(opts.mc_samples))));
      } else {
        std::vector<double> gap_raw(batch.tail_gaps.begin(), batch.tail_gaps.end());
        time_tail = sum_rows(exp_compensator_op(a_t, model.exp_slope, std::move(gap_raw)));
      }
      break;
    }
    case ModelKind::CP: {
      auto rates_of = [&](const Var& h) {
        Var u = tanh(add(matmul(h, model.cp_w1), model.cp_b1));
        return softplus(add(matmul(u, model.cp_w2), model.cp_b2));
      };
      if (l > 0) {
        Var rates = rates_of(hcat);
        Var lam_log = log(rates);
        Var lse = logsumexp_rows(lam_log);
        Var comp = mul(rates, flat.tau);
        time_events = mul(sub(sum_rows(comp), lse), flat.mask);
        mark_events = mul(sub(lse, take_columns(lam_log, flat.marks)), flat.mask);
      }
      time_tail = mul(sum_rows(rates_of(htail)), gaps_v);
      break;
    }
  }

  Var loss = sum_all(time_tail);
  if (l > 0) loss = add(loss, add(sum_all(time_events), sum_all(mark_events)));

  BatchLoss out;
  out.loss = loss;
  NLLBreakdown& nll = out.breakdown;
  nll.per_sequence.assign(batch.batch_size, 0.0);
  for (std::int64_t r = 0; r < b; ++r) {
    double seq_total = time_tail.value().at(r, 0);
    nll.time_nll += time_tail.value().at(r, 0);
    double window = batch.tail_gaps[static_cast<std::size_t>(r)];
    for (std::int64_t t = 0; t < l; ++t) {
      const std::int64_t row = t * b + r;
      if (t < static_cast<std::int64_t>(batch.lengths[static_cast<std::size_t>(r)])) {
        const double te = time_events.value().at(row, 0);
        const double me = mark_events.value().at(row, 0);
        nll.time_nll += te;
        nll.mark_nll += me;
        seq_total += te + me;
        window += flat.tau_raw[static_cast<std::size_t>(row)];
      }
    }
    nll.per_sequence[static_cast<std::size_t>(r)] = seq_total;
    nll.num_events += batch.lengths[static_cast<std::size_t>(r)];
    nll.observed_time += window;
  }
  nll.total = nll.time_nll + nll.mark_nll;
  return out;
}

SplitEval evaluate_sequences(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                             const LikelihoodOptions& opts, int threads) {
  std::vector<NLLBreakdown> nlls(indices.size());
  std::vector<std::vector<int>> trues(indices.size()), preds(indices.size());

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      LikelihoodOptions seq_opts = opts;
      seq_opts.mc_stream = indices[i];
      walk_sequence(model, ds.sequences[indices[i]], seq_opts, &nlls[i], &trues[i], &preds[i]);
    }
  };

  const int t = std::max(1, std::min<int>(threads, static_cast<int>(indices.size())));
  if (t == 1) {
    work(0, indices.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (indices.size() + static_cast<std::size_t>(t) - 1) / static_cast<std::size_t>(t);
    for (int i = 0; i < t; ++i) {
      const std::size_t begin = static_cast<std::size_t>(i) * chunk;
      const std::size_t end = std::min(indices.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  SplitEval eval;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    eval.nll.accumulate(nlls[i]);
    eval.true_marks.insert(eval.true_marks.end(), trues[i].begin(), trues[i].end());
    eval.predicted_marks.insert(eval.predicted_marks.end(), preds[i].begin(), preds[i].end());
  }
  return eval;
}

NLLBreakdown dataset_nll(const Model& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                         const LikelihoodOptions& opts, int threads) {
  std::vector<NLLBreakdown> nlls(indices.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      LikelihoodOptions seq_opts = opts;
      seq_opts.mc_stream = indices[i];
      walk_sequence(model, ds.sequences[indices[i]], seq_opts, &nlls[i], nullptr, nullptr);
    }
  };
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(indices.size())));
  if (t == 1) {
    work(0, indices.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (indices.size() + static_cast<std::size_t>(t) - 1) / static_cast<std::size_t>(t);
    for (int i = 0; i < t; ++i) {
      const std::size_t begin = static_cast<std::size_t>(i) * chunk;
      const std::size_t end = std::min(indices.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  NLLBreakdown total;
  for (const NLLBreakdown& n : nlls) total.accumulate(n);
  return total;
}

}  // namespace mvtpp
