#include "mvtpp/encoder.hpp"

#include <cmath>

namespace mvtpp {

namespace {
constexpr double kTimeEps = 1e-8;

// out = x * W + b over plain buffers; W is [in, out].
void affine(const std::vector<double>& x, const Tensor& w, const Tensor& b, double* out) {
  for (std::int64_t j = 0; j < w.cols; ++j) out[j] = b.data[static_cast<std::size_t>(j)];
  for (std::int64_t i = 0; i < w.rows; ++i) {
    const double xv = x[static_cast<std::size_t>(i)];
    if (xv == 0.0) continue;
    const double* wrow = w.data.data() + i * w.cols;
    for (std::int64_t j = 0; j < w.cols; ++j) out[j] += xv * wrow[j];
  }
}

void add_matvec(const std::vector<double>& x, const Tensor& w, double* out) {
  for (std::int64_t i = 0; i < w.rows; ++i) {
    const double xv = x[static_cast<std::size_t>(i)];
    if (xv == 0.0) continue;
    const double* wrow = w.data.data() + i * w.cols;
    for (std::int64_t j = 0; j < w.cols; ++j) out[j] += xv * wrow[j];
  }
}

}  // namespace

double time_feature(const Model& model, double tau) {
  return model.config().log_time_input ? std::log(tau + kTimeEps) : tau;
}

std::vector<double> embed_mark(const Model& model, int mark) {
  const Tensor& e = model.embedding.value();
  if (mark < 0 || mark >= e.rows)
    throw ValidationError("embed_mark: mark " + std::to_string(mark) + " out of range [0," +
                          std::to_string(e.rows) + ")");
  std::vector<double> row(static_cast<std::size_t>(e.cols));
  for (std::int64_t j = 0; j < e.cols; ++j) row[static_cast<std::size_t>(j)] = e.at(mark, j);
  return row;
}

std::vector<double> build_input(const Model& model, double tau, int mark) {
  if (!(tau > 0.0)) throw ValidationError("build_input: tau must be positive");
  std::vector<double> y = embed_mark(model, mark);
  y.insert(y.begin(), time_feature(model, tau));
  return y;
}

EncoderState::EncoderState(const Model& model) : model_(&model) { reset(); }

void EncoderState::reset() {
  const Tensor& h0 = model_->h0.value();
  h_ = h0.data;
  const std::size_t dh = h_.size();
  zr_buf_.assign(2 * dh, 0.0);
  cand_buf_.assign(dh, 0.0);
  input_buf_.assign(1 + static_cast<std::size_t>(model_->embedding.value().cols), 0.0);
}

void EncoderState::step(double tau, int mark) {
  const Model& m = *model_;
  const std::size_t dh = h_.size();
  const Tensor& emb = m.embedding.value();
  input_buf_[0] = time_feature(m, tau);
  for (std::int64_t j = 0; j < emb.cols; ++j)
    input_buf_[static_cast<std::size_t>(1 + j)] = emb.at(mark, j);

  double* z = zr_buf_.data();
  double* r = zr_buf_.data() + dh;
  affine(input_buf_, m.gru_wz.value(), m.gru_bz.value(), z);
  add_matvec(h_, m.gru_uz.value(), z);
  affine(input_buf_, m.gru_wr.value(), m.gru_br.value(), r);
  add_matvec(h_, m.gru_ur.value(), r);
  for (std::size_t i = 0; i < dh; ++i) {
    z[i] = stable_sigmoid(z[i]);
    r[i] = stable_sigmoid(r[i]);
  }

  affine(input_buf_, m.gru_wh.value(), m.gru_bh.value(), cand_buf_.data());
  // reset gate applies to the hidden state before the recurrent matmul
  std::vector<double> rh(dh);
  for (std::size_t i = 0; i < dh; ++i) rh[i] = r[i] * h_[i];
  add_matvec(rh, m.gru_uh.value(), cand_buf_.data());
  for (std::size_t i = 0; i < dh; ++i) {
    const double c = std::tanh(cand_buf_[i]);
    h_[i] = (1.0 - z[i]) * h_[i] + z[i] * c;
  }
}

Tensor encode_prefixes(const Model& model, const EventSequence& seq) {
  const InterEventView view = to_inter_event(seq);
  const auto n = static_cast<std::int64_t>(seq.size());
  const std::int64_t dh = model.config().hidden_size;
  Tensor out(n + 1, dh);
  EncoderState state(model);
  for (std::int64_t i = 0; i <= n; ++i) {
    for (std::int64_t j = 0; j < dh; ++j) out.at(i, j) = state.hidden()[static_cast<std::size_t>(j)];
    if (i < n) state.step(view.taus[static_cast<std::size_t>(i)], seq.marks[static_cast<std::size_t>(i)]);
  }
  return out;
}

BatchEncoding encode_batch(const Model& model, const Batch& batch) {
  const auto b = static_cast<std::int64_t>(batch.batch_size);
  const auto l = static_cast<std::int64_t>(batch.max_len);
  BatchEncoding enc;
  enc.states.reserve(static_cast<std::size_t>(l + 1));

  Var h = broadcast_to(model.h0, b, model.config().hidden_size);
  enc.states.push_back(h);
  const Var one = Var::scalar(1.0);

  for (std::int64_t t = 0; t < l; ++t) {
    Tensor time_col(b, 1);
    std::vector<int> marks(static_cast<std::size_t>(b));
    for (std::int64_t r = 0; r < b; ++r) {
      time_col.at(r, 0) = time_feature(model, batch.tau(static_cast<std::size_t>(r), static_cast<std::size_t>(t)));
      marks[static_cast<std::size_t>(r)] = batch.mark(static_cast<std::size_t>(r), static_cast<std::size_t>(t));
    }
    Var x = concat_cols({Var::constant(std::move(time_col)), gather_rows(model.embedding, marks)});

    Var z = sigmoid(add(add(matmul(x, model.gru_wz), matmul(h, model.gru_uz)), model.gru_bz));
    Var r = sigmoid(add(add(matmul(x, model.gru_wr), matmul(h, model.gru_ur)), model.gru_br));
    Var c = tanh(add(add(matmul(x, model.gru_wh), matmul(mul(r, h), model.gru_uh)), model.gru_bh));
    h = add(mul(sub(one, z), h), mul(z, c));
    enc.states.push_back(h);
  }
  return enc;
}

Var gather_tail_states(const BatchEncoding& enc, const Batch& batch) {
  const auto b = static_cast<std::int64_t>(batch.batch_size);
  Var tail;
  for (std::size_t t = 0; t < enc.states.size(); ++t) {
    Tensor sel(b, 1);
    bool any = false;
    for (std::int64_t r = 0; r < b; ++r)
      if (batch.lengths[static_cast<std::size_t>(r)] == t) {
        sel.at(r, 0) = 1.0;
        any = true;
      }
    if (!any) continue;
    Var term = mul(enc.states[t], Var::constant(std::move(sel)));
    tail = tail.defined() ? add(tail, term) : term;
  }
  return tail;
}

}  // namespace mvtpp
