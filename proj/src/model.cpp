#include "mvtpp/model.hpp"

#include <cmath>
#include <fstream>

#include "mvtpp/errors.hpp"
#include "mvtpp/rng.hpp"
#include "json.hpp"

namespace mvtpp {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::CP: return "cp";
    case ModelKind::Rmtpp: return "rmtpp";
    case ModelKind::Lnm: return "lnm";
    case ModelKind::RmtppDep: return "rmtpp_dep";
    case ModelKind::LnmDep: return "lnm_dep";
  }
  throw ValidationError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "cp") return ModelKind::CP;
  if (s == "rmtpp") return ModelKind::Rmtpp;
  if (s == "lnm") return ModelKind::Lnm;
  if (s == "rmtpp_dep") return ModelKind::RmtppDep;
  if (s == "lnm_dep") return ModelKind::LnmDep;
  throw ValidationError("unknown model kind '" + s + "' (expected cp, rmtpp, lnm, rmtpp_dep or lnm_dep)");
}

void ModelConfig::validate() const {
  if (num_marks < 1) throw ValidationError("model: num_marks must be >= 1");
  if (mixture_components < 1) throw ValidationError("model: mixture_components must be >= 1");
  if (hidden_size < 1 || embed_size < 1) throw ValidationError("model: sizes must be >= 1");
}

namespace {

Tensor uniform_init(Rng& rng, std::int64_t rows, std::int64_t cols, double bound) {
  Tensor t(rows, cols);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t init_seed) : cfg_(config) {
  cfg_.validate();
  const int k = cfg_.num_marks;
  const int c = cfg_.mixture_components;
  const int dh = cfg_.hidden_size;
  const int de = cfg_.embed_size;
  const int din = 1 + de;
  Rng rng = Rng::child(init_seed, 0x1417);

  const double be = 1.0 / std::sqrt(static_cast<double>(de));
  const double bi = 1.0 / std::sqrt(static_cast<double>(din));
  const double bh = 1.0 / std::sqrt(static_cast<double>(dh));

  embedding = store_.add("embedding", uniform_init(rng, k, de, be));
  gru_wz = store_.add("gru.wz", uniform_init(rng, din, dh, bi));
  gru_uz = store_.add("gru.uz", uniform_init(rng, dh, dh, bh));
  gru_bz = store_.add("gru.bz", Tensor(1, dh));
  gru_wr = store_.add("gru.wr", uniform_init(rng, din, dh, bi));
  gru_ur = store_.add("gru.ur", uniform_init(rng, dh, dh, bh));
  gru_br = store_.add("gru.br", Tensor(1, dh));
  gru_wh = store_.add("gru.wh", uniform_init(rng, din, dh, bi));
  gru_uh = store_.add("gru.uh", uniform_init(rng, dh, dh, bh));
  gru_bh = store_.add("gru.bh", Tensor(1, dh));
  h0 = store_.add("h0", Tensor(1, dh));

  switch (cfg_.kind) {
    case ModelKind::Lnm:
    case ModelKind::LnmDep: {
      const int width = cfg_.kind == ModelKind::LnmDep ? k * c : c;
      mark_w = store_.add("mark.w", uniform_init(rng, dh, k, bh));
      mark_b = store_.add("mark.b", Tensor(1, k));
      mix_ww = store_.add("mix.ww", uniform_init(rng, dh, width, bh));
      mix_bw = store_.add("mix.bw", Tensor(1, width));
      mix_wmu = store_.add("mix.wmu", uniform_init(rng, dh, width, bh));
      mix_bmu = store_.add("mix.bmu", Tensor(1, width));
      mix_ws = store_.add("mix.ws", uniform_init(rng, dh, width, bh));
      mix_bs = store_.add("mix.bs", Tensor(1, width));
      break;
    }
    case ModelKind::Rmtpp:
    case ModelKind::RmtppDep: {
      exp_w1 = store_.add("exp.w1", uniform_init(rng, dh, k, bh));
      exp_b1 = store_.add("exp.b1", Tensor(1, k));
      const int slope_width = cfg_.kind == ModelKind::RmtppDep ? k : 1;
      Tensor slope(1, slope_width);
      for (double& v : slope.data) v = -0.1 + 0.05 * rng.uniform(-1.0, 1.0);
      exp_slope = store_.add("exp.slope", std::move(slope));
      break;
    }
    case ModelKind::CP: {
      cp_w1 = store_.add("cp.w1", uniform_init(rng, dh, dh, bh));
      cp_b1 = store_.add("cp.b1", Tensor(1, dh));
      cp_w2 = store_.add("cp.w2", uniform_init(rng, dh, k, bh));
      cp_b2 = store_.add("cp.b2", Tensor(1, k));
      break;
    }
  }
}

void Model::save_checkpoint(const std::string& path, const std::string& extra_config_json) const {
  json j;
  j["format"] = "mvtpp-checkpoint-1";
  j["model"] = to_string(cfg_.kind);
  j["config"] = {{"num_marks", cfg_.num_marks},
                 {"mixture_components", cfg_.mixture_components},
                 {"hidden_size", cfg_.hidden_size},
                 {"embed_size", cfg_.embed_size},
                 {"log_time_input", cfg_.log_time_input},
                 {"raw_mu", cfg_.raw_mu}};
  try {
    j["extra"] = json::parse(extra_config_json);
  } catch (const json::exception&) {
    j["extra"] = json::object();
  }
  json params = json::object();
  for (const std::string& name : store_.names()) {
    const Tensor& t = store_.get(name).value();
    params[name] = {{"shape", {t.rows, t.cols}}, {"data", t.data}};
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw ValidationError("save_checkpoint: cannot open '" + path + "'");
  out << j.dump() << "\n";
}

Model Model::load_checkpoint(const std::string& path, std::string* extra_config_json) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_checkpoint: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("load_checkpoint: invalid JSON: ") + e.what());
  }
  if (j.value("format", "") != "mvtpp-checkpoint-1")
    throw ValidationError("load_checkpoint: unrecognized checkpoint format");

  ModelConfig cfg;
  cfg.kind = model_kind_from_string(j.at("model").get<std::string>());
  const json& c = j.at("config");
  cfg.num_marks = c.at("num_marks").get<int>();
  cfg.mixture_components = c.at("mixture_components").get<int>();
  cfg.hidden_size = c.at("hidden_size").get<int>();
  cfg.embed_size = c.at("embed_size").get<int>();
  cfg.log_time_input = c.at("log_time_input").get<bool>();
  cfg.raw_mu = c.at("raw_mu").get<bool>();

  Model m(cfg, 0);
  const json& params = j.at("params");
  for (const std::string& name : m.store_.names()) {
    if (!params.contains(name)) throw ValidationError("load_checkpoint: missing parameter '" + name + "'");
    const json& p = params.at(name);
    const auto shape = p.at("shape").get<std::vector<std::int64_t>>();
    Tensor& t = m.store_.get(name).mutable_value();
    if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols)
      throw ValidationError("load_checkpoint: shape mismatch for '" + name + "'");
    const auto data = p.at("data").get<std::vector<double>>();
    if (data.size() != t.data.size())
      throw ValidationError("load_checkpoint: data length mismatch for '" + name + "'");
    t.data = data;
  }
  if (extra_config_json) *extra_config_json = j.value("extra", json::object()).dump();
  return m;
}

}  // namespace mvtpp
