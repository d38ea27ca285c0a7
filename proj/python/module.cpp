#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"

#include "mvtpp/hawkes.hpp"
#include "mvtpp/metrics.hpp"
#include "mvtpp/sampling.hpp"
#include "mvtpp/training.hpp"

namespace py = pybind11;
using namespace mvtpp;
using nlohmann::json;

namespace {

py::dict sequence_to_dict(const EventSequence& seq) {
  py::dict d;
  d["arrival_times"] = seq.arrival_times;
  d["marks"] = seq.marks;
  d["t_start"] = seq.t_start;
  d["t_end"] = seq.t_end;
  return d;
}

EventSequence sequence_from_dict(const py::dict& d) {
  EventSequence seq;
  seq.arrival_times = d["arrival_times"].cast<std::vector<double>>();
  seq.marks = d["marks"].cast<std::vector<int>>();
  seq.t_start = d["t_start"].cast<double>();
  seq.t_end = d["t_end"].cast<double>();
  return seq;
}

py::list dataset_to_list(const Dataset& ds) {
  py::list out;
  for (const EventSequence& s : ds.sequences) out.append(sequence_to_dict(s));
  return out;
}

Dataset dataset_from_list(const py::list& sequences, int num_marks) {
  Dataset ds;
  int max_mark = -1;
  for (const auto& item : sequences) {
    ds.sequences.push_back(sequence_from_dict(item.cast<py::dict>()));
    for (int m : ds.sequences.back().marks) max_mark = std::max(max_mark, m);
  }
  ds.num_marks = num_marks > 0 ? num_marks : std::max(1, max_mark + 1);
  ds.validate();
  return ds;
}

HawkesParams hawkes_from_obj(const py::object& params_obj, const std::string& kernel) {
  HawkesParams p;
  if (py::isinstance<py::str>(params_obj)) {
    p = hawkes_preset(params_obj.cast<std::string>());
  } else {
    const py::dict d = params_obj.cast<py::dict>();
    p.mu = d["mu"].cast<std::vector<double>>();
    p.alpha = d["alpha"].cast<std::vector<std::vector<double>>>();
    p.beta = d["beta"].cast<std::vector<std::vector<double>>>();
  }
  if (kernel == "alpha")
    p.kernel = HawkesKernel::Alpha;
  else if (kernel == "alpha-beta")
    p.kernel = HawkesKernel::AlphaBeta;
  else
    throw ValidationError("kernel must be 'alpha-beta' or 'alpha'");
  p.validate();
  return p;
}

std::string config_to_json_text(const py::object& config) {
  if (config.is_none()) return "{}";
  if (py::isinstance<py::str>(config)) return config.cast<std::string>();
  return py::module_::import("json").attr("dumps")(config).cast<std::string>();
}

py::object json_to_py(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

PYBIND11_MODULE(mvtpp, m) {
  m.doc() = "Conditionally dependent multivariate marked temporal point processes";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "hawkes_preset",
      [](const std::string& name) {
        const HawkesParams p = hawkes_preset(name);
        py::dict d;
        d["mu"] = p.mu;
        d["alpha"] = p.alpha;
        d["beta"] = p.beta;
        return d;
      },
      py::arg("name"), "Published parameter sets: hawkes_ind, hawkes_dep1, hawkes_dep2");

  m.def(
      "stationary_rate",
      [](const py::object& params, const std::string& kernel) {
        return stationary_rate(hawkes_from_obj(params, kernel));
      },
      py::arg("params"), py::arg("kernel") = "alpha-beta",
      "Per-mark stationary event rates (I - branching)^-1 mu");

  m.def(
      "simulate_hawkes",
      [](const py::object& params, std::size_t num_seq, double t_end, std::uint64_t seed,
         const std::string& kernel) {
        return dataset_to_list(simulate_hawkes_dataset(hawkes_from_obj(params, kernel), num_seq, t_end, seed));
      },
      py::arg("params"), py::arg("num_seq"), py::arg("t_end"), py::arg("seed") = 1,
      py::arg("kernel") = "alpha-beta",
      "Ogata-thinning simulation; params is a preset name or a dict with mu/alpha/beta");

  m.def(
      "load_dataset",
      [](const std::string& path, double time_scale, int num_marks, double dedup_jitter) {
        const Dataset ds = load_dataset(
            path, time_scale, num_marks > 0 ? std::optional<int>(num_marks) : std::nullopt, dedup_jitter);
        py::dict d;
        d["sequences"] = dataset_to_list(ds);
        d["num_marks"] = ds.num_marks;
        return d;
      },
      py::arg("path"), py::arg("time_scale") = 1.0, py::arg("num_marks") = 0,
      py::arg("dedup_jitter") = 0.0);

  m.def(
      "save_dataset",
      [](const py::list& sequences, const std::string& path, int num_marks, double time_scale) {
        Dataset ds = dataset_from_list(sequences, num_marks);
        ds.time_scale = time_scale;
        save_dataset(ds, path);
      },
      py::arg("sequences"), py::arg("path"), py::arg("num_marks") = 0, py::arg("time_scale") = 1.0);

  m.def(
      "split_indices",
      [](std::size_t num_sequences, std::uint64_t seed, double train_frac, double val_frac,
         double test_frac) {
        Dataset dummy;
        dummy.sequences.resize(num_sequences);
        const SplitIndices s = split(dummy, train_frac, val_frac, test_frac, seed);
        py::dict d;
        d["train"] = s.train;
        d["val"] = s.val;
        d["test"] = s.test;
        return d;
      },
      py::arg("num_sequences"), py::arg("seed"), py::arg("train_frac") = 0.6, py::arg("val_frac") = 0.2,
      py::arg("test_frac") = 0.2, "Seeded 60/20/20 shuffle split over sequence indices");

  m.def(
      "train",
      [](const py::list& sequences, const py::object& config, const std::string& out_dir, int num_marks,
         int threads) {
        const Dataset ds = dataset_from_list(sequences, num_marks);
        TrainConfig cfg = TrainConfig::from_json(config_to_json_text(config));
        cfg.model.num_marks = ds.num_marks;
        cfg.eval_threads = threads;
        const SplitIndices splits = split(ds, 0.6, 0.2, 0.2, cfg.seed);
        const TrainResult result = train(cfg, subset(ds, splits.train), subset(ds, splits.val));

        py::dict out;
        out["best_epoch"] = result.best_epoch;
        out["best_val_nll"] = result.best_val_nll;
        out["epochs_run"] = result.epochs_run;
        out["diverged"] = result.diverged;
        out["config_hash"] = cfg.config_hash();
        if (!out_dir.empty()) {
          std::filesystem::create_directories(out_dir);
          json extra;
          extra["config_hash"] = cfg.config_hash();
          extra["config"] = json::parse(cfg.to_json());
          result.model.save_checkpoint(out_dir + "/checkpoint.json", extra.dump());
          save_split(splits, out_dir + "/splits.json");
          out["checkpoint"] = out_dir + "/checkpoint.json";
        }
        const SplitEval eval = evaluate_sequences(result.model, ds, splits.test, cfg.eval_likelihood,
                                                  threads);
        out["test_report"] = json_to_py(report_to_json(
            make_report(eval, ds.num_marks, "test", to_string(cfg.model.kind), cfg.config_hash())));
        return out;
      },
      py::arg("sequences"), py::arg("config") = py::none(), py::arg("out_dir") = "",
      py::arg("num_marks") = 0, py::arg("threads") = 2,
      "MLE training with a 60/20/20 split; returns the summary and test report");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const py::list& sequences, int num_marks,
         const py::object& indices, bool mc, int mc_samples, int threads) {
        std::string extra;
        const Model model = Model::load_checkpoint(checkpoint, &extra);
        const Dataset ds = dataset_from_list(sequences, num_marks);
        if (ds.num_marks != model.config().num_marks)
          throw ValidationError("checkpoint/model mismatch on num_marks");
        std::vector<std::size_t> idx = indices.is_none()
                                           ? all_indices(ds.size())
                                           : indices.cast<std::vector<std::size_t>>();
        LikelihoodOptions opts;
        opts.use_mc = mc;
        opts.mc_samples = mc_samples;
        const SplitEval eval = evaluate_sequences(model, ds, idx, opts, threads);
        const std::string hash = json::parse(extra).value("config_hash", "");
        return json_to_py(report_to_json(
            make_report(eval, ds.num_marks, "custom", to_string(model.config().kind), hash)));
      },
      py::arg("checkpoint"), py::arg("sequences"), py::arg("num_marks") = 0,
      py::arg("indices") = py::none(), py::arg("mc") = false, py::arg("mc_samples") = 1000,
      py::arg("threads") = 2);

  m.def(
      "sequence_nll",
      [](const std::string& checkpoint, const py::dict& sequence) {
        const Model model = Model::load_checkpoint(checkpoint);
        const NLLBreakdown nll = sequence_nll(model, sequence_from_dict(sequence));
        py::dict d;
        d["total"] = nll.total;
        d["time_nll"] = nll.time_nll;
        d["mark_nll"] = nll.mark_nll;
        return d;
      },
      py::arg("checkpoint"), py::arg("sequence"));

  m.def(
      "sample",
      [](const std::string& checkpoint, std::size_t num_seq, double t_end, std::uint64_t seed) {
        const Model model = Model::load_checkpoint(checkpoint);
        return dataset_to_list(sample_dataset(model, num_seq, t_end, seed));
      },
      py::arg("checkpoint"), py::arg("num_seq"), py::arg("t_end"), py::arg("seed") = 1,
      "Closed-form sampling from a trained model");

  m.def(
      "sampling_report",
      [](const py::list& real, const py::list& generated, int num_marks) {
        return json_to_py(sampling_report_to_json(
            sampling_report(dataset_from_list(real, num_marks), dataset_from_list(generated, num_marks))));
      },
      py::arg("real"), py::arg("generated"), py::arg("num_marks") = 0);

  m.def("micro_f1", &micro_f1, py::arg("true_marks"), py::arg("predicted_marks"));
  m.def("weighted_f1", &weighted_f1, py::arg("true_marks"), py::arg("predicted_marks"),
        py::arg("num_classes"));

  m.def(
      "lnm_pdf",
      [](double tau, const std::vector<double>& w, const std::vector<double>& mu,
         const std::vector<double>& s) { return lnm_pdf(tau, w, mu, s); },
      py::arg("tau"), py::arg("w"), py::arg("mu"), py::arg("s"),
      "Log-normal mixture density at tau");

  m.def(
      "lnm_log_survival",
      [](double tau, const std::vector<double>& w, const std::vector<double>& mu,
         const std::vector<double>& s) { return lnm_log_survival(tau, w, mu, s); },
      py::arg("tau"), py::arg("w"), py::arg("mu"), py::arg("s"));
}
