#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "json.hpp"

#include "mvtpp/hawkes.hpp"
#include "mvtpp/metrics.hpp"
#include "mvtpp/sampling.hpp"
#include "mvtpp/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvtpp;

namespace {

int g_verbosity = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
  if (g_verbosity >= 1) std::cerr << "[mvtpp] " << msg << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << content;
}

std::vector<std::size_t> split_for_name(const SplitIndices& s, const std::string& name,
                                        std::size_t dataset_size) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  if (name == "all") {
    std::vector<std::size_t> all(dataset_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  throw ValidationError("unknown split '" + name + "'");
}

struct DataFlags {
  std::string path;
  double time_scale = 1.0;
  double dedup_jitter = 0.0;
  int num_marks = 0;  // 0: infer

  Dataset load() const {
    return load_dataset(path, time_scale, num_marks > 0 ? std::optional<int>(num_marks) : std::nullopt,
                        dedup_jitter);
  }
};

void add_data_flags(CLI::App* cmd, DataFlags& flags) {
  cmd->add_option("--data", flags.path, "JSONL dataset path")->required();
  cmd->add_option("--time-scale", flags.time_scale, "multiplier applied to all times on load");
  cmd->add_option("--dedup-jitter", flags.dedup_jitter, "spacing added to duplicate timestamps");
  cmd->add_option("--num-marks", flags.num_marks, "override the inferred mark count");
}

struct TrainFlags {
  TrainConfig config;
  std::string model = "lnm_dep";
  std::string config_path;
  std::string time_input = "log";
  std::uint64_t split_seed = 0;
  bool split_seed_set = false;
  int threads = 2;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
  cmd->add_option("--mixture-components,-C", f.config.model.mixture_components, "mixture components C");
  cmd->add_option("--hidden-size", f.config.model.hidden_size, "history vector size");
  cmd->add_option("--embed-size", f.config.model.embed_size, "mark embedding size");
  cmd->add_option("--batch-size", f.config.batch_size, "sequences per batch");
  cmd->add_option("--learning-rate", f.config.learning_rate, "Adam learning rate");
  cmd->add_option("--weight-decay", f.config.weight_decay, "decoupled weight decay");
  cmd->add_option("--patience", f.config.patience, "early-stopping patience in epochs");
  cmd->add_option("--max-epochs", f.config.max_epochs, "epoch cap");
  cmd->add_option("--seed", f.config.seed, "training seed");
  cmd->add_option("--grad-clip", f.config.grad_clip, "gradient norm cap; <=0 disables");
  cmd->add_option("--time-input", f.time_input, "feed raw tau or log tau to the encoder")
      ->check(CLI::IsMember({"log", "raw"}));
  cmd->add_flag("--raw-mu", f.config.model.raw_mu, "lift the exp() constraint on mixture locations");
  cmd->add_flag("--train-mc", f.config.train_likelihood.use_mc,
                "Monte Carlo compensators in the training loss (intensity kinds)");
  cmd->add_option("--train-mc-samples", f.config.train_likelihood.mc_samples, "MC samples per interval");
  cmd->add_option("--split-seed", f.split_seed, "seed for the 60/20/20 split (default: --seed)");
  cmd->add_option("--threads", f.threads, "worker threads for evaluation passes");
}

// precedence: defaults < --config file < explicit flags
TrainConfig resolve_train_config(const CLI::App* cmd, TrainFlags& f) {
  TrainConfig resolved;
  if (!f.config_path.empty()) resolved.merge_json(read_file(f.config_path));
  auto take_if = [&](const std::string& flag, auto member, auto value) {
    if (cmd->count(flag) > 0) resolved.*member = value;
  };
  if (cmd->count("--model") > 0 || f.config_path.empty())
    resolved.model.kind = model_kind_from_string(f.model);
  if (cmd->count("--mixture-components") > 0)
    resolved.model.mixture_components = f.config.model.mixture_components;
  if (cmd->count("--hidden-size") > 0) resolved.model.hidden_size = f.config.model.hidden_size;
  if (cmd->count("--embed-size") > 0) resolved.model.embed_size = f.config.model.embed_size;
  if (cmd->count("--time-input") > 0) resolved.model.log_time_input = f.time_input == "log";
  if (cmd->count("--raw-mu") > 0) resolved.model.raw_mu = f.config.model.raw_mu;
  take_if("--batch-size", &TrainConfig::batch_size, f.config.batch_size);
  take_if("--learning-rate", &TrainConfig::learning_rate, f.config.learning_rate);
  take_if("--weight-decay", &TrainConfig::weight_decay, f.config.weight_decay);
  take_if("--patience", &TrainConfig::patience, f.config.patience);
  take_if("--max-epochs", &TrainConfig::max_epochs, f.config.max_epochs);
  take_if("--seed", &TrainConfig::seed, f.config.seed);
  take_if("--grad-clip", &TrainConfig::grad_clip, f.config.grad_clip);
  if (cmd->count("--train-mc") > 0) resolved.train_likelihood.use_mc = f.config.train_likelihood.use_mc;
  if (cmd->count("--train-mc-samples") > 0)
    resolved.train_likelihood.mc_samples = f.config.train_likelihood.mc_samples;
  resolved.eval_threads = f.threads;
  f.split_seed_set = cmd->count("--split-seed") > 0;
  return resolved;
}

json train_one(const TrainConfig& config, const Dataset& ds, const SplitIndices& splits,
               const std::string& out_dir, int threads) {
  const Dataset train_ds = subset(ds, splits.train);
  const Dataset val_ds = subset(ds, splits.val);
  log_info("training " + to_string(config.model.kind) + " on " + std::to_string(train_ds.size()) +
           " sequences (val " + std::to_string(val_ds.size()) + ")");
  const TrainResult result = train(config, train_ds, val_ds);

  fs::create_directories(out_dir);
  const std::string ckpt_path = out_dir + "/checkpoint.json";
  json extra;
  extra["config_hash"] = config.config_hash();
  extra["config"] = json::parse(config.to_json());
  result.model.save_checkpoint(ckpt_path, extra.dump());
  write_file(out_dir + "/config.json", config.to_json() + "\n");
  save_split(splits, out_dir + "/splits.json");
  {
    std::ofstream log(out_dir + "/log.jsonl");
    for (const EpochLog& e : result.log) {
      json line = {{"epoch", e.epoch},
                   {"train_nll", e.train_nll},
                   {"val_nll", e.val_nll},
                   {"wall_time", e.seconds}};
      log << line.dump() << "\n";
    }
  }

  // test-split report for convenience
  const SplitEval eval = evaluate_sequences(result.model, ds, splits.test, config.eval_likelihood, threads);
  const EvalReport report = make_report(eval, ds.num_marks, "test", to_string(config.model.kind),
                                        config.config_hash());
  write_file(out_dir + "/report_test.json", report_to_json(report) + "\n");

  json summary;
  summary["checkpoint"] = ckpt_path;
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_nll"] = result.best_val_nll;
  summary["epochs_run"] = result.epochs_run;
  summary["skipped_steps"] = result.skipped_steps;
  summary["diverged"] = result.diverged;
  summary["config_hash"] = config.config_hash();
  summary["test_report"] = json::parse(report_to_json(report));
  return summary;
}

int cmd_simulate(const std::string& preset, const std::string& params_path, std::size_t num_seq,
                 double t_end, std::uint64_t seed, const std::string& out, const std::string& kernel,
                 std::size_t max_events, const std::string& export_params) {
  HawkesParams params;
  if (!params_path.empty())
    params = hawkes_params_from_json(read_file(params_path));
  else
    params = hawkes_preset(preset);
  if (kernel == "alpha")
    params.kernel = HawkesKernel::Alpha;
  else if (kernel == "alpha-beta")
    params.kernel = HawkesKernel::AlphaBeta;
  else if (!kernel.empty())
    throw ValidationError("unknown kernel '" + kernel + "' (expected alpha-beta or alpha)");
  params.validate();
  if (spectral_radius(params.branching()) >= 1.0)
    log_info("warning: branching spectral radius >= 1; the process is non-stationary");
  if (!export_params.empty()) write_file(export_params, hawkes_params_to_json(params) + "\n");

  SimOptions opts;
  opts.max_events = max_events;
  log_info("simulating " + std::to_string(num_seq) + " sequences on [0," + std::to_string(t_end) + "]");
  const Dataset ds = simulate_hawkes_dataset(params, num_seq, t_end, seed, opts);
  save_dataset(ds, out);

  json summary;
  summary["out"] = out;
  summary["num_sequences"] = ds.size();
  summary["num_events"] = ds.total_events();
  summary["mean_length"] = static_cast<double>(ds.total_events()) / static_cast<double>(ds.size());
  summary["num_marks"] = ds.num_marks;
  summary["t_end"] = t_end;
  summary["seed"] = seed;
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* env = std::getenv("MVTPP_LOG")) {
    const std::string v(env);
    if (v == "quiet" || v == "0") g_verbosity = 0;
    if (v == "debug" || v == "2") g_verbosity = 2;
  }

  CLI::App app{"Multivariate marked temporal point processes: simulate, train, evaluate, sample"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Generate a Hawkes dataset (JSONL)");
  std::string sim_preset = "hawkes_dep1", sim_params, sim_out = "data.jsonl", sim_kernel,
              sim_export_params;
  std::size_t sim_num_seq = 0, sim_max_events = 1000000;
  double sim_t_end = 100.0;
  std::uint64_t sim_seed = 1;
  sim->add_option("--preset", sim_preset, "hawkes_ind | hawkes_dep1 | hawkes_dep2");
  sim->add_option("--params", sim_params, "JSON file with mu/alpha/beta (overrides --preset)");
  sim->add_option("--num-seq", sim_num_seq, "number of sequences")->required()->check(CLI::PositiveNumber);
  sim->add_option("--t-end", sim_t_end, "window end time");
  sim->add_option("--seed", sim_seed, "master seed");
  sim->add_option("--out", sim_out, "output JSONL path");
  sim->add_option("--kernel", sim_kernel,
                  "exponential kernel convention: alpha-beta (default) or alpha (reproduces the "
                  "reference synthetic datasets)");
  sim->add_option("--max-events", sim_max_events, "per-sequence cascade cap");
  sim->add_option("--export-params", sim_export_params, "write the effective parameters as JSON");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Fit a decoder by maximum likelihood");
  DataFlags tr_data;
  TrainFlags tr_flags;
  std::string tr_out_dir = "run";
  add_data_flags(tr, tr_data);
  tr->add_option("--model", tr_flags.model, "cp | rmtpp | lnm | rmtpp_dep | lnm_dep")
      ->check(CLI::IsMember({"cp", "rmtpp", "lnm", "rmtpp_dep", "lnm_dep"}));
  tr->add_option("--out-dir", tr_out_dir, "directory for checkpoint/config/log/splits");
  add_train_flags(tr, tr_flags);

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
  DataFlags ev_data;
  std::string ev_ckpt, ev_split = "test", ev_splits_file, ev_out;
  bool ev_mc = false;
  int ev_mc_samples = 1000, ev_threads = 2;
  std::uint64_t ev_mc_seed = 0, ev_split_seed = 0;
  add_data_flags(ev, ev_data);
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--split", ev_split, "train | val | test | all");
  ev->add_option("--splits-file", ev_splits_file, "splits JSON from training");
  ev->add_option("--split-seed", ev_split_seed, "re-derive the 60/20/20 split from this seed");
  ev->add_flag("--mc", ev_mc, "Monte Carlo compensators instead of closed forms (intensity kinds)");
  ev->add_option("--mc-samples", ev_mc_samples, "MC samples per interval");
  ev->add_option("--mc-seed", ev_mc_seed, "MC stream seed");
  ev->add_option("--threads", ev_threads, "worker threads");
  ev->add_option("--out", ev_out, "also write the report JSON here");

  // ---- sample ----
  auto* sa = app.add_subcommand("sample", "Generate sequences from a trained model");
  std::string sa_ckpt, sa_out = "generated.jsonl", sa_report, sa_data, sa_split = "train",
              sa_splits_file;
  std::size_t sa_num_seq = 0;
  double sa_t_end = 100.0, sa_time_scale = 1.0;
  std::uint64_t sa_seed = 1;
  sa->add_option("--checkpoint", sa_ckpt, "checkpoint path")->required();
  sa->add_option("--num-seq", sa_num_seq, "number of sequences")->required()->check(CLI::PositiveNumber);
  sa->add_option("--t-end", sa_t_end, "window end time");
  sa->add_option("--seed", sa_seed, "master seed");
  sa->add_option("--out", sa_out, "output JSONL path");
  sa->add_option("--report", sa_report, "write sampling statistics JSON here");
  sa->add_option("--data", sa_data, "reference dataset for the sampling report");
  sa->add_option("--split", sa_split, "reference split name");
  sa->add_option("--splits-file", sa_splits_file, "splits JSON for the reference dataset");
  sa->add_option("--time-scale", sa_time_scale, "time scale for the reference dataset");

  // ---- sweep-c ----
  auto* sw = app.add_subcommand("sweep-c", "Train the dependent LNM across mixture counts");
  DataFlags sw_data;
  TrainFlags sw_flags;
  std::string sw_out_dir = "sweep", sw_values = "1,2,4,8,16,32,64";
  add_data_flags(sw, sw_data);
  sw->add_option("--model", sw_flags.model, "decoder kind (default lnm_dep)");
  sw->add_option("--values", sw_values, "comma-separated mixture counts");
  sw->add_option("--out-dir", sw_out_dir, "directory for per-C runs");
  add_train_flags(sw, sw_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1; --help exits 0
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_preset, sim_params, sim_num_seq, sim_t_end, sim_seed, sim_out, sim_kernel,
                          sim_max_events, sim_export_params);

    if (tr->parsed()) {
      TrainConfig config = resolve_train_config(tr, tr_flags);
      const Dataset ds = tr_data.load();
      config.model.num_marks = ds.num_marks;
      const std::uint64_t split_seed = tr_flags.split_seed_set ? tr_flags.split_seed : config.seed;
      const SplitIndices splits = split(ds, 0.6, 0.2, 0.2, split_seed);
      const json summary = train_one(config, ds, splits, tr_out_dir, tr_flags.threads);
      std::cout << summary.dump() << "\n";
      if (summary["diverged"].get<bool>()) {
        std::cerr << "numerical error: validation NLL diverged; kept the last good checkpoint\n";
        return 3;
      }
      return 0;
    }

    if (ev->parsed()) {
      std::string extra_json;
      const Model model = Model::load_checkpoint(ev_ckpt, &extra_json);
      const Dataset ds = ev_data.load();
      if (ds.num_marks != model.config().num_marks)
        throw ValidationError("checkpoint/model mismatch: checkpoint has " +
                              std::to_string(model.config().num_marks) + " marks, dataset has " +
                              std::to_string(ds.num_marks));
      SplitIndices splits;
      if (!ev_splits_file.empty())
        splits = load_split(ev_splits_file);
      else if (ev_split != "all")
        splits = split(ds, 0.6, 0.2, 0.2, ev_split_seed);
      const std::vector<std::size_t> indices = split_for_name(splits, ev_split, ds.size());
      LikelihoodOptions opts;
      opts.use_mc = ev_mc;
      opts.mc_samples = ev_mc_samples;
      opts.mc_seed = ev_mc_seed;
      const SplitEval eval = evaluate_sequences(model, ds, indices, opts, ev_threads);
      const std::string hash = json::parse(extra_json).value("config_hash", "");
      const EvalReport report =
          make_report(eval, ds.num_marks, ev_split, to_string(model.config().kind), hash);
      const std::string text = report_to_json(report);
      if (!ev_out.empty()) write_file(ev_out, text + "\n");
      std::cout << text << "\n";
      return 0;
    }

    if (sa->parsed()) {
      const Model model = Model::load_checkpoint(sa_ckpt);
      log_info("sampling " + std::to_string(sa_num_seq) + " sequences");
      const Dataset generated = sample_dataset(model, sa_num_seq, sa_t_end, sa_seed);
      save_dataset(generated, sa_out);
      json summary;
      summary["out"] = sa_out;
      summary["num_sequences"] = generated.size();
      summary["num_events"] = generated.total_events();
      summary["mean_length"] =
          generated.size() > 0
              ? static_cast<double>(generated.total_events()) / static_cast<double>(generated.size())
              : 0.0;
      if (!sa_data.empty()) {
        Dataset real = load_dataset(sa_data, sa_time_scale);
        real.num_marks = std::max(real.num_marks, model.config().num_marks);
        if (!sa_splits_file.empty()) {
          const SplitIndices splits = load_split(sa_splits_file);
          real = subset(real, split_for_name(splits, sa_split, real.size()));
        }
        const SamplingReport rep = sampling_report(real, generated);
        const std::string text = sampling_report_to_json(rep);
        if (!sa_report.empty()) write_file(sa_report, text + "\n");
        summary["sampling_report"] = json::parse(text);
      }
      std::cout << summary.dump() << "\n";
      return 0;
    }

    if (sw->parsed()) {
      TrainConfig base = resolve_train_config(sw, sw_flags);
      const Dataset ds = sw_data.load();
      base.model.num_marks = ds.num_marks;
      const std::uint64_t split_seed = sw_flags.split_seed_set ? sw_flags.split_seed : base.seed;
      const SplitIndices splits = split(ds, 0.6, 0.2, 0.2, split_seed);

      std::vector<int> values;
      for (std::size_t pos = 0; pos < sw_values.size();) {
        const std::size_t comma = std::min(sw_values.find(',', pos), sw_values.size());
        values.push_back(std::stoi(sw_values.substr(pos, comma - pos)));
        pos = comma + 1;
      }

      json grid = json::array();
      for (int c : values) {
        TrainConfig cfg = base;
        cfg.model.mixture_components = c;
        const std::string run_dir = sw_out_dir + "/C" + std::to_string(c);
        const json summary = train_one(cfg, ds, splits, run_dir, sw_flags.threads);
        json row;
        row["C"] = c;
        row["time_nll"] = summary["test_report"]["time_nll"];
        row["mark_nll"] = summary["test_report"]["mark_nll"];
        row["total_nll"] = summary["test_report"]["total_nll"];
        row["run_dir"] = run_dir;
        grid.push_back(std::move(row));
        log_info("C=" + std::to_string(c) + " done");
      }
      json out;
      out["model"] = to_string(base.model.kind);
      out["grid"] = std::move(grid);
      fs::create_directories(sw_out_dir);
      write_file(sw_out_dir + "/sweep.json", out.dump() + "\n");
      std::cout << out.dump() << "\n";
      return 0;
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
