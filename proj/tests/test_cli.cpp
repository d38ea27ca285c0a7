#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "json.hpp"

#ifndef MVTPP_CLI_PATH
#define MVTPP_CLI_PATH "./mvtpp"
#endif

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string stdout_text;
};

CommandResult run(const std::string& args) {
  const std::string dir = "/tmp/mvtpp_cli_test";
  const std::string cmd = "cd " + dir + " && MVTPP_LOG=quiet " + std::string(MVTPP_CLI_PATH) + " " +
                          args + " 2>/dev/null";
  std::array<char, 4096> buf{};
  CommandResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) result.stdout_text += buf.data();
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

nlohmann::json parse_stdout(const CommandResult& r) {
  REQUIRE(!r.stdout_text.empty());
  return nlohmann::json::parse(r.stdout_text);
}

const std::string kTrainArgs =
    " --hidden-size 8 --embed-size 4 --mixture-components 2 --batch-size 64 --max-epochs 2 --seed 4";

}  // namespace

TEST_CASE("cli pipeline") {
  std::system("rm -rf /tmp/mvtpp_cli_test && mkdir -p /tmp/mvtpp_cli_test");

  SUBCASE("full pipeline with machine-readable stdout") {
    const CommandResult sim =
        run("simulate --preset hawkes_ind --num-seq 80 --t-end 40 --seed 5 --out d.jsonl");
    CHECK(sim.exit_code == 0);
    const nlohmann::json sim_json = parse_stdout(sim);
    CHECK(sim_json["num_sequences"] == 80);
    CHECK(sim_json["num_marks"] == 2);

    SUBCASE("same seed produces identical files") {
      const CommandResult again =
          run("simulate --preset hawkes_ind --num-seq 80 --t-end 40 --seed 5 --out d2.jsonl");
      CHECK(again.exit_code == 0);
      std::ifstream a("/tmp/mvtpp_cli_test/d.jsonl"), b("/tmp/mvtpp_cli_test/d2.jsonl");
      const std::string ta((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
      const std::string tb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
      CHECK(ta == tb);
      CHECK(!ta.empty());
    }

    SUBCASE("train, evaluate twice, sample, self-evaluate") {
      const CommandResult tr = run("train --model lnm_dep --data d.jsonl --out-dir run" + kTrainArgs);
      CHECK(tr.exit_code == 0);
      const nlohmann::json tr_json = parse_stdout(tr);
      CHECK(tr_json["epochs_run"] == 2);

      const CommandResult ev1 =
          run("evaluate --checkpoint run/checkpoint.json --data d.jsonl --splits-file run/splits.json "
              "--split test");
      const CommandResult ev2 =
          run("evaluate --checkpoint run/checkpoint.json --data d.jsonl --splits-file run/splits.json "
              "--split test");
      CHECK(ev1.exit_code == 0);
      CHECK(ev1.stdout_text == ev2.stdout_text);
      const nlohmann::json report = parse_stdout(ev1);
      CHECK(report["model"] == "lnm_dep");
      CHECK(report["config_hash"] == tr_json["config_hash"]);
      for (const char* key : {"time_nll", "mark_nll", "total_nll", "nll_per_time", "micro_f1",
                              "weighted_f1", "num_events", "split"})
        CHECK(report.contains(key));

      const CommandResult sa =
          run("sample --checkpoint run/checkpoint.json --num-seq 30 --t-end 40 --seed 7 --out gen.jsonl "
              "--data d.jsonl --splits-file run/splits.json --split train --report rep.json");
      CHECK(sa.exit_code == 0);
      const nlohmann::json sa_json = parse_stdout(sa);
      CHECK(sa_json["num_sequences"] == 30);
      CHECK(sa_json.contains("sampling_report"));

      // generated data reads back through evaluate (pipeline smoke)
      const CommandResult self =
          run("evaluate --checkpoint run/checkpoint.json --data gen.jsonl --split all --num-marks 2");
      CHECK(self.exit_code == 0);
    }
  }
}

TEST_CASE("cli error contract") {
  std::system("mkdir -p /tmp/mvtpp_cli_test");
  SUBCASE("usage error exits 1") {
    CHECK(run("simulate --num-seq 0 --out x.jsonl").exit_code == 1);
    CHECK(run("nonsense").exit_code == 1);
  }
  SUBCASE("validation error exits 2") {
    CHECK(run("train --model lnm --data missing_file.jsonl --out-dir r").exit_code == 2);
    CHECK(run("simulate --preset bogus --num-seq 5 --out x.jsonl").exit_code == 2);
  }
  SUBCASE("checkpoint mismatch is detected via metadata") {
    std::system("cd /tmp/mvtpp_cli_test && MVTPP_LOG=quiet " MVTPP_CLI_PATH
                " simulate --preset hawkes_dep2 --kernel alpha --num-seq 6 --t-end 5 --seed 1 "
                "--out k5.jsonl >/dev/null 2>&1");
    const CommandResult r =
        run("evaluate --checkpoint run/checkpoint.json --data k5.jsonl --split all");
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("sweep-c emits one grid row per mixture count") {
  std::system("rm -rf /tmp/mvtpp_cli_test && mkdir -p /tmp/mvtpp_cli_test");
  REQUIRE(run("simulate --preset hawkes_dep1 --num-seq 50 --t-end 25 --seed 8 --out d.jsonl").exit_code ==
          0);
  const CommandResult sw = run("sweep-c --data d.jsonl --values 1,2 --out-dir sweep" + kTrainArgs);
  CHECK(sw.exit_code == 0);
  const nlohmann::json j = parse_stdout(sw);
  REQUIRE(j["grid"].size() == 2);
  CHECK(j["grid"][0]["C"] == 1);
  CHECK(j["grid"][1]["C"] == 2);
  CHECK(j["grid"][0].contains("time_nll"));
  CHECK(j["grid"][0].contains("mark_nll"));
  std::ifstream f("/tmp/mvtpp_cli_test/sweep/sweep.json");
  CHECK(f.good());
}

TEST_CASE("config file merges under explicit flags") {
  std::system("rm -rf /tmp/mvtpp_cli_test && mkdir -p /tmp/mvtpp_cli_test");
  {
    std::ofstream cfg("/tmp/mvtpp_cli_test/cfg.json");
    cfg << R"({"model":"cp","hidden_size":8,"embed_size":4,"batch_size":16,"max_epochs":2,"seed":3})";
  }
  const CommandResult sim =
      run("simulate --preset hawkes_ind --num-seq 40 --t-end 30 --seed 2 --out d.jsonl");
  REQUIRE(sim.exit_code == 0);
  // --max-epochs on the command line wins over the config file
  const CommandResult tr = run("train --data d.jsonl --config cfg.json --max-epochs 1 --out-dir rc");
  CHECK(tr.exit_code == 0);
  const nlohmann::json j = parse_stdout(tr);
  CHECK(j["epochs_run"] == 1);
  CHECK(j["test_report"]["model"] == "cp");

  std::ifstream persisted("/tmp/mvtpp_cli_test/rc/config.json");
  nlohmann::json pj;
  persisted >> pj;
  CHECK(pj["batch_size"] == 16);
  CHECK(pj["max_epochs"] == 1);
}
