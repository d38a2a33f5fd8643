#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "attdmm/cli/commands.hpp"

using namespace attdmm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::dispatch(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("attdmm_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({"gen", "--records", "many"}).code == cli::kUsage);
  const Run r = run({"eval", "--data-dir", "nowhere"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("missing required flag --checkpoint") != std::string::npos);
}

TEST_CASE("data errors") {
  const fs::path dir = scratch("errors");
  CHECK(run({"train", "--data-dir", (dir / "absent").string(), "--out-dir", dir.string()}).code ==
        cli::kData);
  write(dir / "bad.json", R"({"records": 10, "colour": "blue"})");
  const Run r = run({"gen", "--config", (dir / "bad.json").string(), "--out-dir", dir.string()});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("colour") != std::string::npos);
  write(dir / "typed.json", R"({"records": "ten"})");
  CHECK(run({"gen", "--config", (dir / "typed.json").string()}).code == cli::kData);
  fs::remove_all(dir);
}

TEST_CASE("gen is deterministic and flags override the config file") {
  const fs::path dir = scratch("gen");
  write(dir / "gen.json", R"({"records": 500, "min_steps": 4, "max_steps": 8, "feature_dim": 3})");
  const std::string cfg = (dir / "gen.json").string();
  REQUIRE(run({"gen", "--config", cfg, "--records", "25", "--out-dir", (dir / "a").string()}).code == 0);
  REQUIRE(run({"gen", "--config", cfg, "--records", "25", "--out-dir", (dir / "b").string()}).code == 0);
  for (const char* f : {"timeseries.csv", "static.csv", "labels.csv", "synth_truth.json"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const std::string labels = slurp(dir / "a" / "labels.csv");
  CHECK(std::count(labels.begin(), labels.end(), '\n') == 26);
  CHECK(fs::exists(dir / "a" / "run_config.json"));
  fs::remove_all(dir);
}

TEST_CASE("train, eval and score on a small cohort") {
  const fs::path dir = scratch("pipeline");
  write(dir / "gen.json", R"({"records": 60, "min_steps": 26, "max_steps": 30, "feature_dim": 3, "prevalence": 0.35})");
  write(dir / "train.json",
        R"({"latent_dim": 3, "transition_hidden": 6, "emission_hidden": 6, "rnn_dim": 5,
            "attention_dim": 4, "predictor_hidden": 3, "max_epochs": 2, "batch_size": 16, "threads": 1})");
  const std::string data = (dir / "data").string(), run_dir = (dir / "run").string();
  REQUIRE(run({"gen", "--config", (dir / "gen.json").string(), "--out-dir", data}).code == 0);
  const Run t = run({"train", "--config", (dir / "train.json").string(), "--data-dir", data,
                     "--out-dir", run_dir, "--fold", "1"});
  REQUIRE(t.code == 0);
  CHECK(t.out.find("epoch 1 ") != std::string::npos);
  for (const char* f : {"checkpoint.json", "folds.csv", "train_report.json", "run_config.json"}) {
    CHECK(fs::exists(dir / "run" / f));
  }
  const std::string ckpt = (dir / "run" / "checkpoint.json").string();

  SUBCASE("eval writes both curves") {
    const Run e = run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--out-dir",
                       (dir / "eval").string(), "--mc-samples", "2", "--lead-min", "-20", "--threads", "1"});
    REQUIRE(e.code == 0);
    CHECK(slurp(dir / "eval" / "task1.csv").rfind("axis_hours,auroc,auprc,n\n", 0) == 0);
    CHECK(slurp(dir / "eval" / "task2.csv").find("# aggregate_auroc,") != std::string::npos);
  }
  SUBCASE("eval refuses a fold that was used for training") {
    const Run e = run({"eval", "--checkpoint", ckpt, "--data-dir", data, "--out-dir",
                       (dir / "eval").string(), "--fold", "0"});
    CHECK(e.code == cli::kData);
    CHECK(e.err.find("held out") != std::string::npos);
  }
  SUBCASE("score selected records") {
    const Run s = run({"score", "--checkpoint", ckpt, "--data-dir", data, "--out-dir",
                       (dir / "score").string(), "--records", "100003", "100007", "--mc-samples", "5",
                       "--stride", "10"});
    REQUIRE(s.code == 0);
    const std::string csv = slurp(dir / "score" / "risk_scores.csv");
    CHECK(csv.rfind("stay_id,hours_from_admission,mean,ci_low,ci_high\n", 0) == 0);
    CHECK(csv.find("100003,20,") != std::string::npos);
    CHECK(csv.find("100007,") != std::string::npos);
    CHECK(csv.find("100004,") == std::string::npos);
    CHECK(run({"score", "--checkpoint", ckpt, "--data-dir", data, "--out-dir",
               (dir / "score").string(), "--records", "nope"})
              .code == cli::kData);
  }
  fs::remove_all(dir);
}

TEST_CASE("gradcheck and selfcheck succeed") {
  const Run g = run({"gradcheck"});
  CHECK(g.code == 0);
  CHECK(g.out.find("max relative error") != std::string::npos);
  const Run s = run({"selfcheck", "--records", "20", "--mc-samples", "4"});
  CHECK(s.code == 0);
}

}  // TEST_SUITE
