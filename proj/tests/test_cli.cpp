#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crowdlab/crowdlab.hpp"

namespace fs = std::filesystem;
using namespace crowdlab;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("crowdlab_cli_test_" + std::to_string(++counter));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(CROWDLAB_BIN_PATH) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int rc = std::system(cmd.c_str());
  return {rc == 0 ? 0 : 1, slurp(out), slurp(err)};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("cli aggregate with majority voting") {
  const fs::path dir = scratch_dir();
  write_file(dir / "labels.csv",
             "worker_id,item_id,label\n"
             "a,q1,1\na,q2,-1\n"
             "b,q1,1\nb,q2,-1\n"
             "c,q1,-1\nc,q2,-1\n");
  write_file(dir / "gold.csv", "item_id,label\nq1,1\nq2,1\n");

  auto res = run_cli(dir, "aggregate --method mv --labels " + (dir / "labels.csv").string() +
                              " --gold " + (dir / "gold.csv").string() + " --out " +
                              (dir / "pred.csv").string());
  REQUIRE(res.exit_code == 0);
  CHECK(slurp(dir / "pred.csv") == "item_id,label\nq1,1\nq2,-1\n");
  auto j = nlohmann::json::parse(res.out);
  CHECK(j["error_rate"].get<double>() == 0.5);
  CHECK(j["items_scored"].get<int>() == 2);
}

TEST_CASE("cli rejects malformed input with a line diagnostic") {
  const fs::path dir = scratch_dir();
  write_file(dir / "labels.csv",
             "worker_id,item_id,label\n"
             "a,q1,1\n"
             "a,q1,-1\n");
  auto res = run_cli(dir, "aggregate --method mv --labels " + (dir / "labels.csv").string() +
                              " --out " + (dir / "pred.csv").string());
  CHECK(res.exit_code != 0);
  CHECK(res.err.find("labels.csv:3") != std::string::npos);
  CHECK(res.err.find("duplicate") != std::string::npos);
}

TEST_CASE("cli simulate/aggregate round trip reproduces the in-process oracle") {
  const fs::path dir = scratch_dir();
  const std::string prefix = (dir / "sim").string();
  auto sim = run_cli(dir, "simulate --workers 7 --items 60 --q 0.7 --beta-mean 0.72 --balanced "
                          "--seed 99 --out-prefix " +
                              prefix);
  REQUIRE(sim.exit_code == 0);

  auto agg = run_cli(dir, "aggregate --method oracle-map --labels " + prefix + "_labels.csv" +
                              " --params " + prefix + "_params.json --gold " + prefix +
                              "_gold.csv --out " + (dir / "pred.csv").string());
  REQUIRE(agg.exit_code == 0);

  // Rebuild the same generation in-process and compare label by label.
  CrowdGenerator gen;
  gen.num_workers = 7;
  gen.num_items = 60;
  gen.balanced_classes = true;
  gen.accuracy_beta = BetaSpec{beta_alpha_for_mean(0.72, 2.0), 2.0};
  gen.sampling = SamplingDesign::constant(0.7);
  gen.seed = 99;
  auto data = generate(gen);
  Prediction expected = predict(oracle_map_rule(*data.one_coin), data.labels);

  int observed_items = 0;
  for (int j = 0; j < 60; ++j)
    if (!data.labels.item_entries(j).empty()) ++observed_items;

  std::istringstream pred_csv(slurp(dir / "pred.csv"));
  std::string line;
  std::getline(pred_csv, line);
  REQUIRE(line == "item_id,label");
  int rows = 0;
  while (std::getline(pred_csv, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    REQUIRE(line[0] == 'i');
    const int item = std::stoi(line.substr(1, comma - 1));
    REQUIRE(line.substr(comma + 1) == std::to_string(int(expected.labels[item])));
    ++rows;
  }
  CHECK(rows == observed_items);

  // Determinism: the same invocation is byte-identical.
  auto sim2 = run_cli(dir, "simulate --workers 7 --items 60 --q 0.7 --beta-mean 0.72 --balanced "
                           "--seed 99 --out-prefix " +
                               prefix + "2");
  REQUIRE(sim2.exit_code == 0);
  CHECK(slurp(prefix + "_labels.csv") == slurp(prefix + "2_labels.csv"));
  CHECK(slurp(prefix + "_gold.csv") == slurp(prefix + "2_gold.csv"));
  CHECK(slurp(prefix + "_params.json") == slurp(prefix + "2_params.json"));
}

TEST_CASE("cli bound emits a report JSON matching the library") {
  const fs::path dir = scratch_dir();
  write_file(dir / "params.json", R"({"w": [0.8, 0.7, 0.9], "pi": 0.5, "q": 0.8})");
  auto res = run_cli(dir, "bound --method oracle-map --params " + (dir / "params.json").string());
  REQUIRE(res.exit_code == 0);
  auto j = nlohmann::json::parse(res.out);

  OneCoinParams p({0.8, 0.7, 0.9}, 0.5, SamplingDesign::constant(0.8));
  BoundReport expected = oracle_map_report(p);
  CHECK(j["t1"].get<double>() == expected.t1);
  CHECK(j["combined_upper"].get<double>() == *expected.combined_upper);

  auto bad = run_cli(dir, "bound --method nonsense --params " + (dir / "params.json").string());
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("unknown bound method") != std::string::npos);
}

TEST_CASE("cli map-plugin bound from labels and gold") {
  const fs::path dir = scratch_dir();
  const std::string prefix = (dir / "rte").string();
  REQUIRE(run_cli(dir, "simulate --workers 20 --items 80 --q 0.4 --beta-mean 0.8 --seed 3 "
                       "--out-prefix " +
                           prefix)
              .exit_code == 0);
  auto res = run_cli(dir, "bound --method map-plugin --labels " + prefix + "_labels.csv --gold " +
                              prefix + "_gold.csv --out " + (dir / "report.json").string());
  REQUIRE(res.exit_code == 0);
  auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["estimated"].get<bool>());
  CHECK(j.contains("combined_upper"));
}

TEST_CASE("cli experiment sweeps write CSV tables") {
  const fs::path dir = scratch_dir();
  auto fig_a = run_cli(dir,
                       "experiment fig-a --workers 5 --items 30 --reps 3 --wbar-min 0.6 "
                       "--wbar-max 0.8 --wbar-step 0.1 --seed 7 --out " +
                           (dir / "fig_a.csv").string());
  REQUIRE(fig_a.exit_code == 0);
  const std::string table = slurp(dir / "fig_a.csv");
  CHECK(table.starts_with("wbar,err_mv"));
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);  // header + 3 grid points

  const std::string prefix = (dir / "data").string();
  REQUIRE(run_cli(dir, "simulate --workers 10 --items 50 --q 0.5 --beta-mean 0.75 --seed 5 "
                       "--out-prefix " +
                           prefix)
              .exit_code == 0);
  auto fig_b = run_cli(dir, "experiment fig-b --labels " + prefix + "_labels.csv --gold " +
                               prefix + "_gold.csv --x-min 0.5 --x-max 1.0 --x-step 0.25 "
                               "--reps 3 --seed 11 --out " +
                               (dir / "fig_b.csv").string());
  REQUIRE(fig_b.exit_code == 0);
  CHECK(slurp(dir / "fig_b.csv").starts_with("x,err_mv"));

  auto fig_c = run_cli(dir,
                       "experiment fig-c --workers 15 --items 40 --reps 2 --wbar-max 0.75 "
                       "--wbar-step 0.02 --seed 13 --out " +
                           (dir / "fig_c.csv").string());
  REQUIRE(fig_c.exit_code == 0);
  CHECK(slurp(dir / "fig_c.csv").starts_with("wbar,err_mv"));
}
