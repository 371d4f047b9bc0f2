#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ctphase/csv.hpp"
#include "test_util.hpp"

using ctphase::testing::TempDir;
using ctphase::testing::same_bytes;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(CTPHASE_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train") == 1);                       // missing required flags
  CHECK(run("simulate --out x") == 1);            // missing --n-per-phase
  CHECK(run("train --features f.csv --out m --unknown-flag 1") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("data errors exit with code 2") {
  TempDir dir;
  CHECK(run("extract --manifest " + dir.file("absent.csv") + " --out " +
            dir.file("f.csv")) == 2);
  CHECK(run("predict --model " + dir.file("no_model") + " --features " +
            dir.file("nope.csv") + " --out " + dir.file("p.csv")) == 2);
}

TEST_CASE("the full pipeline runs through the binary with spec'd defaults") {
  TempDir dir;
  const std::string corpus = dir.file("corpus");
  REQUIRE(run("simulate --out " + corpus + " --n-per-phase 6 --seed 7 "
              "--abdomen-only-frac 0.34") == 0);
  REQUIRE(run("extract --manifest " + corpus + "/manifest.csv --coding " + corpus +
              "/organ_coding.txt --out " + dir.file("features.csv")) == 0);
  REQUIRE(run("train --features " + dir.file("features.csv") + " --out " +
              dir.file("model") + " --cv 5 --seed 42") == 0);

  // Defaults land in the saved model: lr 0.05, depth 4, 200 rounds.
  {
    std::ifstream in(dir.file("model") + "/fold_0.json");
    nlohmann::json model;
    in >> model;
    CHECK(model["hyperparams"]["learning_rate"].get<double>() == 0.05);
    CHECK(model["hyperparams"]["max_depth"].get<int>() == 4);
    CHECK(model["hyperparams"]["n_rounds"].get<int>() == 200);
    CHECK(model["trees"].size() == 800);
  }

  REQUIRE(run("predict --model " + dir.file("model") + " --features " +
              dir.file("features.csv") + " --out " + dir.file("pred.csv") +
              " --pi-time") == 0);
  {
    const ctphase::csv::Table pred = ctphase::csv::read_file(dir.file("pred.csv"));
    CHECK(pred.column("pi_time_s") >= 0);
    CHECK(pred.rows.size() == 24);
  }

  REQUIRE(run("evaluate --pred " + dir.file("pred.csv") + " --truth " +
              dir.file("features.csv") + " --out " + dir.file("report.json") +
              " --dataset phantom") == 0);
  {
    std::ifstream in(dir.file("report.json"));
    nlohmann::json report;
    in >> report;
    CHECK(report["dataset"] == "phantom");
    CHECK(report["class_order"].size() == 4);
    CHECK(report["overall_accuracy"].get<double>() > 0.9);
  }

  // Merged 3-class evaluation.
  REQUIRE(run("evaluate --pred " + dir.file("pred.csv") + " --truth " +
              dir.file("features.csv") + " --out " + dir.file("merged.json") +
              " --merge-arterial-venous") == 0);
  {
    std::ifstream in(dir.file("merged.json"));
    nlohmann::json report;
    in >> report;
    CHECK(report["class_order"].size() == 3);
    CHECK(report["class_order"][1] == "arterial_venous");
  }

  // compare: a model against itself gives all-NaN statistics; against a
  // disjoint scan set it is an error.
  REQUIRE(run("compare " + dir.file("pred.csv") + " " + dir.file("pred.csv") +
              " --truth " + dir.file("features.csv") + " --out " +
              dir.file("grid.csv")) == 0);
  {
    const ctphase::csv::Table grid = ctphase::csv::read_file(dir.file("grid.csv"));
    CHECK(grid.rows.size() == 4);
    for (const auto& row : grid.rows) CHECK(row[5] == "NaN");
  }

  // pi-time subcommand appends the column to an existing prediction file.
  REQUIRE(run("pi-time --pred " + dir.file("pred.csv") + " --out " +
              dir.file("pred_time.csv")) == 0);

  // Rerunning evaluate reproduces the report byte for byte.
  REQUIRE(run("evaluate --pred " + dir.file("pred.csv") + " --truth " +
              dir.file("features.csv") + " --out " + dir.file("report2.json") +
              " --dataset phantom") == 0);
  CHECK(same_bytes(dir.file("report.json"), dir.file("report2.json")));
}

TEST_CASE("compare rejects prediction files without a shared scan set") {
  TempDir dir;
  const std::string corpus_a = dir.file("a");
  const std::string corpus_b = dir.file("b");
  REQUIRE(run("simulate --out " + corpus_a + " --n-per-phase 2 --seed 1") == 0);
  REQUIRE(run("extract --manifest " + corpus_a + "/manifest.csv --out " +
              dir.file("fa.csv")) == 0);
  REQUIRE(run("train --features " + dir.file("fa.csv") + " --out " + dir.file("m")) == 0);
  REQUIRE(run("predict --model " + dir.file("m") + " --features " + dir.file("fa.csv") +
              " --out " + dir.file("pa.csv")) == 0);

  // Second prediction file with rewritten scan ids shares nothing.
  {
    const ctphase::csv::Table t = ctphase::csv::read_file(dir.file("pa.csv"));
    std::ofstream out(dir.file("pb.csv"), std::ios::binary);
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      out << (i ? "," : "") << t.header[i];
    }
    out << '\n';
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      auto row = t.rows[r];
      row[0] = "other_" + std::to_string(r);
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << '\n';
    }
  }
  CHECK(run("compare " + dir.file("pa.csv") + " " + dir.file("pb.csv") + " --truth " +
            dir.file("fa.csv") + " --out " + dir.file("g.csv")) == 2);
}
