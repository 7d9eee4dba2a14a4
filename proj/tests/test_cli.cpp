#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "parsimax/cli.hpp"
#include "parsimax/csv.hpp"
#include "test_util.hpp"

using namespace parsimax;
using json = nlohmann::ordered_json;

namespace {

const std::string kFixture = std::string(PARSIMAX_TEST_DATA) + "/fixture.csv";

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("parsimax_" + name);
  std::ofstream(path, std::ios::binary) << contents;
  return path.string();
}

std::vector<std::string> test_args(std::vector<std::string> extra = {}) {
  std::vector<std::string> a{"test", "--input", kFixture, "--y", "y", "--z", "const,z2", "--x", "x1,x2,x3,x4,x5",
                             "--draws", "2000", "--seed", "4"};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

json error_of(const cli::Outcome& o) { return json::parse(o.err).at("error"); }

}  // namespace

TEST_CASE("read_dataset", "[cli][csv]") {
  SECTION("three rows") {
    std::istringstream in("y,z,x\n1,1,0\n2,1,1\n3,1,0\n");
    const Dataset d = read_dataset(in, ColumnSpec{"y", {"z"}, {"x"}});
    CHECK(d.n() == 3);
    CHECK(d.y()(2) == 3.0);
    CHECK(d.x()(1, 0) == 1.0);
  }

  SECTION("quoted fields, CRLF and extra text columns") {
    std::istringstream in("\"y\",\"note, with comma\",z,x\r\n1,\"a \"\"b\"\"\",1,0\r\n2,c,1,1\r\n3,d,1,0\r\n");
    const Dataset d = read_dataset(in, ColumnSpec{"y", {"z"}, {"x"}});
    CHECK(d.n() == 3);
    CHECK(d.y()(0) == 1.0);
  }

  SECTION("missing column") {
    std::istringstream in("y,z\n1,1\n2,1\n3,1\n");
    try {
      read_dataset(in, ColumnSpec{"y", {"z"}, {"x"}});
      FAIL("expected MissingColumn");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::missing_column);
    }
  }

  SECTION("non-numeric cell reports its line") {
    std::istringstream in("y,z,x\n1,1,0\n2,1,abc\n3,1,0\n");
    try {
      read_dataset(in, ColumnSpec{"y", {"z"}, {"x"}});
      FAIL("expected NonNumericCell");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::non_numeric_cell);
      CHECK(*e.index() == 3);
    }
  }

  SECTION("too few rows") {
    std::istringstream in("y,z,x\n1,1,0\n2,1,1\n");
    try {
      read_dataset(in, ColumnSpec{"y", {"z"}, {"x"}});
      FAIL("expected TooFewRows");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::too_few_rows);
    }
  }

  SECTION("file not found") {
    try {
      ingest_csv("/nonexistent/parsimax.csv", ColumnSpec{"y", {"z"}, {"x"}});
      FAIL("expected FileNotFound");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::file_not_found);
    }
  }
}

TEST_CASE("write_dataset round-trips bit for bit", "[cli][csv]") {
  std::mt19937_64 rng(81);
  const Dataset d = parsimax::testing::random_dataset(rng, 40, 2, 3);
  const ColumnSpec spec = default_columns(2, 3);
  std::stringstream buf;
  write_dataset(buf, d, spec);
  const Dataset back = read_dataset(buf, spec);
  CHECK(back.y() == d.y());
  CHECK(back.z() == d.z());
  CHECK(back.x() == d.x());
}

TEST_CASE("test command", "[cli][test]") {
  const cli::Outcome a = cli::run(test_args());
  REQUIRE(a.exit_code == 0);
  const cli::Outcome b = cli::run(test_args());
  CHECK(a.out == b.out);

  const json doc = json::parse(a.out);
  CHECK(doc["command"] == "test");
  CHECK(doc["config_echo"]["draws"] == 2000);
  CHECK(doc["result"]["h"] == 5);
  CHECK(doc["result"]["betas"].size() == 5);
  const double p = doc["result"]["p_value"];
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  CHECK(doc["diagnostics"]["pd_certificate"]["status"] == "positive_definite");
  CHECK(doc["diagnostics"]["sampler_used"] == "cholesky");
  CHECK_FALSE(doc["diagnostics"].contains("timings"));

  // The JSON agrees with the library call.
  const Dataset d = ingest_csv(kFixture, ColumnSpec{"y", {"const", "z2"}, {"x1", "x2", "x3", "x4", "x5"}});
  MaxTestConfig cfg;
  cfg.draws = 2000;
  cfg.seed = 4;
  const MaxTestResult r = run_max_test(d, cfg);
  CHECK(doc["result"]["statistic"].get<double>() == r.statistic);
  CHECK(doc["result"]["p_value"].get<double>() == r.p_value);

  const json ghm = json::parse(cli::run(test_args({"--estimator", "ghm_blockwise"})).out);
  CHECK(ghm["result"]["estimator"] == "ghm_blockwise");
  CHECK(ghm["result"]["statistic"] == doc["result"]["statistic"]);

  const json timed = json::parse(cli::run(test_args({"--timings"})).out);
  CHECK(timed["diagnostics"].contains("timings"));
}

TEST_CASE("worker count does not change CLI output", "[cli][determinism]") {
  const std::vector<std::string> args{"size", "--n", "60", "--h", "4", "--reps", "30", "--draws", "500", "--seed", "9",
                                      "--wald"};
  set_worker_threads(1);
  const cli::Outcome one = cli::run(args);
  set_worker_threads(3);
  const cli::Outcome three = cli::run(args);
  set_worker_threads(0);
  REQUIRE(one.exit_code == 0);
  CHECK(one.out == three.out);
}

TEST_CASE("--output writes the document to a file", "[cli][output]") {
  const auto path = (std::filesystem::temp_directory_path() / "parsimax_out.json").string();
  std::filesystem::remove(path);
  const cli::Outcome o = cli::run(test_args({"--output", path}));
  REQUIRE(o.exit_code == 0);
  CHECK(o.out.empty());
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == cli::run(test_args()).out);
}

TEST_CASE("exit codes", "[cli][errors]") {
  SECTION("alpha outside (0, 1) is a data error") {
    const cli::Outcome o = cli::run(test_args({"--alpha", "1.5"}));
    CHECK(o.exit_code == 2);
    CHECK(o.out.empty());
    CHECK(error_of(o)["kind"] == "InvalidArgument");
  }

  SECTION("unknown estimator") {
    const cli::Outcome o = cli::run(test_args({"--estimator", "nope"}));
    CHECK(o.exit_code == 2);
  }

  SECTION("unknown option and missing subcommand") {
    CHECK(cli::run({"test", "--bogus"}).exit_code == 2);
    CHECK(cli::run({}).exit_code == 2);
    CHECK(cli::run({"--help"}).exit_code == 0);
  }

  SECTION("missing file and missing column") {
    std::vector<std::string> a = test_args();
    a[2] = "/nonexistent/file.csv";
    const cli::Outcome o = cli::run(a);
    CHECK(o.exit_code == 2);
    CHECK(error_of(o)["kind"] == "FileNotFound");
    const cli::Outcome m = cli::run({"test", "--input", kFixture, "--y", "y", "--z", "const", "--x", "x9"});
    CHECK(m.exit_code == 2);
    CHECK(error_of(m)["kind"] == "MissingColumn");
  }

  SECTION("overlapping columns") {
    CHECK(cli::run({"test", "--input", kFixture, "--y", "y", "--z", "const,x1", "--x", "x1"}).exit_code == 2);
  }

  SECTION("rank-deficient design is a numerical error") {
    const std::string path = temp_file("rank.csv", "y,c,z,x\n1,1,2,2\n2,1,3,3\n4,1,1,1\n3,1,5,5\n5,1,0,0\n");
    const cli::Outcome o = cli::run({"test", "--input", path, "--y", "y", "--z", "c,z", "--x", "x"});
    CHECK(o.exit_code == 3);
    CHECK(error_of(o)["kind"] == "RankDeficient");
  }
}

TEST_CASE("experiment commands", "[cli][experiments]") {
  SECTION("size") {
    const cli::Outcome o = cli::run({"size", "--n", "60", "--h", "3", "--reps", "20", "--draws", "500", "--wald"});
    REQUIRE(o.exit_code == 0);
    const json doc = json::parse(o.out);
    CHECK(doc["result"]["replications"] == 20);
    CHECK(doc["result"].contains("wald_rejection_rate"));
    CHECK(doc["config_echo"]["errors"] == "heteroscedastic");
  }

  SECTION("power needs b of length h") {
    CHECK(cli::run({"power", "--n", "60", "--h", "3", "--reps", "10", "--draws", "200", "--b", "0.5,0,0"})
              .exit_code == 0);
    CHECK(cli::run({"power", "--n", "60", "--h", "3", "--reps", "10", "--b", "0.5"}).exit_code == 2);
  }

  SECTION("census") {
    const cli::Outcome o = cli::run({"census", "--n", "40", "--h", "4", "--reps", "20"});
    REQUIRE(o.exit_code == 0);
    const json doc = json::parse(o.out);
    CHECK(doc["result"]["estimators"]["restricted_closed_form"]["pd_failure_count"] == 0);
  }

  SECTION("consistency") {
    const cli::Outcome o = cli::run({"consistency", "--p", "2", "--h", "2", "--n-grid", "100,1000", "--reps", "5"});
    REQUIRE(o.exit_code == 0);
    const json doc = json::parse(o.out);
    CHECK(doc["result"]["frobenius_errors"].size() == 2);
    CHECK(doc["result"]["population_v"].size() == 2);
  }

  SECTION("verify-identities") {
    const cli::Outcome o = cli::run({"verify-identities"});
    REQUIRE(o.exit_code == 0);
    const json doc = json::parse(o.out);
    CHECK(doc["result"]["passed"] == true);
    CHECK(doc["result"]["cases"].size() == 12);
  }
}

TEST_CASE("config file supplies options", "[cli][config]") {
  const std::string path = temp_file("cfg.ini", "[test]\ndraws=2000\nseed=4\n");
  const cli::Outcome o = cli::run({"test", "--input", kFixture, "--y", "y", "--z", "const,z2", "--x",
                                   "x1,x2,x3,x4,x5", "--config", path});
  REQUIRE(o.exit_code == 0);
  CHECK(o.out == cli::run(test_args()).out);
}
