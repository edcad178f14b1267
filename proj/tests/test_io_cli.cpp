#include <doctest.h>

#include "lyap/corpus.hpp"
#include "lyap/io.hpp"
#include "lyap/structure.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#ifndef LYAP_CLI_PATH
#define LYAP_CLI_PATH "lyap"
#endif
#ifndef LYAP_TEST_TMPDIR
#define LYAP_TEST_TMPDIR "."
#endif

namespace {

std::string tmppath(const std::string& name) {
  return std::string(LYAP_TEST_TMPDIR) + "/" + name;
}

int run_cli(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(LYAP_CLI_PATH) + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file;
  cmd += " 2> " + tmppath("stderr.txt");
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("family JSON round-trips bit-exactly") {
  lyap::MatrixFamily fam = lyap::make_derham(1.0 / 3.0);
  fam.matrices[0](0, 0) = 0.1 + 0.2;  // a value with no short decimal form
  const std::string text = lyap::io::family_to_json(fam);
  const lyap::MatrixFamily back = lyap::io::read_family_json(text);
  CHECK(back.dim == fam.dim);
  for (int j = 0; j < fam.size(); ++j) CHECK(back.matrices[j] == fam.matrices[j]);
  CHECK(back.probs == fam.probs);
}

TEST_CASE("family parser rejects malformed input") {
  CHECK_THROWS_AS(lyap::io::read_family_json("not json"), std::invalid_argument);
  CHECK_THROWS_AS(lyap::io::read_family_json(R"({"dim": 2})"), std::invalid_argument);
  // ragged: three entries for a 2x2 matrix
  CHECK_THROWS_WITH_AS(
      lyap::io::read_family_json(R"({"dim": 2, "matrices": [[1, 2, 3]]})"),
      doctest::Contains("row-major"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(
      lyap::io::read_family_json(
          R"({"dim": 1, "matrices": [[1], [2]], "probs": [0.5, 0.6]})"),
      doctest::Contains("do not sum to 1"), std::invalid_argument);
}

TEST_CASE("uniform probabilities are implied when the file omits them") {
  const auto fam = lyap::io::read_family_json(R"({"dim": 1, "matrices": [[2], [8]]})");
  CHECK(fam.probs == std::vector<double>{0.5, 0.5});
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(lyap::io::format_double(0.5) == "0.5");
  CHECK(lyap::io::format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(lyap::io::format_double(0.1 + 0.2) == "0.30000000000000004");
  CHECK(lyap::io::format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("csv schemas are stable") {
  CHECK(lyap::io::bound_report_csv_header() ==
        "kind,k,value,optimized,certificate,wall_time_ms\n");
  CHECK(lyap::io::convergence_csv_header() ==
        "k,lower_kind,lower,upper_kind,upper,gap,rel_gap,mc_mean,mc_stderr,wall_ms\n");

  lyap::BoundReport rep;
  rep.kind = lyap::BoundKind::alpha;
  rep.k = 3;
  rep.value = 0.5;
  rep.certificate = "valid-for-any-parameter";
  CHECK(lyap::io::bound_report_csv_row(rep) ==
        "alpha,3,0.5,false,valid-for-any-parameter,0\n");

  lyap::io::ConvergenceRow row;
  row.k = 2;
  row.lower_kind = "beta";
  row.lower = 1.0;
  row.upper_kind = "alpha";
  row.upper = 1.5;
  row.mc_mean = 1.2;
  row.mc_stderr = 0.01;
  const auto lines = split_lines(lyap::io::convergence_csv({row}));
  REQUIRE(lines.size() == 2);
  const auto cells = split_csv(lines[1]);
  REQUIRE(cells.size() == 10);
  CHECK(cells[5] == "0.5");                      // gap
  CHECK(cells[6] == lyap::io::format_double(0.5 / 1.5));  // rel_gap
}

TEST_CASE("classify json carries the stable structure fields") {
  const auto rep = lyap::classify(lyap::make_sigma6());
  const std::string text =
      lyap::io::classify_json(&rep, true, lyap::io::recommend(lyap::make_sigma6(), &rep));
  CHECK(text.find("\"condition_b\": false") != std::string::npos);
  CHECK(text.find("\"reducible\": false") != std::string::npos);
  CHECK(text.find("\"has_zero_row\": [") != std::string::npos);
  CHECK(text.find("zero rows present") != std::string::npos);
}

TEST_CASE("cli corpus -> classify -> mc -> bounds round trip") {
  const std::string fam_path = tmppath("sigma6.json");
  REQUIRE(run_cli("corpus --name sigma6 --out " + fam_path) == 0);

  // corpus output parses back to the identical family
  const lyap::MatrixFamily onDisk = lyap::io::load_family(fam_path);
  const lyap::MatrixFamily built = lyap::make_sigma6();
  for (int j = 0; j < built.size(); ++j) CHECK(onDisk.matrices[j] == built.matrices[j]);

  const std::string classify_out = tmppath("classify.json");
  REQUIRE(run_cli("classify " + fam_path, classify_out) == 0);
  const std::string text = lyap::io::read_text_file(classify_out);
  CHECK(text.find("\"condition_b\": false") != std::string::npos);
  CHECK(text.find("\"nonnegative\": true") != std::string::npos);

  const std::string mc_out = tmppath("mc.json");
  REQUIRE(run_cli("mc " + fam_path + " -T 500 -N 10 --seed 3", mc_out) == 0);
  CHECK(lyap::io::read_text_file(mc_out).find("\"mean\":") != std::string::npos);

  const std::string csv_path = tmppath("sigma6.csv");
  REQUIRE(run_cli("bounds " + fam_path + " --k 1,2 --seed 5 --mc-length 500 "
                  "--mc-trajectories 10 --out " + csv_path) == 0);
  const auto lines = split_lines(lyap::io::read_text_file(csv_path));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "k,lower_kind,lower,upper_kind,upper,gap,rel_gap,mc_mean,mc_stderr,wall_ms");
  CHECK(split_csv(lines[1])[0] == "1");
  CHECK(split_csv(lines[1])[1] == "beta");
  CHECK(split_csv(lines[1])[3] == "alpha");
  // sidecar with the parameter vectors
  CHECK(lyap::io::read_text_file(csv_path + ".params.json").find("upper_param") !=
        std::string::npos);
}

TEST_CASE("cli bounds on the scalar pair gives gap zero rows") {
  const std::string fam_path = tmppath("scalars.json");
  lyap::io::write_text_file(fam_path, R"({"dim": 1, "matrices": [[2], [8]]})");
  const std::string csv_path = tmppath("scalars.csv");
  REQUIRE(run_cli("bounds " + fam_path + " --k 1,2,3,4 --seed 1 --mc-length 200 "
                  "--mc-trajectories 5 --out " + csv_path) == 0);
  const auto lines = split_lines(lyap::io::read_text_file(csv_path));
  REQUIRE(lines.size() == 5);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_csv(lines[i]);
    CHECK(cells[2] == cells[4]);  // lower == upper
    CHECK(cells[5] == "0");       // gap
  }
}

TEST_CASE("cli exit codes: 2 on invalid input, 3 on -inf lower bounds") {
  CHECK(run_cli("classify " + tmppath("missing.json")) == 2);

  const std::string bad = tmppath("bad.json");
  lyap::io::write_text_file(bad, "{\"dim\": 2}");
  CHECK(run_cli("classify " + bad) == 2);

  // zero column family: beta is -inf, exit 3 points at beta-tilde
  const std::string zc = tmppath("zerocol.json");
  lyap::io::write_text_file(zc, R"({"dim": 2, "matrices": [[2, 0, 1, 0], [3, 0, 1, 0]]})");
  const std::string csv = tmppath("zerocol.csv");
  CHECK(run_cli("bounds " + zc + " --k 1 --seed 1 --out " + csv) == 3);
  // beta-tilde with the structural support succeeds
  CHECK(run_cli("bounds " + zc + " --k 1 --lower beta-tilde --seed 1 --mc-length 200 "
                "--mc-trajectories 5 --out " + csv) == 0);

  // signed family refuses alpha/beta
  const std::string ce = tmppath("counter.json");
  REQUIRE(run_cli("corpus --name counterexample --out " + ce) == 0);
  CHECK(run_cli("bounds " + ce + " --k 1 --seed 1 --out " + csv) == 2);
  CHECK(run_cli("bounds " + ce + " --k 1 --lower none --upper gamma-sdp --seed 1 "
                "--mc-length 200 --mc-trajectories 5 --out " + csv) == 0);
}

TEST_CASE("cli alpha-tilde and the alternative uppers") {
  const std::string fam_path = tmppath("swap.json");
  lyap::io::write_text_file(fam_path,
                            R"({"dim": 2, "matrices": [[0, 2, 3, 0], [0, 1, 5, 0]]})");
  const std::string csv = tmppath("swap.csv");
  REQUIRE(run_cli("bounds " + fam_path + " --k 2,4,12 --upper alpha-tilde --seed 2 "
                  "--mc-length 500 --mc-trajectories 10 --out " + csv) == 0);
  auto lines = split_lines(lyap::io::read_text_file(csv));
  REQUIRE(lines.size() == 4);
  CHECK(split_csv(lines[3])[3] == "alpha_tilde");
  // even-length rows collapse to the exact exponent log(30)/4
  const double lo = std::stod(split_csv(lines[3])[2]);
  const double up = std::stod(split_csv(lines[3])[4]);
  CHECK(std::abs(up - std::log(30.0) / 4.0) < 1e-9);
  CHECK(std::abs(lo - std::log(30.0) / 4.0) < 1e-9);

  // alpha-tilde requires the partition case
  const std::string dense = tmppath("dense.json");
  lyap::io::write_text_file(dense, R"({"dim": 2, "matrices": [[1, 1, 1, 1]]})");
  CHECK(run_cli("bounds " + dense + " --k 1 --upper alpha-tilde --seed 2 --out " +
                csv) == 2);

  for (const std::string upper : {"euclid", "gamma-sdp"}) {
    REQUIRE(run_cli("bounds " + fam_path + " --k 1,2 --upper " + upper +
                    " --seed 2 --mc-length 500 --mc-trajectories 10 --out " + csv) == 0);
    lines = split_lines(lyap::io::read_text_file(csv));
    const double lo2 = std::stod(split_csv(lines[2])[2]);
    const double up2 = std::stod(split_csv(lines[2])[4]);
    CHECK(lo2 <= up2 + 1e-9);
  }
}

TEST_CASE("cli classify reports blocks for reducible families") {
  const std::string fam_path = tmppath("tri.json");
  lyap::io::write_text_file(fam_path,
                            R"({"dim": 2, "matrices": [[1, 1, 0, 2], [2, 1, 0, 1]]})");
  const std::string out = tmppath("tri_classify.json");
  REQUIRE(run_cli("classify " + fam_path, out) == 0);
  const std::string text = lyap::io::read_text_file(out);
  CHECK(text.find("\"reducible\": true") != std::string::npos);
  CHECK(text.find("\"invariant_set\"") != std::string::npos);
  CHECK(text.find("\"blocks\"") != std::string::npos);
  CHECK(text.find("solve the diagonal blocks") != std::string::npos);
}

TEST_CASE("cli mc accepts a start vector") {
  const std::string fam_path = tmppath("fib.json");
  lyap::io::write_text_file(fam_path, R"({"dim": 2, "matrices": [[0, 1, 1, 1]]})");
  const std::string out = tmppath("fib_mc.json");
  REQUIRE(run_cli("mc " + fam_path + " -T 2000 -N 5 --seed 4 --x0 1,0.5", out) == 0);
  const std::string text = lyap::io::read_text_file(out);
  const double golden = std::log((1.0 + std::sqrt(5.0)) / 2.0);
  const auto pos = text.find("\"mean\":");
  REQUIRE(pos != std::string::npos);
  CHECK(std::abs(std::stod(text.substr(pos + 7)) - golden) < 1e-2);
}

TEST_CASE("cli corpus requires a seed for random families") {
  const std::string out = tmppath("rand.json");
  CHECK(run_cli("corpus --name random --dim 4 --out " + out) == 2);
  CHECK(run_cli("corpus --name random --dim 4 --seed 9 --out " + out) == 0);
  CHECK(run_cli("corpus --name random --dim 4 --seed 9 --out " + tmppath("rand2.json")) == 0);
  CHECK(lyap::io::read_text_file(out) == lyap::io::read_text_file(tmppath("rand2.json")));
}
