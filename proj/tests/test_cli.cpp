#include <sstream>

#include <doctest.h>

#include "stbn/cli.hpp"
#include "stbn/evalharness.hpp"
#include "stbn/predictor.hpp"
#include "test_support.hpp"

using namespace stbn;
using stbn::testing::read_file;
using stbn::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string small_panel(const TempDir& dir) {
  const auto path = dir.file("panel.csv").string();
  const auto r = cli({"synth", "--sites", "4", "--length", "480", "--seed", "3", "-o", path});
  REQUIRE(r.code == 0);
  return path;
}

const std::vector<std::string> kQuickFit{"--k-max", "2", "--restarts", "2"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("synth writes a default-size panel deterministically") {
  TempDir dir;
  const auto a = dir.file("a.csv").string();
  const auto b = dir.file("b.csv").string();
  const auto ra = cli({"synth", "--seed", "7", "-o", a});
  CHECK(ra.code == 0);
  CHECK(ra.out.find("2400 rows") != std::string::npos);
  CHECK(cli({"synth", "--seed", "7", "-o", b}).code == 0);
  CHECK(read_file(a) == read_file(b));
  const auto panel = load_panel_csv(a);
  CHECK(panel.rows() == 2400);
  CHECK(panel.sites() == 10);
  CHECK(panel == generate_synthetic_network(SyntheticSpec{}, 7));
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({"synth"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  TempDir dir;
  CHECK(cli({"synth", "--delay-min", "5", "--delay-max", "2", "-o", dir.file("x.csv").string()}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("rank writes the ranking and prints cause nodes") {
  TempDir dir;
  const auto panel = small_panel(dir);
  const auto out = dir.file("rank.csv").string();
  const auto r = cli({"rank", "-i", panel, "--target", "S01", "--d", "20", "--k", "3", "-o", out});
  REQUIRE(r.code == 0);
  const auto text = read_file(out);
  CHECK(text.rfind("rank,site,lag,r_signed,score\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 20);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);

  const auto bad = cli({"rank", "-i", panel, "--target", "S99", "-o", out});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("S99") != std::string::npos);

  const auto missing = cli({"rank", "-i", dir.file("none.csv").string(), "--target", "S01", "-o", out});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("MissingFile") != std::string::npos);
}

TEST_CASE("train then forecast matches the library") {
  TempDir dir;
  const auto panel_path = small_panel(dir);
  const auto model = dir.file("model.json").string();
  const auto mc_model = dir.file("mc.json").string();
  const auto r = cli(with({"train", "-i", panel_path, "--target", "S02", "--d", "20", "--k", "3", "--train-len",
                           "400", "-o", model, "--markov-out", mc_model, "--order", "2"},
                          kQuickFit));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mixture components") != std::string::npos);

  const auto panel = load_panel_csv(panel_path);
  const auto train = split_chronological(panel, 400).first;
  FitConfig fit;
  fit.k_max = 2;
  fit.restarts = 2;
  const auto direct = train_stbn(train, "S02", LagConfig{.d = 20, .k = 3}, fit);
  const auto direct_mc = train_markov_chain(train, "S02", 2, fit);

  const auto out = dir.file("fc.csv").string();
  REQUIRE(cli({"forecast", "-m", model, "-i", panel_path, "--start", "400", "-o", out}).code == 0);
  std::istringstream lines(read_file(out));
  std::string line;
  std::getline(lines, line);
  CHECK(line == "t,truth,forecast");
  std::int64_t t = 400;
  while (std::getline(lines, line)) {
    std::istringstream row(line);
    std::string ts, truth, value;
    std::getline(row, ts, ',');
    std::getline(row, truth, ',');
    std::getline(row, value, ',');
    CHECK(std::stoll(ts) == t);
    CHECK(std::stod(truth) == panel.at(static_cast<std::size_t>(t), 2));
    CHECK(std::stod(value) == forecast_stbn(direct, panel, t));
    ++t;
  }
  CHECK(t == 480);

  const auto mc_out = dir.file("mc.csv").string();
  REQUIRE(cli({"forecast", "-m", mc_model, "-i", panel_path, "--start", "470", "--end", "472", "-o", mc_out}).code ==
          0);
  const auto mc_text = read_file(mc_out);
  CHECK(std::count(mc_text.begin(), mc_text.end(), '\n') == 3);
  CHECK(mc_text.find(std::to_string(forecast_markov_chain(direct_mc, panel, 470)).substr(0, 5)) != std::string::npos);

  const auto early = cli({"forecast", "-m", model, "-i", panel_path, "--start", "0", "-o", out});
  CHECK(early.code == 1);
  CHECK(early.err.find("InsufficientHistory") != std::string::npos);
}

TEST_CASE("evaluate prints a table and is reproducible") {
  TempDir dir;
  const auto panel = small_panel(dir);
  const auto a = dir.file("a.csv").string();
  const auto b = dir.file("b.csv").string();
  const std::vector<std::string> common{"evaluate", "-i", panel, "--targets", "S00,S03", "--d", "20", "--k",
                                        "3", "--order", "2", "--train-len", "400"};
  const auto ra = cli(with(with(common, kQuickFit), {"-o", a, "--dump-dir", dir.file("dumps").string()}));
  REQUIRE(ra.code == 0);
  CHECK(ra.out.rfind("Methods", 0) == 0);
  CHECK(ra.out.find("RandomWalk") != std::string::npos);
  CHECK(ra.out.find("MarkovChain") != std::string::npos);
  CHECK(ra.out.find("STBN") != std::string::npos);
  CHECK(ra.out.find("S03") != std::string::npos);
  const auto rb = cli(with(with(common, kQuickFit), {"-o", b}));
  REQUIRE(rb.code == 0);
  CHECK(read_file(a) == read_file(b));
  CHECK(ra.out == rb.out);
  const auto dump = read_file(dir.file("dumps") / "forecast_S00.csv");
  CHECK(dump.rfind("t,truth,rw,mc,stbn\n400,", 0) == 0);

  auto bad_args = with(common, kQuickFit);
  bad_args[4] = "S00,ZZ";
  const auto bad = cli(with(bad_args, {"-o", a}));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("ZZ") != std::string::npos);
}
