#include "powerq/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <vector>

using namespace powerq;

namespace {

const std::string kData = POWERQ_TEST_DATA;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "powerq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) cells.push_back(cell);
  return cells;
}

}  // namespace

TEST(Config, RoundTripIsIdentity) {
  const auto cfg = load_config(kData + "/ref.json");
  const auto again = parse_config(to_json(cfg));
  EXPECT_EQ(cfg, again);
  EXPECT_EQ(to_json(again).dump(), to_json(cfg).dump());

  auto with_policy = cfg;
  with_policy.policy = Policy{2, SpeedThreshold::infinite(), kInf};
  with_policy.lambda_range = Interval{0.1, 0.2};
  with_policy.params.lambda = 0.3;
  with_policy.has_lambda = true;
  EXPECT_EQ(parse_config(to_json(with_policy)), with_policy);
}

TEST(Config, DefaultsDerivePowerLevels) {
  const auto cfg = parse_config_text(R"({"params": {"c": 3, "p_slow": 2}})");
  EXPECT_DOUBLE_EQ(cfg.params.p_fast, 18.0);
  EXPECT_DOUBLE_EQ(cfg.params.p_setup, 18.0);
  EXPECT_FALSE(cfg.has_lambda);
}

TEST(Config, StrictParsing) {
  EXPECT_THROW((void)load_config(kData + "/unknown_key.json"), ConfigError);
  EXPECT_THROW((void)parse_config_text("{"), ConfigError);
  EXPECT_THROW((void)parse_config_text(R"({"params": {"mu": "fast"}})"), ConfigError);
  EXPECT_THROW((void)parse_config_text(R"({"policy": {"k2": 2.5}})"), ConfigError);
  EXPECT_EQ(parse_config_text(R"({"policy": {"k2": "inf", "alpha": "inf"}})").policy,
            (Policy{1, SpeedThreshold::infinite(), kInf}));
}

TEST(Cli, EvalMM1GivesClosedForm) {
  const auto r = run_cli({"eval", "--config", kData + "/mm1.json", "--lambda", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::stringstream ss(r.out);
  std::string header;
  std::string row;
  std::getline(ss, header);
  std::getline(ss, row);
  EXPECT_EQ(header, "lambda,k1,k2,alpha,regime,E_N,E_R,E_P,cost,residual,q_max,tail_mass");
  const auto cells = split(row, ',');
  ASSERT_EQ(cells.size(), 12U);
  EXPECT_NEAR(std::stod(cells[6]), 2.0, 1e-8);
  EXPECT_EQ(cells[4], "SlowOnlyAlwaysOn");
}

TEST(Cli, JsonFormat) {
  const auto r = run_cli({"eval", "--config", kData + "/mm1.json", "--lambda", "0.5", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("E_R").get<double>(), 2.0, 1e-8);
}

TEST(Cli, OutputIsDeterministic) {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = (dir / "powerq_cli_a.csv").string();
  const auto b = (dir / "powerq_cli_b.csv").string();
  const std::vector<std::string> common = {"--config", kData + "/ref.json", "--lambda-range", "0.2:1.2"};
  auto args_a = std::vector<std::string>{"sweep"};
  args_a.insert(args_a.end(), common.begin(), common.end());
  auto args_b = args_a;
  args_a.insert(args_a.end(), {"--out", a, "--jobs", "1"});
  args_b.insert(args_b.end(), {"--out", b, "--jobs", "3"});
  const auto ra = run_cli(args_a);
  const auto rb = run_cli(args_b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_FALSE(ra.out.empty());  // summary goes to stdout when --out is set
  std::ifstream fa(a, std::ios::binary);
  std::ifstream fb(b, std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(fa)), {});
  const std::string cb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_FALSE(ca.empty());
  EXPECT_EQ(ca, cb);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Cli, SimulateIsReproducible) {
  const std::vector<std::string> args = {"simulate", "--config", kData + "/ref.json", "--lambda", "0.6", "--seed", "9"};
  // ref.json has no policy: usage error
  EXPECT_EQ(run_cli(args).code, 2);
  const std::vector<std::string> mm1 = {"simulate", "--config", kData + "/mm1.json", "--lambda", "0.5", "--seed", "9"};
  const auto a = run_cli(mm1);
  const auto b = run_cli(mm1);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"eval", "--config", kData + "/mm1.json", "--bogus"}).code, 2);
  EXPECT_EQ(run_cli({"eval"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--config", kData + "/missing.json", "--lambda", "0.5"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--config", kData + "/unknown_key.json", "--lambda", "0.5"}).code, 2);
  EXPECT_EQ(run_cli({"eval", "--config", kData + "/mm1.json"}).code, 2);  // no lambda
  EXPECT_EQ(run_cli({"sweep", "--config", kData + "/mm1.json", "--lambda-range", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);

  const auto unstable = run_cli({"eval", "--config", kData + "/mm1.json", "--lambda", "1.5"});
  EXPECT_EQ(unstable.code, 1);
  EXPECT_NE(unstable.err.find("Unstable"), std::string::npos);
}

TEST(Cli, UsageErrorNamesTheFlag) {
  const auto r = run_cli({"eval", "--config", kData + "/mm1.json", "--lamda", "0.5"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--lamda"), std::string::npos);
}

TEST(Cli, ThresholdsReportsStructure) {
  const auto r = run_cli({"thresholds", "--config", kData + "/ref.json", "--lambda-range", "0.05:1.9", "--resolution",
                          "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("kind,"), std::string::npos);
  EXPECT_NE(r.out.find("structure_violation"), std::string::npos);
}

TEST(Cli, ValidatePasses) {
  const auto r = run_cli({"validate", "--config", kData + "/ref.json", "--out",
                          (std::filesystem::temp_directory_path() / "powerq_checks.csv").string()});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("checks passed"), std::string::npos);
}
