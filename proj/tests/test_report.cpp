#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvn/report/run.hpp"

using namespace mvn;
using namespace mvn::report;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("mvn_report_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  [[nodiscard]] std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

struct Captured {
  int code = 0;
  std::string out;
  std::string err;
};

Captured invoke(const std::vector<std::string>& args, WriteHooks hooks = {}) {
  std::ostringstream out, err;
  RunIo io{&out, &err, std::move(hooks)};
  Captured c;
  c.code = main_entry(args, io);
  c.out = out.str();
  c.err = err.str();
  return c;
}

nlohmann::json config_echo(const std::vector<std::string>& args) { return parse_config(args).echo(); }

}  // namespace

TEST(Config, SpikeDefaultsEqualExplicitFlags) {
  const auto implicit = config_echo({"spike"});
  const auto explicit_ = config_echo({"spike", "--beta1", "0.9", "--beta2", "0.6", "--eps", "1e-8",
                                      "--kinds", "adam", "adabelief", "laprop", "mvn-grad", "--M",
                                      "100", "10000", "1000000", "--u", "0.001", "--T", "1000"});
  EXPECT_EQ(implicit, explicit_);
}

TEST(Config, RangeErrorsNameTheKey) {
  try {
    parse_config({"spike", "--beta1", "1.5"});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("beta1", 0), 0u) << e.what();
  }
  EXPECT_THROW(parse_config({"spike", "--bogus", "1"}), ConfigError);
  EXPECT_THROW(parse_config({}), ConfigError);
  EXPECT_THROW(parse_config({"vgap", "--eta", "0.1"}), ConfigError);
}

TEST(Config, HelpAndVersion) {
  const Captured h = invoke({"spike", "--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("--beta1"), std::string::npos);
  const Captured v = invoke({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
}

TEST(Config, KeyValueFileWithCliOverride) {
  TempDir dir("kv");
  spit(dir.file("run.ini"),
       "# comment\n[spike]\nbeta1 = 0.8\nbeta2=0.5\neps_s = 1e-12\nM = 10 1000\n");
  const RunConfig c = parse_config({"spike", "--config", dir.file("run.ini"), "--beta2", "0.4"});
  EXPECT_EQ(c.hp.beta1, 0.8);
  EXPECT_EQ(c.hp.beta2, 0.4);
  EXPECT_EQ(c.hp.eps_s, 1e-12);
  EXPECT_EQ(c.M, (std::vector<double>{10.0, 1000.0}));

  spit(dir.file("run.json"), R"({"M": [10, 100, 1000], "kinds": ["adam", "laprop"]})");
  const RunConfig j = parse_config({"spike", "--config", dir.file("run.json")});
  EXPECT_EQ(j.M, (std::vector<double>{10.0, 100.0, 1000.0}));
  EXPECT_EQ(j.kinds, (std::vector<OptimizerKind>{OptimizerKind::adam(), OptimizerKind::laprop()}));
}

TEST(Config, JsonFile) {
  TempDir dir("json");
  spit(dir.file("run.json"), R"({"subcommand": "vgap", "beta1": 0.7, "K": 500, "law": "uniform"})");
  const RunConfig c = parse_config({"vgap", "--config", dir.file("run.json")});
  EXPECT_EQ(c.hp.beta1, 0.7);
  EXPECT_EQ(c.K, 500u);
  EXPECT_EQ(c.law, NoiseLaw::Uniform);
  EXPECT_THROW(parse_config({"spike", "--config", dir.file("run.json")}), ConfigError);
}

TEST(Config, UnknownFileKeyRejected) {
  TempDir dir("unknown");
  spit(dir.file("bad.ini"), "beta1 = 0.8\nwarmup = 10\n");
  try {
    parse_config({"spike", "--config", dir.file("bad.ini")});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("warmup"), std::string::npos);
  }
  // Keys of other subcommands are unknown too.
  spit(dir.file("other.ini"), "K = 10\n");
  EXPECT_THROW(parse_config({"spike", "--config", dir.file("other.ini")}), ConfigError);
  EXPECT_THROW(parse_config({"spike", "--config", dir.file("missing.ini")}), Error);
}

TEST(Records, FormatDoubleRoundTrips) {
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(r.normal(), static_cast<int>(r.below(200)) - 100);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(json_cell(Value(std::nan(""))), "null");
  EXPECT_EQ(json_cell(Value()), "null");
}

TEST(Records, EmptyTableWritesHeaderAndSidecar) {
  TempDir dir("empty");
  RecordTable t;
  t.columns = {{"kind", Role::Key}, {"seed", Role::Seed}, {"x", Role::Metric}};
  emit(t, dir.file("out.csv"), OutputFormat::Csv, nlohmann::json{{"rows", 0}});
  EXPECT_EQ(slurp(dir.file("out.csv")), "kind,seed,x\n");
  EXPECT_TRUE(fs::exists(dir.file("out.csv.meta.json")));
  emit(t, dir.file("out.json"), OutputFormat::Json, nlohmann::json{});
  EXPECT_EQ(nlohmann::json::parse(slurp(dir.file("out.json"))), nlohmann::json::array());
}

TEST(Records, UnknownColumnRejected) {
  RecordTable t;
  t.columns = {{"a", Role::Metric}};
  ExperimentRecord r;
  r.set("b", 1.0);
  t.rows.push_back(r);
  EXPECT_THROW(t.check_homogeneous(), ConfigError);
}

TEST(Records, JsonRoundTripIsExact) {
  RecordTable t;
  t.columns = {{"k", Role::Key}, {"x", Role::Metric}, {"n", Role::Metric}, {"ok", Role::Flag},
               {"e", Role::Metric}};
  ExperimentRecord r;
  r.set("k", "adam").set("x", 0.1 + 0.2).set("n", 42).set("ok", true).set("e", std::optional<double>());
  t.rows.push_back(r);
  const auto j = nlohmann::json::parse(render(t, OutputFormat::Json));
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["k"], "adam");
  EXPECT_EQ(j[0]["x"].get<double>(), 0.1 + 0.2);
  EXPECT_EQ(j[0]["n"], 42);
  EXPECT_EQ(j[0]["ok"], true);
  EXPECT_TRUE(j[0]["e"].is_null());
  EXPECT_EQ(render(t, OutputFormat::Csv), "k,x,n,ok,e\nadam,0.30000000000000004,42,true,\n");
}

TEST(Records, InterruptedWriteLeavesNoFinalFile) {
  TempDir dir("atomic");
  const std::string out = dir.file("spike.csv");
  WriteHooks hooks;
  hooks.on_row = [](std::size_t row) {
    if (row == 2) throw IoError("injected failure");
  };
  const Captured c = invoke({"spike", "--output", out}, hooks);
  EXPECT_EQ(c.code, 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_TRUE(fs::exists(out + ".partial"));
  EXPECT_NE(c.err.find("injected failure"), std::string::npos);
}

TEST(Records, AggregateGroupsBySweepKeys) {
  TempDir dir("agg");
  const std::string out = dir.file("vgap.csv");
  const Captured c = invoke({"vgap", "--K", "2000", "--n-inner", "2000", "--seeds", "1", "2", "3",
                             "--output", out, "--aggregate"});
  ASSERT_EQ(c.code, 0) << c.err;
  const std::string agg = slurp(dir.file("vgap.agg.csv"));
  std::istringstream lines(agg);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(header.rfind("law,n_seeds,", 0), 0u) << header;
  EXPECT_EQ(row.rfind("gaussian,3,", 0), 0u) << row;
  EXPECT_NE(header.find("mc_gap_mean"), std::string::npos);
  EXPECT_NE(header.find("mc_gap_std"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.file("vgap.agg.csv.meta.json")));
}

TEST(Run, RerunsAreByteIdentical) {
  TempDir dir("rerun");
  for (const std::string fmt : {"csv", "json"}) {
    const std::vector<std::string> args{"spike", "--seeds", "1", "2", "--format", fmt};
    const Captured a = invoke(args);
    const Captured b = invoke(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_FALSE(a.out.empty());
  }
}

TEST(Run, SidecarEchoesEveryKey) {
  TempDir dir("echo");
  const std::string out = dir.file("base.csv");
  ASSERT_EQ(invoke({"spike", "--output", out}).code, 0);
  const auto base = nlohmann::json::parse(slurp(out + ".meta.json"));
  EXPECT_EQ(base["rng_algorithm"], std::string(Rng::algorithm));
  EXPECT_EQ(base["version"], kVersion);
  EXPECT_TRUE(base.contains("timestamp"));

  const std::vector<std::vector<std::string>> perturb{
      {"--beta1", "0.8"}, {"--beta2", "0.5"}, {"--eps", "1e-7"}, {"--eps-s", "1e-9"},
      {"--eta", "0.5"},   {"--u", "0.002"},   {"--dbar", "2"},   {"--M", "100", "1000"},
      {"--kinds", "adam"}, {"--lambda", "0.1", "--decay", "decoupled"}, {"--bias-correction"},
      {"--seeds", "5"}};
  for (const auto& extra : perturb) {
    std::vector<std::string> args{"spike", "--output", dir.file("p.csv")};
    args.insert(args.end(), extra.begin(), extra.end());
    invoke(args);
    const auto meta = nlohmann::json::parse(slurp(dir.file("p.csv.meta.json")));
    EXPECT_NE(meta["config"], base["config"]) << extra.front();
  }
  invoke({"spike", "--T", "1001", "--output", dir.file("t.csv")});
  EXPECT_EQ(nlohmann::json::parse(slurp(dir.file("t.csv.meta.json")))["config"]["T"], 1001);
}

TEST(Run, ExitCodes) {
  EXPECT_EQ(invoke({"spike"}).code, 0);
  // 50 steps end before the normalizer forgets a 1e6 spike, so the peaks of
  // the bounded kinds still depend on M and the independence flag fails.
  EXPECT_EQ(invoke({"spike", "--T", "50"}).code, 1);
  EXPECT_EQ(invoke({"bounds"}).code, 0);
  EXPECT_EQ(invoke({"vgap", "--K", "2000", "--n-inner", "2000"}).code, 0);
  EXPECT_EQ(invoke({"separation", "--T", "30"}).code, 0);
  EXPECT_EQ(invoke({"separation", "--eta", "2"}).code, 2);
  EXPECT_EQ(invoke({"spike", "--beta1", "abc"}).code, 2);
  EXPECT_EQ(invoke({"vgap", "--law", "cauchy"}).code, 2);
  EXPECT_EQ(invoke({"train", "--mnist-images", "/nonexistent", "--mnist-labels", "/nonexistent"}).code, 2);
  EXPECT_EQ(invoke({"spike", "--output", "/nonexistent/dir/x.csv"}).code, 2);

  // A two-draw closed-form reference is too crude to agree with a 1e5-draw
  // estimate, so the agreement flag fails.
  const Captured fail = invoke({"vgap", "--n-inner", "2"});
  EXPECT_EQ(fail.code, 1) << fail.err;
  EXPECT_NE(fail.err.find("assertion"), std::string::npos);
  EXPECT_NE(fail.out.find("false"), std::string::npos);
}
