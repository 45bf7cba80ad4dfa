#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dualhedge/experiment.hpp"

using namespace dualhedge;
namespace fs = std::filesystem;

namespace {

const char* kPutIni = R"([model]
dimension = 1
s0 = 100
sigma = 0.4
rate = 0.06
maturity = 0.5

[grid]
intervals = 4
subticks = 2

[payoff]
kind = put
strike = 100

[basis]
family = local_hypercube
bins = 5

[instruments]
vanilla = true

[run]
paths = 4000
seed_train = 11
seed_oos = 12
seed_pnl = 13
chunk_size = 1000

[ls]
degree = 3
paths = 4000
)";

std::string with(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  if (at == std::string::npos) throw std::logic_error("fixture key not found: " + from);
  return text.replace(at, from.size(), to);
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dualhedge_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesAndBroadcasts) {
  const auto c = parse_config_text(with(with(kPutIni, "dimension = 1\ns0 = 100\nsigma = 0.4",
                                             "dimension = 2\ns0 = 120, 100\nsigma = 0.4"),
                                        "kind = put", "kind = min_put"),
                                   "x");
  EXPECT_EQ(c.model.s0, (std::vector<double>{120.0, 100.0}));
  EXPECT_EQ(c.model.sigma, (std::vector<double>{0.4, 0.4}));
  EXPECT_EQ(c.model.dividend, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(c.grid().size(), 9u);
  EXPECT_EQ(c.run.oos_paths, 4000u);
  EXPECT_EQ(c.pnl.bins, 80u);
  EXPECT_EQ(c.name, "x");
}

TEST(Config, IntegersAcceptScientificNotation) {
  EXPECT_EQ(parse_config_text(with(kPutIni, "paths = 4000\nseed", "paths = 2e6\nseed")).run.paths, 2000000u);
}

TEST(Config, RejectsInvalidConfigs) {
  EXPECT_THROW(parse_config_text(with(kPutIni, "seed_oos = 12", "seed_oos = 11")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "[grid]", "[gridx]")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "sigma = 0.4", "sigma = abc")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "paths = 4000\nseed", "paths = -5\nseed")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "kind = put", "kind = straddle")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "dimension = 1", "dimension = 2")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "intervals = 4", "intervals = 0")), ConfigError);
  EXPECT_THROW(parse_config_text(with(kPutIni, "s0 = 100", "s0 = 100, 90")), ConfigError);
  EXPECT_THROW(parse_config_text("not an ini ["), ConfigError);
}

TEST(Artifacts, HedgeRoundTripsAndRejectsCorruption) {
  const auto cfg = parse_config_text(kPutIni);
  const auto run = train_dual(cfg);
  const auto file = scratch("hedge.alpha");
  save_hedge(file, run.hedge);
  const auto back = load_hedge(file);
  EXPECT_EQ(back.alpha.data, run.hedge.alpha.data);
  EXPECT_EQ(back.alpha.train_seed, std::optional<std::uint64_t>(11));
  EXPECT_EQ(back.mapping.first, run.hedge.mapping.first);
  EXPECT_EQ(back.instruments.size(), 2u);
  EXPECT_EQ(price_out_of_sample(cfg, back).mean, price_out_of_sample(cfg, run.hedge).mean);

  auto bytes = slurp(file);
  bytes[0] = 'X';
  std::ofstream(scratch("bad.alpha"), std::ios::binary) << bytes;
  EXPECT_THROW(load_hedge(scratch("bad.alpha")), ArtifactError);
  std::ofstream(scratch("short.alpha"), std::ios::binary) << slurp(file).substr(0, 100);
  EXPECT_THROW(load_hedge(scratch("short.alpha")), ArtifactError);
  EXPECT_THROW(load_hedge(scratch("missing.alpha")), ArtifactError);
  EXPECT_THROW(load_policy(file), ArtifactError);
}

TEST(Artifacts, PolicyRoundTrips) {
  const auto cfg = parse_config_text(kPutIni);
  const auto r = run_ls(cfg);
  const auto file = scratch("p.policy");
  save_policy(file, r.policy);
  const auto back = load_policy(file);
  EXPECT_EQ(back.policy.coef, r.policy.policy.coef);
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(price_ls(cfg, back.policy).mean, r.price.mean);
}

TEST(Experiment, HedgeShapeMismatchIsAConfigError) {
  const auto cfg = parse_config_text(kPutIni);
  const auto run = train_dual(cfg);
  EXPECT_THROW(price_out_of_sample(parse_config_text(with(kPutIni, "subticks = 2", "subticks = 3")), run.hedge),
               ConfigError);
}

TEST(Experiment, PnlMeanIdentityAndReuseMode) {
  auto cfg = parse_config_text(kPutIni);
  const auto hedge = train_dual(cfg).hedge;
  const auto pol = fit_ls_policy(cfg);
  for (bool reuse : {false, true}) {
    cfg.pnl.reuse_oos = reuse;
    const auto r = run_pnl(cfg, hedge, pol);
    EXPECT_EQ(r.dual.samples.size(), 4000u);
    // mean P&L - (price - LS) is the mean hedge gain at exercise, a centred quantity.
    const double gap = r.dual.mean - (r.price.mean - r.ls.mean);
    EXPECT_LT(std::abs(gap), 4.0 * r.dual.std_error + 4.0 * r.ls.std_error);
  }
  EXPECT_EQ(cfg.pnl.reuse_oos, true);
}

TEST(Experiment, DeltaHedgeBaselineOnlyInOneDimension) {
  auto cfg = parse_config_text(kPutIni);
  cfg.pnl.delta_hedge = true;
  cfg.pnl.tree_steps = 400;
  const auto r = run_pnl(cfg, train_dual(cfg).hedge, fit_ls_policy(cfg));
  ASSERT_TRUE(r.delta.has_value());
  EXPECT_GT(r.delta->variance, 0.0);
}

TEST(Csv, TableIsDeterministicAndWorkerIndependent) {
  const auto a = parse_config_text(kPutIni, "a");
  auto b = a;
  b.run.exec.workers = 3;
  auto strip = [](std::string row) { return row.substr(0, row.rfind(',')); };  // drop wall time
  const auto r1 = format_row(table_row(a));
  const auto r2 = format_row(table_row(a));
  const auto r3 = format_row(table_row(b));
  EXPECT_EQ(strip(r1), strip(r2));
  EXPECT_EQ(strip(r1), strip(r3));
  EXPECT_NE(r1.find(",ok,"), std::string::npos);
}

TEST(Csv, EmptyTableIsHeaderOnly) {
  EXPECT_EQ(table_header(), "name,family,Q,subticks,P,degree,vanilla,U0,U0_se,U0hat,U0hat_se,status,wall_seconds\n");
}

TEST(Csv, FailedRowIsRecorded) {
  auto cfg = parse_config_text(kPutIni, "bad");
  cfg.model.sigma = {-1.0};
  const auto row = table_row(cfg);
  EXPECT_EQ(row.status.rfind("error: ", 0), 0u);
  EXPECT_EQ(row.status.find(','), std::string::npos);
}

TEST(Csv, HistogramAndMetrics) {
  const std::vector<double> v{0.0, 1.0};
  EXPECT_EQ(histogram_csv(histogram(v, 2)), "edge_lo,edge_hi,count\n0,0.5,1\n0.5,1,1\n");
  EXPECT_EQ(metrics_csv({{"mean", 0.25}}), "metric,value\nmean,0.25\n");
}

TEST(Csv, WriteFilesIsAllOrNothing) {
  const auto ok = scratch("w/ok.csv");
  fs::remove(ok);
  const auto blocked = scratch("blocker");
  fs::remove_all(blocked);
  std::ofstream(blocked) << "x";  // a file where a directory is needed
  EXPECT_ANY_THROW(write_files({{ok, "a"}, {blocked / "sub" / "f.csv", "b"}}));
  EXPECT_FALSE(fs::exists(ok));
  write_files({{ok, "a"}});
  EXPECT_EQ(slurp(ok), "a");
}
