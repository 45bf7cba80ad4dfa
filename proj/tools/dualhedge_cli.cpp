// dualhedge: batch runner for the dual pricing and hedging experiments.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualhedge/experiment.hpp"

namespace fs = std::filesystem;
using namespace dualhedge;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed_train, seed_oos, seed_pnl;
  std::optional<std::size_t> workers, chunk_size;
  std::optional<std::string> out;
};

ExperimentConfig load(const std::string& file, const Overrides& o) {
  auto c = load_config(file);
  if (o.seed_train) c.run.seed_train = *o.seed_train;
  if (o.seed_oos) c.run.seed_oos = *o.seed_oos;
  if (o.seed_pnl) c.run.seed_pnl = *o.seed_pnl;
  if (o.workers) c.run.exec.workers = *o.workers;
  if (o.chunk_size) c.run.exec.chunk_size = *o.chunk_size;
  if (o.out) c.output_dir = *o.out;
  validate(c);
  return c;
}

fs::path out_file(const ExperimentConfig& c, const std::string& suffix) {
  return fs::path(c.output_dir) / (c.name + suffix);
}

void print(const std::string& title, const Metrics& m) {
  std::cout << title << '\n';
  for (const auto& [k, v] : m) std::cout << "  " << k << " = " << fmt(v) << '\n';
}

int simulate_check(const ExperimentConfig& c) {
  const auto paths = simulate_paths(c.model, c.grid(), c.run.paths, c.run.seed_train, c.simulation());
  const auto last = c.grid().size() - 1;
  Metrics m;
  bool finite = true;
  for (std::size_t k = 0; k < c.model.dimension(); ++k) {
    const auto e = estimate_mean(tradable_value(paths, last, k));
    const std::string a = std::to_string(k);
    m.push_back({"tradable_mean_" + a, e.mean});
    m.push_back({"tradable_se_" + a, e.std_error});
    m.push_back({"tradable_z_" + a, e.std_error > 0.0 ? (e.mean - c.model.s0[k]) / e.std_error : 0.0});
    finite = finite && std::isfinite(e.mean);
  }
  const auto z = reward_matrix(c.payoff, paths, c.run.exec);
  std::vector<double> terminal(z.paths);
  for (std::size_t q = 0; q < z.paths; ++q) terminal[q] = z.at(q, z.dates - 1);
  const auto e = estimate_mean(terminal);
  m.push_back({"european_payoff_mean", e.mean});
  m.push_back({"european_payoff_se", e.std_error});
  m.push_back({"negative_payoff_clamps", static_cast<double>(negative_payoff_clamps())});
  write_files({{out_file(c, "_simulate_check.csv"), metrics_csv(m)}});
  print("simulate-check " + c.name, m);
  if (!finite || !std::isfinite(e.mean)) throw NumericalError("simulated paths are not finite");
  return 0;
}

int price_dual(const ExperimentConfig& c, const std::string& alpha_in) {
  Stopwatch clock;
  Metrics m;
  HedgeArtifact hedge;
  if (alpha_in.empty()) {
    auto run = train_dual(c);
    m.push_back({"U0", run.in_sample.mean});
    m.push_back({"U0_se", run.in_sample.std_error});
    hedge = std::move(run.hedge);
    save_hedge(out_file(c, ".alpha"), hedge);
  } else {
    hedge = load_hedge(alpha_in);
  }
  const auto oos = price_out_of_sample(c, hedge);
  m.push_back({"U0hat", oos.mean});
  m.push_back({"U0hat_se", oos.std_error});
  m.push_back({"wall_seconds", clock.seconds()});
  write_files({{out_file(c, "_dual.csv"), metrics_csv(m)}});
  print("price-dual " + c.name, m);
  return 0;
}

int price_ls_cmd(const ExperimentConfig& c) {
  Stopwatch clock;
  const auto r = run_ls(c);
  save_policy(out_file(c, ".policy"), r.policy);
  const Metrics m{{"price", r.price.mean}, {"std_error", r.price.std_error}, {"wall_seconds", clock.seconds()}};
  write_files({{out_file(c, "_ls.csv"), metrics_csv(m)}});
  print("price-ls " + c.name, m);
  return 0;
}

int pnl_cmd(ExperimentConfig c, std::string alpha_in, std::string policy_in, bool reuse) {
  if (alpha_in.empty()) alpha_in = out_file(c, ".alpha").string();
  if (policy_in.empty()) policy_in = out_file(c, ".policy").string();
  for (const auto& f : {alpha_in, policy_in})
    if (!fs::exists(f)) throw ArtifactError("missing artifact " + f + " (run price-dual and price-ls first)");
  if (reuse) c.pnl.reuse_oos = true;
  const auto hedge = load_hedge(alpha_in);
  const auto policy = load_policy(policy_in);
  const auto r = run_pnl(c, hedge, policy.policy);
  Metrics m{{"price", r.price.mean}, {"price_se", r.price.std_error}, {"ls_price", r.ls.mean}};
  for (const auto& kv : pnl_metrics(r.dual)) m.push_back(kv);
  std::vector<std::pair<fs::path, std::string>> files{{out_file(c, "_pnl_hist.csv"), histogram_csv(r.dual.hist)},
                                                      {out_file(c, "_pnl_summary.csv"), metrics_csv(m)}};
  if (r.delta) {
    files.push_back({out_file(c, "_delta_pnl_hist.csv"), histogram_csv(r.delta->hist)});
    files.push_back({out_file(c, "_delta_pnl_summary.csv"), metrics_csv(pnl_metrics(*r.delta))});
  }
  write_files(files);
  print("pnl " + c.name, m);
  if (r.delta) print("delta hedge " + c.name, pnl_metrics(*r.delta));
  return 0;
}

int rogers_cmd(const ExperimentConfig& c) {
  const auto r = run_rogers(c);
  const Metrics m{{"alpha_star", r.alpha_star}, {"price", r.price.mean}, {"std_error", r.price.std_error}};
  write_files({{out_file(c, "_rogers.csv"), metrics_csv(m)}});
  print("rogers " + c.name, m);
  return 0;
}

int table_cmd(const std::vector<std::string>& files, const Overrides& o, const std::string& csv) {
  std::string text = table_header();
  bool failed = false;
  for (const auto& f : files) {
    TableRow row;
    try {
      row = table_row(load(f, o));
    } catch (const ConfigError& e) {
      row.name = fs::path(f).stem().string();
      row.status = std::string("error: ") + e.what();
      for (auto& ch : row.status)
        if (ch == ',') ch = ';';
    }
    failed = failed || row.status != "ok";
    text += format_row(row);
    std::cout << format_row(row) << std::flush;
  }
  fs::path target = csv;
  if (target.is_relative()) target = fs::path(o.out.value_or("out")) / target;
  write_files({{target, text}});
  return failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual pricing and hedging of Bermudan options"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--seed-train", o.seed_train, "Training path seed");
  app.add_option("--seed-oos", o.seed_oos, "Out-of-sample pricing seed");
  app.add_option("--seed-pnl", o.seed_pnl, "P&L evaluation seed");
  app.add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--chunk-size", o.chunk_size, "Paths per work chunk")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "Output directory (overrides output.dir)");

  std::string config, alpha_in, policy_in, csv = "table.csv";
  std::vector<std::string> configs;
  bool reuse = false;

  auto* sim = app.add_subcommand("simulate-check", "Simulate paths and check martingale moments");
  sim->add_option("config", config)->required()->check(CLI::ExistingFile);
  auto* dual = app.add_subcommand("price-dual", "Train the dual hedge and price out of sample");
  dual->add_option("config", config)->required()->check(CLI::ExistingFile);
  dual->add_option("--alpha", alpha_in, "Reuse a trained hedge instead of training");
  auto* ls = app.add_subcommand("price-ls", "Fit the Longstaff-Schwartz policy and its lower bound");
  ls->add_option("config", config)->required()->check(CLI::ExistingFile);
  auto* pnl = app.add_subcommand("pnl", "Simulate the hedged P&L of a trained hedge");
  pnl->add_option("config", config)->required()->check(CLI::ExistingFile);
  pnl->add_option("--alpha", alpha_in, "Hedge artifact (default <out>/<name>.alpha)");
  pnl->add_option("--policy", policy_in, "Policy artifact (default <out>/<name>.policy)");
  pnl->add_flag("--reuse-oos", reuse, "Evaluate the P&L on the out-of-sample pricing paths");
  auto* rog = app.add_subcommand("rogers", "One-parameter dual baseline");
  rog->add_option("config", config)->required()->check(CLI::ExistingFile);
  auto* table = app.add_subcommand("table", "Price a set of configurations into one CSV");
  table->add_option("configs", configs, "Config files");
  table->add_option("--csv", csv, "Table file name, relative to --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*table) return table_cmd(configs, o, csv);
    const auto c = load(config, o);
    if (*sim) return simulate_check(c);
    if (*dual) return price_dual(c, alpha_in);
    if (*ls) return price_ls_cmd(c);
    if (*pnl) return pnl_cmd(c, alpha_in, policy_in, reuse);
    if (*rog) return rogers_cmd(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
