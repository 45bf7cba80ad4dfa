#pragma once

// Train / price / hedge pipelines over an ExperimentConfig, and their CSV
// renderings.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dualhedge/artifacts.hpp"
#include "dualhedge/config.hpp"
#include "dualhedge/dual_solver.hpp"
#include "dualhedge/lattice.hpp"
#include "dualhedge/pnl.hpp"
#include "dualhedge/primal_ls.hpp"
#include "dualhedge/rogers.hpp"

namespace dualhedge {

/// Non-finite results (exit code 3 in the CLI).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_finite(const Estimate& e, const std::string& what) {
  if (!std::isfinite(e.mean) || !std::isfinite(e.std_error)) throw NumericalError(what + " is not finite");
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct DualRun {
  HedgeArtifact hedge;
  Estimate in_sample;
  double seconds = 0.0;
};

inline DualRun train_dual(const ExperimentConfig& cfg) {
  Stopwatch clock;
  const auto paths = simulate_paths(cfg.model, cfg.grid(), cfg.run.paths, cfg.run.seed_train, cfg.simulation());
  const auto z = reward_matrix(cfg.payoff, paths, cfg.run.exec);
  DualRun run;
  run.hedge.basis = cfg.basis;
  run.hedge.mapping = calibrate_mapping(cfg.basis, paths, cfg.payoff, cfg.moments);
  run.hedge.instruments = cfg.instruments();
  const Basis basis(run.hedge.basis, run.hedge.mapping);
  const MarketIncrementSource src(paths, run.hedge.instruments, basis);
  auto res = run_backward(src, z, {{}, cfg.run.exec});
  res.alpha.train_seed = cfg.run.seed_train;
  run.hedge.alpha = std::move(res.alpha);
  run.in_sample = res.price;
  require_finite(run.in_sample, "in-sample dual price");
  run.seconds = clock.seconds();
  return run;
}

inline void check_compatible(const HedgeArtifact& h, const ExperimentConfig& cfg) {
  const auto g = cfg.grid();
  if (h.alpha.intervals != g.intervals() || h.alpha.subticks != g.subticks() ||
      h.mapping.times != g.size() || h.mapping.assets != cfg.model.dimension())
    throw ConfigError("hedge artifact does not match the configured grid or dimension");
}

/// Fresh fine-grid paths with rewards and the frozen increments on them.
struct FreshSet {
  PathSet paths;
  RewardMatrix z;
  Basis basis;
  MarketIncrementSource src;

  FreshSet(const ExperimentConfig& cfg, const HedgeArtifact& h, std::size_t count, std::uint64_t seed)
      : paths(simulate_paths(cfg.model, cfg.grid(), count, seed, cfg.simulation())),
        z(reward_matrix(cfg.payoff, paths, cfg.run.exec)),
        basis(h.basis, h.mapping),
        src(paths, h.instruments, basis) {}
  FreshSet(const FreshSet&) = delete;
  FreshSet& operator=(const FreshSet&) = delete;
};

inline Estimate price_out_of_sample(const ExperimentConfig& cfg, const HedgeArtifact& h) {
  check_compatible(h, cfg);
  const FreshSet fresh(cfg, h, cfg.run.oos_paths, cfg.run.seed_oos);
  const auto e = dual_price_out_of_sample(fresh.src, fresh.z, h.alpha, cfg.run.exec);
  require_finite(e, "out-of-sample dual price");
  return e;
}

struct LsRun {
  PolicyArtifact policy;
  Estimate price;
};

/// Policy fitted on exercise-date paths of the training seed, priced on
/// exercise-date paths of the out-of-sample seed.
inline ExercisePolicy fit_ls_policy(const ExperimentConfig& cfg) {
  const auto train = simulate_paths(cfg.model, cfg.coarse_grid(), cfg.ls.paths, cfg.run.seed_train, cfg.simulation());
  return fit_policy(train, reward_matrix(cfg.payoff, train, cfg.run.exec), cfg.ls.degree, cfg.run.exec);
}

inline Estimate price_ls(const ExperimentConfig& cfg, const ExercisePolicy& pol) {
  const auto fresh = simulate_paths(cfg.model, cfg.coarse_grid(), cfg.ls.paths, cfg.run.seed_oos, cfg.simulation());
  const auto e = price_lower_bound(pol, fresh, reward_matrix(cfg.payoff, fresh, cfg.run.exec), cfg.run.exec);
  require_finite(e, "LS price");
  return e;
}

inline LsRun run_ls(const ExperimentConfig& cfg) {
  LsRun r;
  r.policy.policy = fit_ls_policy(cfg);
  r.policy.seed = cfg.run.seed_train;
  r.price = price_ls(cfg, r.policy.policy);
  return r;
}

inline void check_compatible(const ExercisePolicy& p, const ExperimentConfig& cfg) {
  if (p.dates != cfg.intervals + 1 || p.assets != cfg.model.dimension())
    throw ConfigError("policy artifact does not match the configured dates or dimension");
}

struct PnlRun {
  Estimate price;  // out-of-sample dual price charged to the buyer
  Estimate ls;     // LS price on the P&L paths
  PnlReport dual;
  std::optional<PnlReport> delta;
};

/// Seller's P&L of the trained hedge against the policy's exercise, on the
/// P&L seed (or on the out-of-sample set when reuse_oos is set).
inline PnlRun run_pnl(const ExperimentConfig& cfg, const HedgeArtifact& h, const ExercisePolicy& pol) {
  check_compatible(h, cfg);
  check_compatible(pol, cfg);
  PnlRun out;
  std::optional<FreshSet> oos;
  if (!cfg.pnl.reuse_oos) {
    oos.emplace(cfg, h, cfg.run.oos_paths, cfg.run.seed_oos);
    out.price = dual_price_out_of_sample(oos->src, oos->z, h.alpha, cfg.run.exec);
    oos.reset();
  }
  const std::size_t count = cfg.pnl.reuse_oos ? cfg.run.oos_paths : cfg.pnl.paths;
  const std::uint64_t seed = cfg.pnl.reuse_oos ? cfg.run.seed_oos : cfg.run.seed_pnl;
  const FreshSet set(cfg, h, count, seed);
  const auto tau = stopping_times(pol, set.paths, set.z, cfg.run.exec);
  const auto eval = evaluate_frozen(set.src, set.z, h.alpha, cfg.run.exec, tau);
  if (cfg.pnl.reuse_oos) out.price = estimate_mean(eval.pathwise_max);
  require_finite(out.price, "out-of-sample dual price");
  out.ls = price_lower_bound(tau, set.z);
  std::vector<double> pnl(tau.size());
  for (std::size_t q = 0; q < tau.size(); ++q) pnl[q] = out.price.mean + eval.gains[q] - set.z.at(q, tau[q]);
  out.dual = summarize_pnl(std::move(pnl), cfg.pnl.bins);
  if (!std::isfinite(out.dual.variance)) throw NumericalError("P&L is not finite");
  if (cfg.pnl.delta_hedge) {
    if (cfg.model.dimension() != 1) throw ConfigError("pnl.delta_hedge needs a one-dimensional model");
    const auto tree = snell_solve(make_crr(cfg.model.s0[0], cfg.model.sigma[0], cfg.model.rate,
                                           cfg.model.dividend[0], cfg.model.maturity, cfg.pnl.tree_steps,
                                           cfg.intervals),
                                  cfg.payoff);
    out.delta = delta_hedge_pnl(set.paths, tree, tau, set.z, cfg.run.exec, cfg.pnl.bins);
  }
  return out;
}

inline RogersResult run_rogers(const ExperimentConfig& cfg) {
  const auto paths = simulate_paths(cfg.model, cfg.coarse_grid(), cfg.rogers.paths, cfg.run.seed_train, cfg.simulation());
  const auto z = reward_matrix(cfg.payoff, paths, cfg.run.exec);
  const auto ref = reference_values(paths, cfg.rogers.reference, cfg.run.exec);
  auto r = minimize_scalar_dual(z, ref, cfg.rogers.lo, cfg.rogers.hi, cfg.rogers.tol);
  require_finite(r.price, "Rogers price");
  return r;
}

// CSV rendering. Numbers use a fixed printf format so reruns are
// byte-identical.

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string table_header() {
  return "name,family,Q,subticks,P,degree,vanilla,U0,U0_se,U0hat,U0hat_se,status,wall_seconds\n";
}

struct TableRow {
  std::string name;
  ExperimentConfig config;
  Estimate in_sample, out_of_sample;
  std::string status = "ok";
  double seconds = 0.0;
};

inline TableRow table_row(const ExperimentConfig& cfg) {
  TableRow row{cfg.name, cfg, {}, {}, "ok", 0.0};
  Stopwatch clock;
  try {
    const auto run = train_dual(cfg);
    row.in_sample = run.in_sample;
    row.out_of_sample = price_out_of_sample(cfg, run.hedge);
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
    for (auto& c : row.status)
      if (c == ',' || c == '\n') c = ';';
  }
  row.seconds = clock.seconds();
  return row;
}

inline std::string format_row(const TableRow& r) {
  const auto& c = r.config;
  std::ostringstream os;
  os << r.name << ',' << to_string(c.basis.family) << ',' << c.run.paths << ',' << c.subticks << ','
     << (c.basis.local() ? c.basis.bins : 0) << ',' << c.basis.degree << ',' << (c.vanilla ? "true" : "false")
     << ',' << fmt(r.in_sample.mean) << ',' << fmt(r.in_sample.std_error) << ',' << fmt(r.out_of_sample.mean)
     << ',' << fmt(r.out_of_sample.std_error) << ',' << r.status << ',' << fmt(r.seconds) << '\n';
  return os.str();
}

inline std::string histogram_csv(const Histogram& h) {
  std::string s = "edge_lo,edge_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    s += fmt(h.edges[b]) + ',' + fmt(h.edges[b + 1]) + ',' + std::to_string(h.counts[b]) + '\n';
  return s;
}

using Metrics = std::vector<std::pair<std::string, double>>;

inline std::string metrics_csv(const Metrics& m) {
  std::string s = "metric,value\n";
  for (const auto& [k, v] : m) s += k + ',' + fmt(v) + '\n';
  return s;
}

inline Metrics pnl_metrics(const PnlReport& r) {
  return {{"mean", r.mean}, {"std_error", r.std_error}, {"variance", r.variance}, {"q05", r.q05}, {"q95", r.q95}};
}

/// Writes all files or none: contents go to temporaries renamed at the end.
inline void write_files(const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
  std::vector<std::filesystem::path> tmp;
  try {
    for (const auto& [path, text] : files) {
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      auto t = path;
      t += ".tmp";
      std::ofstream os(t, std::ios::binary | std::ios::trunc);
      os << text;
      if (!os) throw std::runtime_error("cannot write " + t.string());
      tmp.push_back(t);
    }
  } catch (...) {
    for (const auto& t : tmp) std::filesystem::remove(t);
    throw;
  }
  for (std::size_t i = 0; i < files.size(); ++i) std::filesystem::rename(tmp[i], files[i].first);
}

}  // namespace dualhedge
