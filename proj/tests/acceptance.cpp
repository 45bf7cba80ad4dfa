// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
// below. Runs the full-size experiments; expect tens of minutes on one core.

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dualhedge/experiment.hpp"

using namespace dualhedge;

namespace {

const std::string kConfigs = DUALHEDGE_CONFIG_DIR;

ExperimentConfig row(const std::string& table, int n) {
  return load_config(kConfigs + "/" + table + "/row" + std::to_string(n) + ".ini");
}

struct Check {
  std::string what;
  bool ok;
};

class Criterion {
 public:
  explicit Criterion(std::string title) : title_(std::move(title)) {}

  /// |value - target| <= tol.
  void near(const std::string& what, double value, double target, double tol) {
    std::ostringstream os;
    os << what << ' ' << fmt(value) << " vs " << target << " +- " << tol;
    checks_.push_back({os.str(), std::abs(value - target) <= tol});
  }
  /// value within a relative band around target.
  void relative(const std::string& what, double value, double target, double rel) {
    std::ostringstream os;
    os << what << ' ' << fmt(value) << " vs " << target << " +- " << rel * 100 << '%';
    checks_.push_back({os.str(), std::abs(value - target) <= rel * target});
  }
  void below(const std::string& what, double value, double limit) {
    std::ostringstream os;
    os << what << ' ' << fmt(value) << " <= " << fmt(limit);
    checks_.push_back({os.str(), value <= limit});
  }
  void expect(const std::string& what, bool ok) { checks_.push_back({what, ok}); }

  bool report() const {
    bool ok = !checks_.empty();
    for (const auto& c : checks_) ok = ok && c.ok;
    std::cout << (ok ? "PASS " : "FAIL ") << title_ << '\n';
    for (const auto& c : checks_) std::cout << "    " << (c.ok ? "ok   " : "FAIL ") << c.what << '\n';
    std::cout << std::flush;
    return ok;
  }

 private:
  std::string title_;
  std::vector<Check> checks_;
};

// Weak-duality pairs (LS, dual) collected across criteria for criterion 10.
struct Pair {
  std::string name;
  Estimate ls, dual;
};
std::vector<Pair> g_pairs;

struct Priced {
  Estimate in_sample, oos;
  HedgeArtifact hedge;
  double seconds;
};

Priced price(const ExperimentConfig& c) {
  Stopwatch clock;
  auto run = train_dual(c);
  const auto oos = price_out_of_sample(c, run.hedge);
  return {run.in_sample, oos, std::move(run.hedge), clock.seconds()};
}

PnlReport stock_only_pnl(ExperimentConfig c, const ExercisePolicy& pol) {
  c.pnl.paths = c.run.paths;
  const auto hedge = train_dual(c).hedge;
  return run_pnl(c, hedge, pol).dual;
}

bool criterion1() {
  Criterion k("[1] put, vanilla, Nbar=1, P=1, Q=5e4: U0, U0hat = 9.91 +- 0.08; LS(6) = 9.90 +- 0.05; < 1 min");
  Stopwatch clock;
  const auto c = row("table1_put_local", 1);
  const auto p = price(c);
  const auto ls = run_ls(c);
  k.near("U0", p.in_sample.mean, 9.91, 0.08);
  k.near("U0hat", p.oos.mean, 9.91, 0.08);
  k.near("LS", ls.price.mean, 9.90, 0.05);
  k.below("seconds", clock.seconds(), 60.0);
  g_pairs.push_back({"put vanilla P=1", ls.price, p.oos});
  return k.report();
}

bool criterion2() {
  Criterion k("[2] put, stock only, Nbar=20, P=50: U0hat = 9.96 +- 0.08 at Q=2e6 (< 15 min), +- 0.15 at Q=2e5");
  auto c = row("table1_put_local", 8);
  const auto full = price(c);
  k.near("U0hat Q=2e6", full.oos.mean, 9.96, 0.08);
  k.below("seconds Q=2e6", full.seconds, 900.0);
  c.run.paths = c.run.oos_paths = 200000;
  const auto smoke = price(c);
  k.near("U0hat Q=2e5", smoke.oos.mean, 9.96, 0.15);
  const auto ls = run_ls(c);
  g_pairs.push_back({"put stock Nbar=20 P=50", ls.price, full.oos});
  return k.report();
}

bool criterion3() {
  Criterion k("[3] put stock-only P&L variance: 2.73 (Nbar=5, Q=1e5) and 1.05 (Nbar=10, Q=2e6), +- 25%");
  auto c = row("table1_put_local", 4);  // Nbar=5, P=50, Q=1e5, stock only
  const auto pol = fit_ls_policy(c);
  const auto v5 = stock_only_pnl(c, pol);
  k.relative("variance Nbar=5", v5.variance, 2.73, 0.25);
  c = row("table1_put_local", 7);  // Nbar=10, P=50, Q=2e6, stock only
  const auto v10 = stock_only_pnl(c, pol);
  k.relative("variance Nbar=10", v10.variance, 1.05, 0.25);
  return k.report();
}

ExperimentConfig rogers_config(const std::string& table, InstrumentKind kind, double k1, double k2) {
  auto c = row(table, 1);
  c.rogers.reference = {kind, 0, k1, k2};
  c.rogers.paths = 1000000;
  return c;
}

bool criterion4() {
  Criterion k("[4] Rogers, Q=1e6: put 9.96 +- 0.08; butterfly ref 6.49 +- 0.08; put ref on butterfly 7.04 +- 0.10; "
              "LS butterfly 5.65 +- 0.05; < 5 min each");
  {
    Stopwatch clock;
    const auto r = run_rogers(rogers_config("table1_put_local", InstrumentKind::vanilla_put, 100.0, 0.0));
    k.near("put reference", r.price.mean, 9.96, 0.08);
    k.below("seconds", clock.seconds(), 300.0);
  }
  {
    Stopwatch clock;
    const auto r =
        run_rogers(rogers_config("table2_butterfly_local", InstrumentKind::european_butterfly, 90.0, 110.0));
    k.near("butterfly reference", r.price.mean, 6.49, 0.08);
    k.below("seconds", clock.seconds(), 300.0);
  }
  {
    Stopwatch clock;
    const auto r = run_rogers(rogers_config("table2_butterfly_local", InstrumentKind::vanilla_put, 100.0, 0.0));
    k.near("put reference on butterfly", r.price.mean, 7.04, 0.10);
    k.below("seconds", clock.seconds(), 300.0);
  }
  const auto ls = run_ls(row("table2_butterfly_local", 10));
  k.near("LS butterfly", ls.price.mean, 5.65, 0.05);
  return k.report();
}

bool criterion5() {
  Criterion k("[5] butterfly, vanilla, Nbar=20, P=50, Q=5e5: U0hat = 5.74 +- 0.08");
  const auto c = row("table2_butterfly_local", 10);
  const auto p = price(c);
  k.near("U0hat", p.oos.mean, 5.74, 0.08);
  g_pairs.push_back({"butterfly vanilla Nbar=20", run_ls(c).price, p.oos});
  return k.report();
}

bool criterion6() {
  Criterion k("[6] max-call, polynomial degree 5, vanilla, Nbar=10, Q=2e6: U0hat = 8.15 +- 0.08; LS = 8.1 +- 0.05; "
              "< 20 min");
  const auto c = row("table4_maxcall_poly", 6);
  const auto p = price(c);
  const auto ls = run_ls(c);
  k.near("U0hat", p.oos.mean, 8.15, 0.08);
  k.near("LS", ls.price.mean, 8.1, 0.05);
  k.below("seconds", p.seconds, 1200.0);
  g_pairs.push_back({"max-call poly vanilla", ls.price, p.oos});
  return k.report();
}

bool criterion7() {
  Criterion k("[7] min-put, local P=10, vanilla, Nbar=1, Q=1e6: U0hat = 22.86 +- 0.10; LS = 22.6 +- 0.08; "
              "P&L variance 36.6 (stock) and 4 (vanilla) +- 30%");
  const auto stock = row("table5_minput_local", 1);
  const auto vanilla = row("table5_minput_local", 2);
  const auto p = price(vanilla);
  const auto ls = run_ls(vanilla);
  k.near("U0hat", p.oos.mean, 22.86, 0.10);
  k.near("LS", ls.price.mean, 22.6, 0.08);
  const auto& pol = ls.policy.policy;
  k.relative("variance stock only", stock_only_pnl(stock, pol).variance, 36.6, 0.30);
  auto v = vanilla;
  v.pnl.paths = v.run.paths;
  k.relative("variance vanilla", run_pnl(v, p.hedge, pol).dual.variance, 4.0, 0.30);
  g_pairs.push_back({"min-put vanilla", ls.price, p.oos});
  return k.report();
}

bool criterion8() {
  Criterion k("[8] basket, signed-payoff P=50, Nbar=10, Q=5e5, stock only: U0hat = 4.11 +- 0.07; LS(3) = 4.03 +- 0.05");
  const auto c = row("table8_basket_signed", 5);
  const auto p = price(c);
  const auto ls = run_ls(c);
  k.near("U0hat", p.oos.mean, 4.11, 0.07);
  k.near("LS", ls.price.mean, 4.03, 0.05);
  g_pairs.push_back({"basket signed", ls.price, p.oos});
  return k.report();
}

bool criterion9() {
  Criterion k("[9] binomial oracle, full node basis: dM = dM*, surely optimal, U0 = Snell, P&L = 0, eps_N = eps*_N "
              "(1e-10)");
  const PayoffSpec put{PayoffKind::put, 100.0};
  constexpr std::size_t N = 12;
  const auto m = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, N, N);
  const auto table = snell_solve(m, put);
  const auto paths = TreePaths::enumerate(m);
  const auto z = tree_rewards(table, paths, 1);
  const TreeIncrementSource src(m, paths, 1);
  const auto res = run_backward(src, z, {}, paths.weights);
  const auto dm = interval_increments(src, res.alpha);
  double err_dm = 0.0, err_v = 0.0;
  for (std::size_t q = 0; q < paths.count(); ++q) {
    for (std::size_t n = 0; n < N; ++n)
      err_dm = std::max(err_dm, std::abs(dm[q * N + n] - doob_meyer(table, n, paths.node(q, n), paths.up(q, n)).dM));
    err_v = std::max(err_v, std::abs(res.target.v[q] - table.value()));
  }
  k.below("(a) max |dM - dM*|", err_dm, 1e-10);
  k.below("(b) max |pathwise max - U0|", err_v, 1e-10);
  k.below("(c) |U0^Q - Snell|", std::abs(res.price.mean - table.value()), 1e-10);
  const auto tau = tree_stopping_times(table, paths, 1);
  const auto pnl = simulate_pnl(src, z, res.alpha, tau, table.value());
  double err_pnl = 0.0;
  for (double x : pnl.samples) err_pnl = std::max(err_pnl, std::abs(x));
  k.below("(d) max |P&L|", err_pnl, 1e-10);

  // (e) coarse bins: last-stage increment against the exact L2 projection.
  constexpr std::size_t M = 8;
  const auto m8 = make_crr(100.0, 0.4, 0.06, 0.0, 0.5, M, M);
  const auto t8 = snell_solve(m8, put);
  const auto p8 = TreePaths::enumerate(m8);
  const auto z8 = tree_rewards(t8, p8, 1);
  const TreeIncrementSource coarse(m8, p8, 1, 3);
  const auto dm8 = interval_increments(coarse, run_backward(coarse, z8, {}, p8.weights).alpha);
  const std::size_t n = M - 1;
  std::vector<double> num(3, 0.0), den(3, 0.0);
  for (std::size_t j = 0; j <= n; ++j) {
    const double pnode = std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0)) *
                         std::pow(m8.prob, j) * std::pow(1 - m8.prob, n - j);
    for (int up = 0; up < 2; ++up) {
      const double pc = up ? m8.prob : 1 - m8.prob;
      const double ds = coarse.tradable(n + 1, j + up) - coarse.tradable(n, j);
      num[j / 3] += pnode * pc * doob_meyer(t8, n, j, up).dM * ds;
      den[j / 3] += pnode * pc * ds * ds;
    }
  }
  double eps = 0.0, eps_star = 0.0;
  for (std::size_t q = 0; q < p8.count(); ++q) {
    const std::size_t j = p8.node(q, n);
    const bool up = p8.up(q, n);
    const double ds = coarse.tradable(n + 1, j + up) - coarse.tradable(n, j);
    const double proj = num[j / 3] / den[j / 3] * ds;
    const double star = doob_meyer(t8, n, j, up).dM;
    eps += p8.weights[q] * (star - dm8[q * M + n]) * (star - dm8[q * M + n]);
    eps_star += p8.weights[q] * (star - proj) * (star - proj);
  }
  k.below("(e) |eps_N - eps*_N|", std::abs(eps - eps_star), 1e-10);
  return k.report();
}

bool criterion10() {
  Criterion k("[10] properties: partition of unity, telescoping 1e-10, LS <= dual + 2 SE, worker determinism, "
              "BS parity/monotonicity 1e-12");
  // Partition of unity and telescoping on a 2-d local basis with vanillas.
  auto c = row("table5_minput_local", 2);
  c.run.paths = c.run.oos_paths = 2000;
  c.subticks = 3;
  const auto paths = simulate_paths(c.model, c.grid(), c.run.paths, c.run.seed_train);
  const Basis basis(c.basis, calibrate_mapping(c.basis, paths, c.payoff));
  std::vector<double> spot(2), u(basis.size());
  double pou = 0.0;
  for (std::size_t q = 0; q < paths.path_count(); ++q)
    for (std::size_t t = 0; t < c.grid().size(); ++t) {
      paths.fill_spots(q, q + 1, t, t, spot);
      basis.activations(t, spot, u);
      pou = std::max(pou, std::abs(std::accumulate(u.begin(), u.end(), 0.0) - 1.0));
    }
  k.below("partition of unity error", pou, 0.0);
  const auto inst = c.instruments();
  const MarketIncrementSource src(paths, inst, basis);
  std::vector<double> sum(paths.path_count() * inst.size(), 0.0);
  IntervalIncrements inc;
  for (std::size_t i = 0; i < c.intervals; ++i) {
    src.fill(i, {0, paths.path_count()}, inc);
    for (std::size_t q = 0; q < paths.path_count(); ++q)
      for (std::size_t j = 0; j < c.subticks; ++j)
        for (std::size_t l = 0; l < inst.size(); ++l) sum[q * inst.size() + l] += inc.increment(j, q)[l];
  }
  const auto v0 = instrument_values(inst, paths, 0);
  const auto vT = instrument_values(inst, paths, c.grid().size() - 1);
  double tele = 0.0;
  for (std::size_t x = 0; x < sum.size(); ++x) tele = std::max(tele, std::abs(sum[x] - (vT[x] - v0[x])));
  k.below("telescoping error", tele, 1e-10);

  for (const auto& p : g_pairs)
    k.below("LS - dual - 2 SE (" + p.name + ")", p.ls.mean - p.dual.mean,
            2.0 * std::hypot(p.ls.std_error, p.dual.std_error));

  auto d = row("table1_put_local", 4);
  d.run.paths = d.run.oos_paths = 20000;
  auto strip = [](const std::string& r) { return r.substr(0, r.rfind(',')); };
  d.run.exec = {1, 1000};
  const auto one = strip(format_row(table_row(d)));
  d.run.exec = {4, 1000};
  const auto four = strip(format_row(table_row(d)));
  k.expect("table CSV identical for 1 and 4 workers", one == four);

  double parity = 0.0;
  bool monotone = true;
  for (double s = 60.0; s <= 140.0; s += 5.0) {
    const BsQuote q{0.1, s, 100.0, 0.5, 0.06, 0.4, 0.02};
    parity = std::max(parity, std::abs(bs_call(q) - bs_put(q) -
                                       (s * std::exp(-0.02 * 0.4) - 100.0 * std::exp(-0.06 * 0.4))));
    BsQuote up = q;
    up.spot += 1.0;
    monotone = monotone && bs_call(up) > bs_call(q) && bs_put(up) < bs_put(q);
  }
  k.below("BS parity error", parity, 1e-12);
  k.expect("BS call increasing and put decreasing in spot", monotone);
  return k.report();
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::function<bool()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                         criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<int> pick;
  for (int a = 1; a < argc; ++a) pick.push_back(std::stoi(argv[a]));
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!pick.empty() && std::find(pick.begin(), pick.end(), static_cast<int>(i + 1)) == pick.end()) continue;
    bool ok = false;
    try {
      ok = all[i]();
    } catch (const std::exception& e) {
      std::cout << "FAIL [" << i + 1 << "] threw: " << e.what() << '\n';
    }
    failed += ok ? 0 : 1;
  }
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " criteria FAILED") << '\n';
  return failed == 0 ? 0 : 1;
}
