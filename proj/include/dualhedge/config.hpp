#pragma once

// Experiment configuration: one INI file per experiment.
//
//   [model]       dimension s0 sigma dividend rate rho maturity
//   [grid]        intervals subticks
//   [payoff]      kind strike strike_high weights
//   [basis]       family bins degree moments
//   [instruments] vanilla
//   [run]         paths oos_paths seed_train seed_oos seed_pnl workers chunk_size memory_mb mode
//   [ls]          degree paths
//   [pnl]         bins paths reuse_oos delta_hedge tree_steps
//   [rogers]      reference strike strike_high paths lo hi tol
//   [output]      dir
//
// Per-asset keys accept one value (broadcast) or a comma-separated list.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dualhedge/basis.hpp"
#include "dualhedge/instruments.hpp"
#include "dualhedge/market_model.hpp"
#include "dualhedge/parallel.hpp"
#include "dualhedge/payoffs.hpp"

namespace dualhedge {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunSettings {
  std::size_t paths = 0;
  std::size_t oos_paths = 0;
  std::uint64_t seed_train = 1;
  std::uint64_t seed_oos = 2;
  std::uint64_t seed_pnl = 3;
  Execution exec{};
  std::size_t memory_mb = 1024;
  ProviderMode mode = ProviderMode::automatic;
};

struct LsSettings {
  std::size_t degree = 3;
  std::size_t paths = 0;
};

struct PnlSettings {
  std::size_t bins = 80;
  std::size_t paths = 0;
  bool reuse_oos = false;
  bool delta_hedge = false;
  std::size_t tree_steps = 2000;
};

struct RogersSettings {
  Instrument reference{InstrumentKind::vanilla_put, 0, 100.0, 0.0};
  std::size_t paths = 0;
  double lo = -1.0;
  double hi = 3.0;
  double tol = 1e-6;
};

struct ExperimentConfig {
  std::string name;
  ModelParams model;
  std::size_t intervals = 1;
  std::size_t subticks = 1;
  PayoffSpec payoff;
  BasisSpec basis;
  MomentSource moments = MomentSource::empirical;
  bool vanilla = false;
  RunSettings run;
  LsSettings ls;
  PnlSettings pnl;
  RogersSettings rogers;
  std::string output_dir = "out";

  TimeGrid grid() const { return TimeGrid(model.maturity, intervals, subticks); }
  /// Exercise dates only, for the primal and Rogers runs.
  TimeGrid coarse_grid() const { return TimeGrid(model.maturity, intervals, 1); }
  InstrumentSet instruments() const { return InstrumentSet::for_payoff(model, payoff, vanilla); }
  SimulationOptions simulation() const {
    return {run.mode, run.memory_mb * (std::size_t{1} << 20), run.exec};
  }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("config: bad number in " + key + ": '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config: empty list for " + key);
  return out;
}

inline std::vector<double> per_asset(const std::string& key, const std::string& text, std::size_t d) {
  auto v = parse_list(key, text);
  if (v.size() == 1) v.assign(d, v[0]);
  if (v.size() != d) throw ConfigError("config: " + key + " needs 1 or " + std::to_string(d) + " values");
  return v;
}

class IniReader {
 public:
  explicit IniReader(const boost::property_tree::ptree& t) : tree_(t) {}

  template <class T>
  T get(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(key);
    if (!v) throw ConfigError("config: missing key " + key);
    return convert<T>(key, *v);
  }
  template <class T>
  T get(const std::string& key, T fallback) const {
    const auto v = tree_.get_optional<std::string>(key);
    return v ? convert<T>(key, *v) : fallback;
  }
  std::optional<std::string> raw(const std::string& key) const {
    const auto v = tree_.get_optional<std::string>(key);
    return v ? std::optional<std::string>(*v) : std::nullopt;
  }
  bool has_section(const std::string& s) const { return tree_.get_child_optional(s).has_value(); }

 private:
  template <class T>
  static T convert(const std::string& key, const std::string& s) {
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        return s;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "True" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "False" || s == "0" || s == "no") return false;
        throw std::invalid_argument(s);
      } else if constexpr (std::is_floating_point_v<T>) {
        std::size_t used = 0;
        const double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<T>(x);
      } else {
        if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
        std::size_t used = 0;
        const double x = std::stod(s, &used);  // accepts 2e6
        if (used != s.size() || x != std::floor(x) || x < 0.0) throw std::invalid_argument(s);
        return static_cast<T>(x);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config: bad value for " + key + ": '" + s + "'");
    }
  }

  const boost::property_tree::ptree& tree_;
};

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  try {
    validate(c.model);
    validate(c.payoff);
    validate(c.basis);
    validate(c.instruments(), c.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.payoff.one_dimensional() && c.model.dimension() != 1)
    throw ConfigError("config: payoff " + to_string(c.payoff.kind) + " needs dimension 1");
  if (c.intervals == 0 || c.subticks == 0) throw ConfigError("config: grid intervals and subticks must be >= 1");
  if (c.run.paths == 0 || c.run.oos_paths == 0) throw ConfigError("config: run.paths must be >= 1");
  const auto& r = c.run;
  if (r.seed_train == r.seed_oos || r.seed_train == r.seed_pnl || r.seed_oos == r.seed_pnl)
    throw ConfigError("config: seed_train, seed_oos and seed_pnl must be pairwise distinct");
  if (r.exec.workers == 0 || r.exec.chunk_size == 0) throw ConfigError("config: workers and chunk_size must be >= 1");
  if (c.pnl.bins == 0) throw ConfigError("config: pnl.bins must be >= 1");
  if (c.rogers.reference.asset >= c.model.dimension()) throw ConfigError("config: rogers reference asset out of range");
  if (!(c.rogers.lo < c.rogers.hi) || !(c.rogers.tol > 0.0)) throw ConfigError("config: bad rogers bracket");
}

inline ExperimentConfig parse_config(const boost::property_tree::ptree& tree, std::string name = "experiment") {
  detail::IniReader in(tree);
  for (const char* s : {"model", "grid", "payoff", "basis", "run"})
    if (!in.has_section(s)) throw ConfigError(std::string("config: missing section [") + s + "]");
  ExperimentConfig c;
  c.name = in.get<std::string>("experiment.name", std::move(name));

  const auto d = in.get<std::size_t>("model.dimension", 1);
  if (d == 0 || d > 16) throw ConfigError("config: model.dimension must be in [1, 16]");
  c.model.s0 = detail::per_asset("model.s0", in.get<std::string>("model.s0"), d);
  c.model.sigma = detail::per_asset("model.sigma", in.get<std::string>("model.sigma"), d);
  c.model.dividend = detail::per_asset("model.dividend", in.get<std::string>("model.dividend", "0"), d);
  c.model.rate = in.get<double>("model.rate");
  c.model.rho = in.get<double>("model.rho", 0.0);
  c.model.maturity = in.get<double>("model.maturity");

  c.intervals = in.get<std::size_t>("grid.intervals");
  c.subticks = in.get<std::size_t>("grid.subticks", 1);

  try {
    c.payoff.kind = parse_payoff_kind(in.get<std::string>("payoff.kind"));
    c.basis.family = parse_basis_family(in.get<std::string>("basis.family"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.payoff.strike = in.get<double>("payoff.strike");
  c.payoff.strike_high = in.get<double>("payoff.strike_high", 0.0);
  if (const auto w = in.raw("payoff.weights")) c.payoff.weights = detail::per_asset("payoff.weights", *w, d);
  if (c.payoff.kind == PayoffKind::basket_put && c.payoff.weights.empty())
    c.payoff.weights.assign(d, 1.0 / static_cast<double>(d));

  c.basis.bins = in.get<std::size_t>("basis.bins", 1);
  c.basis.degree = in.get<std::size_t>("basis.degree", 0);
  const auto mom = in.get<std::string>("basis.moments", "empirical");
  if (mom == "empirical")
    c.moments = MomentSource::empirical;
  else if (mom == "closed_form")
    c.moments = MomentSource::closed_form;
  else
    throw ConfigError("config: basis.moments must be empirical or closed_form");

  c.vanilla = in.get<bool>("instruments.vanilla", false);

  c.run.paths = in.get<std::size_t>("run.paths");
  c.run.oos_paths = in.get<std::size_t>("run.oos_paths", c.run.paths);
  c.run.seed_train = in.get<std::uint64_t>("run.seed_train", 1);
  c.run.seed_oos = in.get<std::uint64_t>("run.seed_oos", 2);
  c.run.seed_pnl = in.get<std::uint64_t>("run.seed_pnl", 3);
  c.run.exec.workers = in.get<std::size_t>("run.workers", 1);
  c.run.exec.chunk_size = in.get<std::size_t>("run.chunk_size", Execution{}.chunk_size);
  c.run.memory_mb = in.get<std::size_t>("run.memory_mb", 1024);
  const auto mode = in.get<std::string>("run.mode", "automatic");
  if (mode == "automatic")
    c.run.mode = ProviderMode::automatic;
  else if (mode == "in_memory")
    c.run.mode = ProviderMode::in_memory;
  else if (mode == "regenerate")
    c.run.mode = ProviderMode::regenerate;
  else
    throw ConfigError("config: run.mode must be automatic, in_memory or regenerate");

  c.ls.degree = in.get<std::size_t>("ls.degree", 3);
  c.ls.paths = in.get<std::size_t>("ls.paths", c.run.paths);

  c.pnl.bins = in.get<std::size_t>("pnl.bins", 80);
  c.pnl.paths = in.get<std::size_t>("pnl.paths", c.run.oos_paths);
  c.pnl.reuse_oos = in.get<bool>("pnl.reuse_oos", false);
  c.pnl.delta_hedge = in.get<bool>("pnl.delta_hedge", false);
  c.pnl.tree_steps = in.get<std::size_t>("pnl.tree_steps", 2000);

  if (const auto ref = in.raw("rogers.reference")) {
    try {
      c.rogers.reference.kind = *ref == "asset" ? InstrumentKind::asset : parse_vanilla_kind(*ref);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  c.rogers.reference.strike = in.get<double>("rogers.strike", c.payoff.strike);
  c.rogers.reference.strike_high = in.get<double>("rogers.strike_high", c.payoff.strike_high);
  c.rogers.paths = in.get<std::size_t>("rogers.paths", c.run.paths);
  c.rogers.lo = in.get<double>("rogers.lo", -1.0);
  c.rogers.hi = in.get<double>("rogers.hi", 3.0);
  c.rogers.tol = in.get<double>("rogers.tol", 1e-6);

  c.output_dir = in.get<std::string>("output.dir", "out");
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, std::string name = "experiment") {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(tree, std::move(name));
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(tree, file.stem().string());
}

}  // namespace dualhedge
