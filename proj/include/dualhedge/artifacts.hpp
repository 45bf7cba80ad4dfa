#pragma once

// Versioned binary artifacts for trained hedges and exercise policies.
//
// Layout: 8 magic bytes, u32 schema version, then little-endian u64 and
// f64 fields; every array is prefixed by its u64 length.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualhedge/basis.hpp"
#include "dualhedge/dual_solver.hpp"
#include "dualhedge/instruments.hpp"
#include "dualhedge/primal_ls.hpp"

namespace dualhedge {

static_assert(std::endian::native == std::endian::little, "artifacts assume a little-endian host");

inline constexpr char kAlphaMagic[8] = {'B', 'D', 'A', 'L', 'P', 'H', 'A', '\0'};
inline constexpr char kPolicyMagic[8] = {'B', 'D', 'P', 'O', 'L', 'I', 'C', 'Y'};
inline constexpr std::uint32_t kArtifactVersion = 1;

struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A trained hedge with everything needed to rebuild its increments.
struct HedgeArtifact {
  AlphaTensor alpha;
  BasisSpec basis;
  StateMapping mapping;
  InstrumentSet instruments;
};

struct PolicyArtifact {
  ExercisePolicy policy;
  std::uint64_t seed = 0;
};

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    out_.open(p, std::ios::binary | std::ios::trunc);
    if (!out_) throw ArtifactError("artifact: cannot open " + p.string() + " for writing");
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void array(const std::vector<double>& v) {
    u64(v.size());
    bytes(v.data(), v.size() * 8);
  }
  void finish() {
    out_.flush();
    if (!out_) throw ArtifactError("artifact: write failed");
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& p) : in_(p, std::ios::binary), path_(p.string()) {
    if (!in_) throw ArtifactError("artifact: cannot open " + path_);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw ArtifactError("artifact: truncated file " + path_);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::vector<double> array(std::uint64_t limit = std::uint64_t{1} << 32) {
    const auto n = u64();
    if (n > limit) throw ArtifactError("artifact: corrupt array length in " + path_);
    std::vector<double> v(n);
    bytes(v.data(), n * 8);
    return v;
  }
  void header(const char (&magic)[8]) {
    char m[8];
    bytes(m, 8);
    if (std::memcmp(m, magic, 8) != 0) throw ArtifactError("artifact: bad magic in " + path_);
    const auto version = u32();
    if (version != kArtifactVersion)
      throw ArtifactError("artifact: unsupported schema version " + std::to_string(version));
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw ArtifactError("artifact: trailing bytes in " + path_);
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace detail

inline void save_hedge(const std::filesystem::path& file, const HedgeArtifact& h) {
  detail::BinaryWriter w(file);
  w.bytes(kAlphaMagic, 8);
  w.u32(kArtifactVersion);
  const auto& a = h.alpha;
  w.u64(a.intervals);
  w.u64(a.subticks);
  w.u64(a.basis);
  w.u64(a.instruments);
  w.u64(a.train_seed.has_value());
  w.u64(a.train_seed.value_or(0));
  w.u64(static_cast<std::uint64_t>(h.basis.family));
  w.u64(h.basis.bins);
  w.u64(h.basis.degree);
  w.u64(h.mapping.times);
  w.u64(h.mapping.assets);
  w.f64(h.mapping.strike);
  w.array(h.mapping.first);
  w.array(h.mapping.second);
  w.u64(h.instruments.size());
  for (const auto& it : h.instruments.items) {
    w.u64(static_cast<std::uint64_t>(it.kind));
    w.u64(it.asset);
    w.f64(it.strike);
    w.f64(it.strike_high);
  }
  w.array(a.data);
  w.finish();
}

inline HedgeArtifact load_hedge(const std::filesystem::path& file) {
  detail::BinaryReader r(file);
  r.header(kAlphaMagic);
  HedgeArtifact h;
  const auto n = r.u64(), s = r.u64(), p = r.u64(), l = r.u64();
  const bool seeded = r.u64() != 0;
  const auto seed = r.u64();
  const auto family = r.u64();
  if (family > static_cast<std::uint64_t>(BasisFamily::polynomial)) throw ArtifactError("artifact: bad basis family");
  h.basis.family = static_cast<BasisFamily>(family);
  h.basis.bins = r.u64();
  h.basis.degree = r.u64();
  h.mapping.family = h.basis.family;
  h.mapping.times = r.u64();
  h.mapping.assets = r.u64();
  h.mapping.strike = r.f64();
  h.mapping.first = r.array();
  h.mapping.second = r.array();
  const auto count = r.u64();
  if (count > 1024) throw ArtifactError("artifact: corrupt instrument count");
  for (std::uint64_t k = 0; k < count; ++k) {
    Instrument it;
    const auto kind = r.u64();
    if (kind > static_cast<std::uint64_t>(InstrumentKind::european_butterfly))
      throw ArtifactError("artifact: bad instrument kind");
    it.kind = static_cast<InstrumentKind>(kind);
    it.asset = r.u64();
    it.strike = r.f64();
    it.strike_high = r.f64();
    h.instruments.items.push_back(it);
  }
  h.alpha = AlphaTensor(n, s, p, l);
  if (seeded) h.alpha.train_seed = seed;
  h.alpha.data = r.array();
  r.expect_end();
  if (h.alpha.data.size() != n * s * p * l || l != count || p != h.basis.size(h.mapping.assets))
    throw ArtifactError("artifact: inconsistent hedge shapes");
  return h;
}

inline void save_policy(const std::filesystem::path& file, const PolicyArtifact& a) {
  detail::BinaryWriter w(file);
  w.bytes(kPolicyMagic, 8);
  w.u32(kArtifactVersion);
  const auto& p = a.policy;
  w.u64(p.degree);
  w.u64(p.dates);
  w.u64(p.assets);
  w.u64(a.seed);
  w.array(p.lower);
  w.array(p.upper);
  w.array(p.coef);
  w.finish();
}

inline PolicyArtifact load_policy(const std::filesystem::path& file) {
  detail::BinaryReader r(file);
  r.header(kPolicyMagic);
  PolicyArtifact a;
  auto& p = a.policy;
  p.degree = r.u64();
  p.dates = r.u64();
  p.assets = r.u64();
  a.seed = r.u64();
  if (p.assets == 0 || p.assets > 16 || p.degree > 64) throw ArtifactError("artifact: bad policy header");
  p.lower = r.array();
  p.upper = r.array();
  p.coef = r.array();
  r.expect_end();
  p.prepare();
  if (p.lower.size() != p.dates * p.assets || p.upper.size() != p.lower.size() ||
      p.coef.size() != p.dates * p.terms)
    throw ArtifactError("artifact: inconsistent policy shapes");
  return a;
}

}  // namespace dualhedge
