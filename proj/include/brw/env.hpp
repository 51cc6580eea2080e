#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace brw {

enum class LawKind { TwoPoint, UniformInterval, FiniteDiscrete };

// Law of the i.i.d. branching rates xi(x). Support must be positive and
// non-degenerate: 0 < ei < es < inf. `shift` adds a constant h >= 0 to
// every rate; it raises es and ei together and leaves v_c untouched.
struct EnvironmentLaw {
  LawKind kind = LawKind::TwoPoint;
  std::vector<double> points;  // support points (TwoPoint/FiniteDiscrete) or {lo, hi}
  std::vector<double> probs;   // atom probabilities; empty for UniformInterval
  double shift = 0.0;

  double es() const;  // essential supremum of xi, shift included
  double ei() const;  // essential infimum of xi, shift included

  // Throws InvalidArgument on degenerate or inconsistent parameters.
  void validate() const;

  // Inverse-CDF draw from a single uniform, before shift is applied.
  double quantile(double u) const;

  static EnvironmentLaw two_point(double a, double b, double pa = 0.5, double shift = 0.0);
  static EnvironmentLaw uniform_interval(double lo, double hi, double shift = 0.0);
  static EnvironmentLaw finite_discrete(std::vector<double> pts, std::vector<double> pr,
                                        double shift = 0.0);
};

struct Window {
  std::int64_t lo = 0;
  std::int64_t hi = 0;  // inclusive
  std::int64_t size() const { return hi - lo + 1; }
  bool contains(std::int64_t x) const { return x >= lo && x <= hi; }
};

// One realization of xi on a finite window. Immutable after construction;
// re-sampling with the same (law, window, seed) reproduces it bit-exactly.
struct Environment {
  EnvironmentLaw law;
  Window window;
  std::uint64_t seed = 0;
  std::vector<double> xi;

  double at(std::int64_t x) const { return xi[static_cast<std::size_t>(x - window.lo)]; }
  double max_xi() const;
  double min_xi() const;
};

// zeta(x) = xi(x) - es <= 0.
struct ZetaView {
  Window window;
  std::vector<double> zeta;

  double at(std::int64_t x) const { return zeta[static_cast<std::size_t>(x - window.lo)]; }
  double min_zeta() const;
  double max_zeta() const;
};

Environment sample_environment(const EnvironmentLaw& law, Window window, std::uint64_t seed);

ZetaView zeta_of(const Environment& env);

// Constant-potential reference view (zeta == value everywhere), used for the
// degenerate closed-form anchors.
ZetaView constant_zeta(double value, Window window);

void save_environment(const Environment& env, const std::string& path);
Environment load_environment(const std::string& path);

}  // namespace brw
