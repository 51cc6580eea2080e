#pragma once

#include <cstdint>
#include <vector>

#include "brw/env.hpp"
#include "brw/lattice.hpp"

namespace brw {

enum class W0 {
  LeftBlock,   // 1_{-N0}: w = 1 for x <= 0
  RightBlock,  // 1_{N0}:  w = 1 for x >= 0 (duality initial condition)
  Zero,
  One,
};

struct KppConfig {
  Window domain{0, 0};
  IntegratorConfig integ;
  std::vector<double> sample_times;
};

struct KppSnapshot {
  double t = 0.0;
  std::int64_t x_lo = 0;
  std::vector<double> w;

  double at(std::int64_t x) const { return w[static_cast<std::size_t>(x - x_lo)]; }
  std::int64_t x_hi() const { return x_lo + static_cast<std::int64_t>(w.size()) - 1; }
};

struct KppRun {
  W0 w0 = W0::LeftBlock;
  std::vector<KppSnapshot> snapshots;
};

KppRun run_fkpp(const Environment& env, W0 w0, double T, const KppConfig& cfg);

struct KppFront {
  std::int64_t m_hat = 0;
  double interp = 0.0;
};

// sup{x : w(t,x) >= 1/2}; throws FrontNotFormed when w < 1/2 everywhere.
KppFront kpp_front(const KppSnapshot& snap);

struct DualityRow {
  std::int64_t x = 0;
  double w = 0.0;      // FKPP solution with w0 = 1_{N0}
  double p_hat = 0.0;  // simulated P_x(M(t) >= 0)
  double ci_low = 0.0;
  double ci_high = 0.0;  // binomial 3-sigma band around p_hat
};

// Quenched duality check of w(t,x) = P_x(M(t) >= 0) on one realization.
std::vector<DualityRow> duality_check(const Environment& env, std::span<const std::int64_t> xs,
                                      double t, std::int64_t replicas, std::uint64_t seed,
                                      const KppConfig& cfg);

}  // namespace brw
