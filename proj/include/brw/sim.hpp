#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "brw/env.hpp"

namespace brw {

struct SimOptions {
  double T = 1.0;
  std::vector<double> schedule;  // sorted observation times in (0, T]; T itself included by caller
  std::int64_t cap = 2'000'000;  // total particles created before truncation
  std::int32_t start_pos = 0;
  std::int64_t start_count = 1;  // u0 = start_count * delta_{start_pos}
  int hits_kmax = 0;             // track first-hitting times H_k, 1 <= k <= kmax
  double special_time = -1.0;    // record lineage position at this time when >= 0
  double barrier_lo = -std::numeric_limits<double>::infinity();
  double barrier_hi = std::numeric_limits<double>::infinity();
  bool histograms = false;
  Window hist_window{0, 0};  // defaults to env window when empty
};

// A particle alive at the horizon, as seen by the per-particle visitor.
struct ParticleView {
  std::int32_t pos = 0;          // position at T
  std::int32_t special_pos = 0;  // position at special_time (when configured)
  bool in_barriers = true;       // genealogy stayed inside [barrier_lo, barrier_hi]
  std::span<const double> hits;  // H_k for k = 1..kmax; +inf when never hit
};

struct ReplicaSummary {
  std::vector<std::int32_t> max_pos;  // M(s) per schedule entry
  std::int64_t population = 0;        // particles alive at T
  std::int64_t in_barrier_count = 0;  // alive at T with genealogy inside barriers
  std::int64_t events = 0;            // jump + branch events processed
  bool truncated = false;             // cap hit; results are partial
};

using ParticleVisitor = std::function<void(const ParticleView&)>;

// Exact event-driven evolution of one replica: per-particle exponential
// clocks with combined rate 1 + xi(x) and a branch-vs-jump coin. Particles
// leaving the environment window raise DomainTooSmall.
ReplicaSummary simulate_replica(const Environment& env, const SimOptions& opts,
                                std::uint64_t seed, std::uint64_t replica,
                                const ParticleVisitor* visitor = nullptr,
                                std::vector<std::vector<double>>* hist_accum = nullptr);

// Merged first/second moment accumulators of N(t, x) over replicas.
struct SimMoments {
  std::vector<double> times;
  Window hist_window{0, 0};
  std::vector<std::vector<double>> sum;     // [time][site]
  std::vector<std::vector<double>> sumsq;   // [time][site]
  std::int64_t replicas = 0;
  std::vector<ReplicaSummary> per_replica;  // indexed by replica

  double mean(std::size_t ti, std::int64_t x) const;
  double sem(std::size_t ti, std::int64_t x) const;  // standard error of the mean
};

// Replicas are independent tasks on disjoint rng streams keyed by replica
// index; results are merged in replica order, so output is deterministic
// regardless of scheduling.
SimMoments run_replicas(const Environment& env, const SimOptions& opts, std::int64_t replicas,
                        std::uint64_t seed);

struct MedianEstimate {
  std::vector<double> times;
  std::vector<std::int64_t> median;   // m(t)
  std::vector<double> ci_halfwidth;   // binomial CI half-width on P(M >= x)
  bool tainted = false;               // some replica hit the cap
  std::vector<std::vector<std::int32_t>> samples;  // per time: sorted M values
};

MedianEstimate estimate_median(const Environment& env, std::span<const double> t_grid,
                               std::int64_t replicas, std::uint64_t seed,
                               const SimOptions& base = {});

struct PsiParams {
  double C = 5.0;   // additive constant of psi
  double C1 = 2.0;  // log coefficient
  double alpha = 3.0;
};

struct LeadingCount {
  std::int64_t m_bar = 0;
  double p_hat = 0.0;  // empirical P(N^L_t >= 1)
  double se = 0.0;
  std::vector<std::int64_t> leading;   // per replica
  std::vector<std::int64_t> at_least;  // per replica: N^>=(t, m_bar)
};

// Fraction of replicas containing a leading particle: Y_t >= m_bar,
// Y_{T_{m_bar}} >= m_bar, and H_k >= T_k - alpha psi(k) for 1 <= k < m_bar.
LeadingCount leading_count(const Environment& env, double t, std::span<const double> tn_table,
                           std::int64_t m_bar, const PsiParams& psi, std::int64_t replicas,
                           std::uint64_t seed, const SimOptions& base = {});

struct SecondMomentEstimate {
  double mean = 0.0;  // mean of (count within barriers)^2
  double se = 0.0;    // jackknife standard error
  bool tainted = false;
};

SecondMomentEstimate empirical_second_moment(const Environment& env, double barrier_lo,
                                             double barrier_hi, double t, std::int64_t replicas,
                                             std::uint64_t seed, const SimOptions& base = {});

// Serial reference for the replica loop; identical results to run_replicas.
SimMoments run_replicas_serial(const Environment& env, const SimOptions& opts,
                               std::int64_t replicas, std::uint64_t seed);

}  // namespace brw
