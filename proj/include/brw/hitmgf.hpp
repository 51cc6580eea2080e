#pragma once

#include <cstdint>
#include <vector>

#include "brw/env.hpp"

namespace brw {

// L_i = log MGF of the potential-weighted passage time from site i-1 to i,
// together with its first two eta-derivatives:
//   d1 = E^{zeta,eta}[tau_i],  d2 = Var^{zeta,eta}[tau_i].
struct MgfEval {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double trunc_bound = 0.0;       // certified absolute error bound on value
  bool slow_convergence = false;  // window cap hit before the tolerance
};

struct TruncationConfig {
  std::int64_t initial_window = 64;
  double tol = 1e-12;
  std::int64_t window_cap = 1'000'000;
};

// Quenched evaluation at a single site via the ratio recursion
//   a(x) = (1/2) / (1 - psi(x) - a(x-1)/2),   psi = zeta + eta,
// seeded at x = i-1-M with the constant-potential fixed point and doubling
// M until the change at a(i-1) falls below tol. Value and both derivatives
// propagate through the recursion in forward mode.
//
// Throws NonFiniteMgf when eta makes psi reach >= 0 with eta > 0, and
// WindowUnderflow when doubling exhausts the environment window.
MgfEval log_mgf_site(const ZetaView& zeta, std::int64_t i, double eta,
                     const TruncationConfig& cfg = {});

// Batch evaluation for sites i_first .. i_first+count-1 sharing one left
// margin per chunk; identical contract per site. Parallel over chunks.
std::vector<MgfEval> log_mgf_range(const ZetaView& zeta, std::int64_t i_first,
                                   std::int64_t count, double eta,
                                   const TruncationConfig& cfg = {});

// Reference path for the batch evaluation: independent per-site solves,
// no chunk sharing. Kept for tests and the kernel benchmark.
std::vector<MgfEval> log_mgf_range_serial(const ZetaView& zeta, std::int64_t i_first,
                                          std::int64_t count, double eta,
                                          const TruncationConfig& cfg = {});

// Arithmetic mean over sites 1..n (value and both derivatives);
// trunc_bound is the max of the per-site bounds.
MgfEval log_mgf_avg(const ZetaView& zeta, std::int64_t n, double eta,
                    const TruncationConfig& cfg = {});

struct PopulationMgf {
  MgfEval avg;
  double se_value = 0.0;  // batched standard error of the mean value
  double se_d1 = 0.0;
  std::int64_t n_sites = 0;
};

// Monte Carlo estimate of L(eta) = E[L_1] over a freshly sampled window.
PopulationMgf log_mgf_population(const EnvironmentLaw& law, double eta,
                                 std::int64_t n_sites, std::uint64_t seed,
                                 const TruncationConfig& cfg = {});

// Brute-force oracle: solves the dirichlet system
//   (1 - psi(x)) g(x) = (g(x+1) + g(x-1)) / 2   on  x in [i-1-M, i-1],
// with g(i) = 1 and absorbing g(i-2-M) = 0, and returns ln g(i-1).
double oracle_dense(const ZetaView& zeta, std::int64_t i, double eta, std::int64_t M);

}  // namespace brw
