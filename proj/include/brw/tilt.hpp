#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/env.hpp"
#include "brw/hitmgf.hpp"

namespace brw {

enum class TiltMode { Empirical, Population };

// Solution of L'(eta) = 1/v, with the Legendre value eta/v - L(eta).
struct TiltSolution {
  double v = 0.0;
  double eta_bar = 0.0;
  double legendre = 0.0;   // (Lbar_n)^*(1/v) resp. L^*(1/v)
  double l_at_eta = 0.0;   // Lbar_n(eta_bar), used to assemble lambda
  double residual = 0.0;   // |L'(eta_bar) - 1/v|
  TiltMode mode = TiltMode::Empirical;
  std::int64_t n = 0;
  bool in_delta = true;    // eta_bar inside the configured [eta_lo, eta_hi]
  double std_error = 0.0;  // MC standard error of eta_bar (population mode)
};

struct TiltConfig {
  double eta_lo = -10.0;  // compact tilt interval used for the in_delta report
  double eta_hi = -1e-3;
  double residual_tol = 1e-10;
  double eta_floor = -64.0;  // hard bracketing floor
  double d1_divergence = 1e6;  // L'(0) beyond this reports v_c = 0
  TruncationConfig trunc;
};

// Empirical tilt on sites 1..n of the given realization. Throws
// NoTiltSolution when (Lbar_n)'(0-) < 1/v, i.e. v is below the empirical
// critical velocity. (The paper's convention "eta = 0 in that case" is
// surfaced as an error instead of a silent zero.)
TiltSolution solve_eta_empirical(const ZetaView& zeta, std::int64_t n, double v,
                                 const TiltConfig& cfg = {});

// Population tilt: Monte Carlo proxy of L over a freshly sampled window of
// n_mc sites. Throws NoTiltSolution for v <= v_c of the sampled window.
TiltSolution solve_eta_population(const EnvironmentLaw& law, double v, std::int64_t n_mc,
                                  std::uint64_t seed, const TiltConfig& cfg = {});

// lambda(v) = es - v L^*(1/v) for v > v_c, and the linear branch
// es + v L(0) on [0, v_c] (reached automatically when no tilt solution
// exists). Never throws for v >= 0.
double lyapunov(const EnvironmentLaw& law, double v, std::int64_t n_mc, std::uint64_t seed,
                const TiltConfig& cfg = {});

// Same evaluation on a fixed realization (used for the degenerate
// constant-potential anchors).
double lyapunov_empirical(const ZetaView& zeta, std::int64_t n, double es, double v,
                          const TiltConfig& cfg = {});

struct CriticalVelocity {
  double v_c = 0.0;
  double d1_at_zero = 0.0;  // estimate of L'(0-)
  double std_error = 0.0;   // SE of v_c (0 when v_c = 0 is reported)
  bool slow_convergence = false;
};

// v_c = 1 / L'(0-); reports 0 when the derivative estimate exceeds the
// divergence threshold.
CriticalVelocity critical_velocity(const EnvironmentLaw& law, std::int64_t n_mc,
                                   std::uint64_t seed, const TiltConfig& cfg = {});

struct ZeroVelocity {
  double v0 = 0.0;
  double lambda_residual = 0.0;  // |lambda(v0)| at the returned root
  double v_c = 0.0;
  double margin = 0.0;  // 3 * combined standard errors
  bool vel_holds = false;
};

// Bracketing root of v -> lambda(v) on (0, v_max]; vel_holds requires
// v0 - v_c > margin.
ZeroVelocity zero_velocity(const EnvironmentLaw& law, std::int64_t n_mc, std::uint64_t seed,
                           const TiltConfig& cfg = {}, double v_max = 256.0);

struct LyapunovCurve {
  std::vector<double> v;
  std::vector<double> lambda;
  std::vector<double> eta_bar;   // NaN on the linear branch
  std::vector<double> legendre;  // NaN on the linear branch
  double v_c = 0.0;
  double v0 = 0.0;
  bool vel_holds = false;
};

LyapunovCurve lyapunov_curve(const EnvironmentLaw& law, std::span<const double> v_grid,
                             std::int64_t n_mc, std::uint64_t seed, const TiltConfig& cfg = {});

struct LagConfig {
  int lag_cutoff = 50;
  double tail_warn_frac = 0.01;
};

struct SigmaEstimates {
  double sigma_v2 = 0.0;     // Var(V_1) + 2 sum_{j>=2} Cov(V_1, V_j)
  double sigma_bar_v = 0.0;  // sqrt(sigma_v2 * v) / |L(eta_bar)|
  double se_sigma_v2 = 0.0;
  double eta_bar = 0.0;
  double l_at_eta = 0.0;
  int lag_used = 0;
  bool tail_warning = false;
};

// Variance constants from a long window (sites 1..zeta.window.hi).
// Throws DegenerateVariance when the truncated series is <= 0.
SigmaEstimates sigma_constants(const ZetaView& zeta_long, double v, const LagConfig& lag = {},
                               const TiltConfig& cfg = {});

// sigma_n^zeta(v) = |eta_n(v)| * sqrt(sum_{i<=n} (L_i)''(eta_n(v))).
double sigma_n_zeta(const ZetaView& zeta, double v, std::int64_t n, const TiltConfig& cfg = {});

// W_n(t) = t sqrt(n) ((Lbar_{nt})^*(1/v) - L^*(1/v)) / sigma_v on the grid,
// with linear interpolation in the fractional part of nt.
std::vector<double> w_n_path(const ZetaView& zeta, double v, std::int64_t n,
                             std::span<const double> t_grid, double sigma_v,
                             double legendre_pop, const TiltConfig& cfg = {});

}  // namespace brw
