#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "brw/env.hpp"
#include "brw/lattice.hpp"

namespace brw {

struct U0Spec {
  enum Kind { Delta0, LeftBlock } kind = Delta0;
  double C = 1.0;  // LeftBlock height, C >= 1
};

struct PamConfig {
  Window domain{0, 0};
  IntegratorConfig integ;
  std::vector<double> sample_times;  // strictly increasing, all <= T
  std::int64_t tn_max = -1;          // track T_n for n in [0, tn_max]; -1 disables
  std::vector<double> velocities;    // per-velocity fronts m_bar_v / U_v
  std::vector<double> lambdas;       // lambda(v) per velocity
};

// ln u and ln of the tail sum at one sample time.
struct PamSnapshot {
  double t = 0.0;
  std::int64_t x_lo = 0;
  std::vector<double> ln_u;
  std::vector<double> ln_tail;  // ln sum_{y >= x} u(t, y)

  double ln_u_at(std::int64_t x) const { return ln_u[static_cast<std::size_t>(x - x_lo)]; }
  double ln_tail_at(std::int64_t x) const { return ln_tail[static_cast<std::size_t>(x - x_lo)]; }
  // linear interpolation of ln_tail at a real position
  double ln_tail_interp(double x) const;
  std::int64_t x_hi() const { return x_lo + static_cast<std::int64_t>(ln_u.size()) - 1; }
};

struct Breakpoint {
  std::int64_t m_bar = 0;
  double interp = 0.0;  // solves ln_tail = threshold, in [m_bar, m_bar+1)
};

struct FrontTrace {
  std::vector<double> times;
  std::vector<Breakpoint> m_bar;
  std::vector<std::vector<Breakpoint>> m_bar_v;  // [velocity][time]
  std::vector<std::vector<double>> u_v;          // [velocity][time]
  std::vector<double> tn;                        // T_n for n = 0..tn_max; NaN when not reached
};

struct PamResult {
  std::vector<PamSnapshot> snapshots;
  FrontTrace trace;
};

// Integrate the linear PAM on env over [0, T], sampling at the scheduled
// times and recording breakpoint-inverse crossings at step resolution.
PamResult run_pam(const Environment& env, U0Spec u0, double T, const PamConfig& cfg);

// Offset-aware log of the tail sum of a live field.
double tail_log_sum(const LogField& f, std::int64_t x);

// Largest x with tail >= exp(ln_threshold); the default threshold -ln 2
// gives the breakpoint of eq. (origBP). Throws FrontNotFormed when the
// whole tail sits below the threshold.
Breakpoint breakpoint(const PamSnapshot& snap, double ln_threshold);

// m_bar_v: threshold t.lambda(v) - ln 2, compared in the log domain.
Breakpoint breakpoint_v(const PamSnapshot& snap, double lambda_v);

// U_v(t) = t lambda(v) - ln u^>=(t, vt) - ln 2, interpolated at vt.
double u_v_stat(const PamSnapshot& snap, double v, double lambda_v);

struct YRestricted {
  double ln_y = 0.0;         // ln Y_v(n)
  double ln_y_approx = 0.0;  // ln Y^~ (hitting time within [n/v - K, n/v])
  double ln_y_less = 0.0;    // ln Y^< (hitting time before n/v - K)
};

// Dirichlet-restricted passage quantities via step_dirichlet with potential
// zeta + eta, evaluated at times n/v - K and n/v; the difference is taken
// as a compensated log-difference.
YRestricted y_restricted(const Environment& env, std::int64_t n, double v, double eta, double K,
                         std::int64_t left_margin = 0, double dt = 0.0);

using Barrier = std::function<double(double)>;  // t -> barrier position

struct SecondMoment {
  double value = 0.0;
  double first_moment = 0.0;
  bool resolution_warning = false;
};

// Two-term Feynman-Kac formula for the second moment of the number of
// particles whose genealogy stays inside the barriers up to time t.
// Barriers are sampled once per step (piecewise constant on the step grid).
SecondMoment second_moment_between(const Environment& env, const Barrier& phi1,
                                   const Barrier& phi2, double t, double dt = 0.0,
                                   Window domain = {0, 0});

// Residuals of ln E N^>=(n/v0, n) against sum_i L_i(eta) - n L, per n.
struct LogNResidual {
  std::int64_t n;
  double ln_tail;
  double series;
  double residual;
};
std::vector<LogNResidual> explicit_logn_check(const Environment& env,
                                              std::span<const std::int64_t> n_grid, double v0,
                                              double eta_bar, double l_value,
                                              const PamConfig& base_cfg);

}  // namespace brw
