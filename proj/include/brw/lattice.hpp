#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/env.hpp"

namespace brw {

// Lattice function u(x) = mantissa(x) * e^offset. The global offset absorbs
// the exponential growth so mantissas stay O(1); renormalization is a scalar
// event that leaves offset + ln(mantissa) invariant.
struct LogField {
  double offset = 0.0;
  double time = 0.0;
  std::int64_t x_lo = 0;
  std::vector<double> v;  // mantissas, non-negative
  std::int64_t steps = 0;

  std::int64_t x_hi() const { return x_lo + static_cast<std::int64_t>(v.size()) - 1; }
  double at(std::int64_t x) const { return v[static_cast<std::size_t>(x - x_lo)]; }
  // ln u(x); -inf where the mantissa is exactly zero.
  double log_at(std::int64_t x) const;
  double max_mantissa() const;
};

// Plain bounded field for the reaction and Dirichlet problems.
struct PlainField {
  double time = 0.0;
  std::int64_t x_lo = 0;
  std::vector<double> v;
  std::int64_t steps = 0;

  std::int64_t x_hi() const { return x_lo + static_cast<std::int64_t>(v.size()) - 1; }
  double at(std::int64_t x) const { return v[static_cast<std::size_t>(x - x_lo)]; }
};

struct IntegratorConfig {
  double dt = 0.0;  // 0 selects the default 0.1 / (1 + max potential)
  int renormalize_every = 1;
  double boundary_mass_tol = 1e-8;
  bool check_boundary = true;
};

double default_dt(double max_potential);

// Stability guard dt <= 0.25 / (1 + max xi); throws InvalidArgument beyond.
double resolve_dt(const IntegratorConfig& cfg, double max_potential);

LogField make_delta0(Window domain);
LogField make_left_block(Window domain, double C);  // C * 1_{x <= 0}

// One classical RK4 step of du/dt = Delta_d u + xi u on the mantissas,
// with absorbing (zero) ghost values, followed by renormalization.
// `xi` is aligned with the field domain. Throws DomainTooSmall when the
// boundary mantissa exceeds boundary_mass_tol relative to the max.
void step_linear(LogField& f, std::span<const double> xi, const IntegratorConfig& cfg);

// One RK4 step of dw/dt = Delta_d w + xi w (1 - w) in plain storage.
// Clamps to [0,1] within 1e-12 of the bounds; larger excursions throw
// Instability.
void step_reaction(PlainField& f, std::span<const double> xi, const IntegratorConfig& cfg);

// One RK4 step of dr/dt = Delta_d r + psi r on x < n with r(n) held at 1
// (right ghost) and absorbing left ghost; psi = zeta + eta <= 0 aligned with
// the field domain, whose right edge is site n-1.
void step_dirichlet(PlainField& f, std::span<const double> psi, const IntegratorConfig& cfg);

// Serial reference kernels: same arithmetic, unfused loops, no OpenMP.
// Kept for tests and the kernel benchmark.
namespace reference {
void step_linear(LogField& f, std::span<const double> xi, const IntegratorConfig& cfg);
void step_reaction(PlainField& f, std::span<const double> xi, const IntegratorConfig& cfg);
}  // namespace reference

enum class ConvergenceProblem { Linear, Reaction, DirichletNonSmooth };

// Step-halving Richardson order estimate for the given problem class.
double convergence_check(ConvergenceProblem problem, double dt);

}  // namespace brw
