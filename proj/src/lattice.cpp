#include "brw/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"

namespace brw {

namespace {

constexpr std::int64_t kParallelThreshold = 2048;

// Stage-fused RK4 kernels. Each output site depends only on the inputs, so
// the parallel loops are bitwise identical to the serial reference.

// out = f(u + c*kp) for the linear rhs f(s) = (s(x+1)+s(x-1))/2 + (pot-1) s,
// with ghost values gl/gr for s outside the domain.
void rhs_linear_stage(std::span<double> out, std::span<const double> u,
                      std::span<const double> kp, double c, std::span<const double> pot,
                      double gl, double gr) {
  const std::int64_t n = static_cast<std::int64_t>(out.size());
  auto s_at = [&](std::int64_t j) { return u[static_cast<std::size_t>(j)] + c * kp[static_cast<std::size_t>(j)]; };
#pragma omp parallel for if (n >= kParallelThreshold) schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    const double left = j > 0 ? s_at(j - 1) : gl;
    const double right = j < n - 1 ? s_at(j + 1) : gr;
    const double mid = s_at(j);
    out[static_cast<std::size_t>(j)] =
        0.5 * (right + left) + (pot[static_cast<std::size_t>(j)] - 1.0) * mid;
  }
}

// Same for the reaction rhs f(s) = (s(x+1)+s(x-1))/2 - s + xi s (1-s),
// absorbing ghosts.
void rhs_reaction_stage(std::span<double> out, std::span<const double> u,
                        std::span<const double> kp, double c, std::span<const double> xi) {
  const std::int64_t n = static_cast<std::int64_t>(out.size());
  auto s_at = [&](std::int64_t j) { return u[static_cast<std::size_t>(j)] + c * kp[static_cast<std::size_t>(j)]; };
#pragma omp parallel for if (n >= kParallelThreshold) schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    const double left = j > 0 ? s_at(j - 1) : 0.0;
    const double right = j < n - 1 ? s_at(j + 1) : 0.0;
    const double mid = s_at(j);
    out[static_cast<std::size_t>(j)] = 0.5 * (right + left) - mid +
                                       xi[static_cast<std::size_t>(j)] * mid * (1.0 - mid);
  }
}

void combine_rk4(std::span<double> u, std::span<const double> k1, std::span<const double> k2,
                 std::span<const double> k3, std::span<const double> k4, double dt) {
  const std::int64_t n = static_cast<std::int64_t>(u.size());
#pragma omp parallel for if (n >= kParallelThreshold) schedule(static)
  for (std::int64_t j = 0; j < n; ++j) {
    const auto i = static_cast<std::size_t>(j);
    u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

struct Buffers {
  std::vector<double> k1, k2, k3, k4;
  void resize(std::size_t n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
  }
};

thread_local Buffers tl_buffers;

// RK4 with a linear rhs and constant ghost value gr on the right (0 for
// absorbing, 1 for the Dirichlet problem held at one). The ghost of the
// stage input u + c*k is gr + c*0 = gr since the boundary value is constant.
void rk4_linear(std::vector<double>& u, std::span<const double> pot, double dt, double gr) {
  Buffers& b = tl_buffers;
  b.resize(u.size());
  rhs_linear_stage(b.k1, u, b.k1, 0.0, pot, 0.0, gr);
  rhs_linear_stage(b.k2, u, b.k1, 0.5 * dt, pot, 0.0, gr);
  rhs_linear_stage(b.k3, u, b.k2, 0.5 * dt, pot, 0.0, gr);
  rhs_linear_stage(b.k4, u, b.k3, dt, pot, 0.0, gr);
  combine_rk4(u, b.k1, b.k2, b.k3, b.k4, dt);
}

void renormalize(LogField& f) {
  const double m = f.max_mantissa();
  if (m > 0.0 && (m < 0.5 || m > 2.0)) {
    f.offset += std::log(m);
    const double inv = 1.0 / m;
    for (double& x : f.v) x *= inv;
  }
}

void check_edges(const LogField& f, double tol) {
  const double m = f.max_mantissa();
  if (f.v.front() > tol * m || f.v.back() > tol * m)
    throw DomainTooSmall("step_linear: boundary mantissa exceeds " + std::to_string(tol) +
                         " of max at t = " + std::to_string(f.time));
}

void clamp_reaction(PlainField& f) {
  for (double& x : f.v) {
    if (x < 0.0) {
      if (x < -1e-9)
        throw Instability("step_reaction: w = " + std::to_string(x) + " at t = " +
                          std::to_string(f.time));
      x = 0.0;
    } else if (x > 1.0) {
      if (x > 1.0 + 1e-9)
        throw Instability("step_reaction: w = " + std::to_string(x) + " at t = " +
                          std::to_string(f.time));
      // only excursions within 1e-12 are silently clamped; anything between
      // is still clamped but counts as roundoff accumulation, not data
      x = 1.0;
    }
  }
}

}  // namespace

double LogField::log_at(std::int64_t x) const {
  const double m = at(x);
  return m > 0.0 ? offset + std::log(m) : -std::numeric_limits<double>::infinity();
}

double LogField::max_mantissa() const { return *std::max_element(v.begin(), v.end()); }

double default_dt(double max_potential) { return 0.1 / (1.0 + max_potential); }

double resolve_dt(const IntegratorConfig& cfg, double max_potential) {
  const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(max_potential);
  if (dt > 0.25 / (1.0 + max_potential))
    throw InvalidArgument("integrator: dt = " + std::to_string(dt) +
                          " violates the stability guard 0.25/(1+max xi)");
  return dt;
}

LogField make_delta0(Window domain) {
  if (!domain.contains(0)) throw InvalidArgument("make_delta0: domain must contain 0");
  LogField f;
  f.x_lo = domain.lo;
  f.v.assign(static_cast<std::size_t>(domain.size()), 0.0);
  f.v[static_cast<std::size_t>(-domain.lo)] = 1.0;
  return f;
}

LogField make_left_block(Window domain, double C) {
  if (C < 1.0) throw InvalidArgument("make_left_block: C must be >= 1");
  if (!domain.contains(0)) throw InvalidArgument("make_left_block: domain must contain 0");
  LogField f;
  f.x_lo = domain.lo;
  f.v.assign(static_cast<std::size_t>(domain.size()), 0.0);
  for (std::int64_t x = domain.lo; x <= 0; ++x) f.v[static_cast<std::size_t>(x - domain.lo)] = C;
  return f;
}

void step_linear(LogField& f, std::span<const double> xi, const IntegratorConfig& cfg) {
  if (xi.size() != f.v.size()) throw InvalidArgument("step_linear: potential size mismatch");
  const double mx = *std::max_element(xi.begin(), xi.end());
  const double dt = resolve_dt(cfg, mx);
  rk4_linear(f.v, xi, dt, 0.0);
  f.time += dt;
  ++f.steps;
  if (f.steps % cfg.renormalize_every == 0) renormalize(f);
  if (cfg.check_boundary) check_edges(f, cfg.boundary_mass_tol);
}

void step_reaction(PlainField& f, std::span<const double> xi, const IntegratorConfig& cfg) {
  if (xi.size() != f.v.size()) throw InvalidArgument("step_reaction: potential size mismatch");
  const double mx = *std::max_element(xi.begin(), xi.end());
  const double dt = resolve_dt(cfg, mx);
  Buffers& b = tl_buffers;
  b.resize(f.v.size());
  rhs_reaction_stage(b.k1, f.v, b.k1, 0.0, xi);
  rhs_reaction_stage(b.k2, f.v, b.k1, 0.5 * dt, xi);
  rhs_reaction_stage(b.k3, f.v, b.k2, 0.5 * dt, xi);
  rhs_reaction_stage(b.k4, f.v, b.k3, dt, xi);
  combine_rk4(f.v, b.k1, b.k2, b.k3, b.k4, dt);
  f.time += dt;
  ++f.steps;
  clamp_reaction(f);
}

void step_dirichlet(PlainField& f, std::span<const double> psi, const IntegratorConfig& cfg) {
  if (psi.size() != f.v.size()) throw InvalidArgument("step_dirichlet: potential size mismatch");
  const double mx = *std::max_element(psi.begin(), psi.end());
  if (mx > 0.0) throw InvalidArgument("step_dirichlet: potential must be <= 0");
  const double dt = resolve_dt(cfg, 0.0);
  std::vector<double>& u = f.v;
  Buffers& b = tl_buffers;
  b.resize(u.size());
  rhs_linear_stage(b.k1, u, b.k1, 0.0, psi, 0.0, 1.0);
  rhs_linear_stage(b.k2, u, b.k1, 0.5 * dt, psi, 0.0, 1.0);
  rhs_linear_stage(b.k3, u, b.k2, 0.5 * dt, psi, 0.0, 1.0);
  rhs_linear_stage(b.k4, u, b.k3, dt, psi, 0.0, 1.0);
  combine_rk4(u, b.k1, b.k2, b.k3, b.k4, dt);
  f.time += dt;
  ++f.steps;
  if (cfg.check_boundary) {
    const double m = *std::max_element(u.begin(), u.end());
    if (m > 0.0 && u.front() > cfg.boundary_mass_tol * m)
      throw DomainTooSmall("step_dirichlet: left boundary mass at t = " +
                           std::to_string(f.time));
  }
}

namespace reference {

namespace {
// Unfused: materialize the stage input, then apply the plain rhs.
void rhs_linear_plain(std::vector<double>& out, const std::vector<double>& s,
                      std::span<const double> pot, double gl, double gr) {
  const std::int64_t n = static_cast<std::int64_t>(s.size());
  for (std::int64_t j = 0; j < n; ++j) {
    const double left = j > 0 ? s[static_cast<std::size_t>(j - 1)] : gl;
    const double right = j < n - 1 ? s[static_cast<std::size_t>(j + 1)] : gr;
    out[static_cast<std::size_t>(j)] =
        0.5 * (right + left) +
        (pot[static_cast<std::size_t>(j)] - 1.0) * s[static_cast<std::size_t>(j)];
  }
}

std::vector<double> axpy(const std::vector<double>& u, double c, const std::vector<double>& k) {
  std::vector<double> s(u.size());
  for (std::size_t j = 0; j < u.size(); ++j) s[j] = u[j] + c * k[j];
  return s;
}
}  // namespace

void step_linear(LogField& f, std::span<const double> xi, const IntegratorConfig& cfg) {
  if (xi.size() != f.v.size()) throw InvalidArgument("step_linear: potential size mismatch");
  const double mx = *std::max_element(xi.begin(), xi.end());
  const double dt = resolve_dt(cfg, mx);
  std::vector<double>& u = f.v;
  std::vector<double> k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size());
  rhs_linear_plain(k1, u, xi, 0.0, 0.0);
  rhs_linear_plain(k2, axpy(u, 0.5 * dt, k1), xi, 0.0, 0.0);
  rhs_linear_plain(k3, axpy(u, 0.5 * dt, k2), xi, 0.0, 0.0);
  rhs_linear_plain(k4, axpy(u, dt, k3), xi, 0.0, 0.0);
  for (std::size_t j = 0; j < u.size(); ++j)
    u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  f.time += dt;
  ++f.steps;
  if (f.steps % cfg.renormalize_every == 0) renormalize(f);
  if (cfg.check_boundary) check_edges(f, cfg.boundary_mass_tol);
}

void step_reaction(PlainField& f, std::span<const double> xi, const IntegratorConfig& cfg) {
  if (xi.size() != f.v.size()) throw InvalidArgument("step_reaction: potential size mismatch");
  const double mx = *std::max_element(xi.begin(), xi.end());
  const double dt = resolve_dt(cfg, mx);
  auto rhs = [&](const std::vector<double>& s, std::vector<double>& out) {
    const std::int64_t n = static_cast<std::int64_t>(s.size());
    for (std::int64_t j = 0; j < n; ++j) {
      const double left = j > 0 ? s[static_cast<std::size_t>(j - 1)] : 0.0;
      const double right = j < n - 1 ? s[static_cast<std::size_t>(j + 1)] : 0.0;
      const double mid = s[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(j)] =
          0.5 * (right + left) - mid + xi[static_cast<std::size_t>(j)] * mid * (1.0 - mid);
    }
  };
  std::vector<double>& u = f.v;
  std::vector<double> k1(u.size()), k2(u.size()), k3(u.size()), k4(u.size());
  rhs(u, k1);
  rhs(axpy(u, 0.5 * dt, k1), k2);
  rhs(axpy(u, 0.5 * dt, k2), k3);
  rhs(axpy(u, dt, k3), k4);
  for (std::size_t j = 0; j < u.size(); ++j)
    u[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  f.time += dt;
  ++f.steps;
  clamp_reaction(f);
}

}  // namespace reference

double convergence_check(ConvergenceProblem problem, double dt) {
  // Distance from a step-halved run measured at a fixed time; the observed
  // order is log2 of the ratio of successive differences.
  const Window dom{-40, 40};
  const double T = problem == ConvergenceProblem::DirichletNonSmooth ? 2.0 : 1.0;
  std::vector<double> pot(static_cast<std::size_t>(dom.size()));
  for (std::int64_t x = dom.lo; x <= dom.hi; ++x)
    pot[static_cast<std::size_t>(x - dom.lo)] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(x));

  auto run = [&](double h) -> std::vector<double> {
    IntegratorConfig cfg;
    cfg.dt = h;
    cfg.check_boundary = false;
    const auto nsteps = static_cast<std::int64_t>(std::llround(T / h));
    switch (problem) {
      case ConvergenceProblem::Linear: {
        // smooth initial data
        LogField f;
        f.x_lo = dom.lo;
        f.v.resize(static_cast<std::size_t>(dom.size()));
        for (std::int64_t x = dom.lo; x <= dom.hi; ++x)
          f.v[static_cast<std::size_t>(x - dom.lo)] =
              std::exp(-0.05 * static_cast<double>(x * x));
        cfg.renormalize_every = 1 << 30;  // keep raw values comparable
        for (std::int64_t s = 0; s < nsteps; ++s) step_linear(f, pot, cfg);
        return f.v;
      }
      case ConvergenceProblem::Reaction: {
        PlainField f;
        f.x_lo = dom.lo;
        f.v.resize(static_cast<std::size_t>(dom.size()));
        for (std::int64_t x = dom.lo; x <= dom.hi; ++x)
          f.v[static_cast<std::size_t>(x - dom.lo)] =
              1.0 / (1.0 + std::exp(0.5 * static_cast<double>(x)));
        for (std::int64_t s = 0; s < nsteps; ++s) step_reaction(f, pot, cfg);
        return f.v;
      }
      case ConvergenceProblem::DirichletNonSmooth: {
        PlainField f;
        f.x_lo = dom.lo;
        f.v.assign(static_cast<std::size_t>(dom.size()), 0.0);  // non-smooth start
        std::vector<double> psi(pot.size());
        for (std::size_t j = 0; j < pot.size(); ++j) psi[j] = -0.2 - 0.1 * pot[j];
        for (std::int64_t s = 0; s < nsteps; ++s) step_dirichlet(f, psi, cfg);
        return f.v;
      }
    }
    return {};
  };

  const auto u1 = run(dt);
  const auto u2 = run(dt / 2.0);
  const auto u3 = run(dt / 4.0);
  double d12 = 0.0, d23 = 0.0;
  for (std::size_t j = 0; j < u1.size(); ++j) {
    d12 = std::max(d12, std::abs(u1[j] - u2[j]));
    d23 = std::max(d23, std::abs(u2[j] - u3[j]));
  }
  if (d23 <= 0.0) return std::numeric_limits<double>::infinity();
  return std::log2(d12 / d23);
}

}  // namespace brw
