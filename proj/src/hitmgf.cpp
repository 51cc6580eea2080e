#include "brw/hitmgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace brw {

namespace {

// Value of the recursion together with d/deta and d^2/deta^2.
struct Trip {
  double a, da, dda;
};

inline Trip cf_step(const Trip& p, double psi) {
  const double D = 1.0 - psi - 0.5 * p.a;
  const double a = 0.5 / D;
  const double Dp = -1.0 - 0.5 * p.da;
  const double Dpp = -0.5 * p.dda;
  const double da = -a * Dp / D;
  const double dda = 2.0 * a * Dp * Dp / (D * D) - a * Dpp / D;
  return {a, da, dda};
}

// Fixed point of the constant-potential recursion, a root of
// a^2/2 - (1-psi) a + 1/2 = 0 in (0,1].
inline double fixed_point(double psi) {
  const double b = 1.0 - psi;
  return b - std::sqrt(b * b - 1.0);
}

void check_eta(const ZetaView& z, double eta) {
  if (eta > 0.0 && eta + z.max_zeta() >= 0.0)
    throw NonFiniteMgf("log_mgf: MGF is infinite (zeta + eta reaches 0 with eta > 0)");
}

// One left-seeded sweep over sites i_first..i_first+count-1 with margin M.
// out[k] holds the triple for site i_first+k (i.e. a at x = i_first+k-1).
void sweep(const ZetaView& z, std::int64_t i_first, std::int64_t count, double eta,
           std::int64_t M, double a_seed, Trip* out) {
  const std::int64_t x_start = i_first - 1 - M;
  Trip t{a_seed, 0.0, 0.0};
  for (std::int64_t x = x_start; x <= i_first + count - 2; ++x) {
    t = cf_step(t, z.at(x) + eta);
    if (x >= i_first - 1) out[x - (i_first - 1)] = t;
  }
}

struct Tol {
  double value, d1, d2;
};

bool converged(const Trip& a, const Trip& b, const Tol& tol) {
  // |a - b| <= tol * b.a certifies |ln a - ln b| <= tol to first order.
  return std::abs(a.a - b.a) <= tol.value * b.a &&
         std::abs(a.da - b.da) <= tol.d1 * std::max(1.0, std::abs(b.da)) &&
         std::abs(a.dda - b.dda) <= tol.d2 * std::max(1.0, std::abs(b.dda));
}

MgfEval to_eval(const Trip& t, double bound, bool slow) {
  MgfEval e;
  e.value = std::log(t.a);
  e.d1 = t.da / t.a;
  e.d2 = t.dda / t.a - e.d1 * e.d1;
  e.trunc_bound = bound;
  e.slow_convergence = slow;
  return e;
}

// Doubling driver shared by the site and chunk paths. Returns per-site
// evaluations for the block; bounds come from the last doubling step.
std::vector<MgfEval> eval_block(const ZetaView& z, std::int64_t i_first, std::int64_t count,
                                double eta, const TruncationConfig& cfg, double a_seed) {
  const Tol tol{cfg.tol / 2.0, 1e-10, 1e-10};
  std::vector<Trip> prev(static_cast<std::size_t>(count));
  std::vector<Trip> cur(static_cast<std::size_t>(count));
  std::int64_t M = std::min(cfg.initial_window, cfg.window_cap);
  if (i_first - 1 - M < z.window.lo)
    throw WindowUnderflow("log_mgf: window underflow at site " + std::to_string(i_first) +
                          " (margin " + std::to_string(M) + ")");
  sweep(z, i_first, count, eta, M, a_seed, prev.data());
  while (true) {
    const std::int64_t M2 = std::min(2 * M, cfg.window_cap);
    if (M2 == M) {  // cap reached already at the first sweep
      std::vector<MgfEval> out(static_cast<std::size_t>(count));
      for (std::int64_t k = 0; k < count; ++k)
        out[static_cast<std::size_t>(k)] = to_eval(prev[static_cast<std::size_t>(k)],
                                                   std::numeric_limits<double>::infinity(), true);
      return out;
    }
    if (i_first - 1 - M2 < z.window.lo)
      throw WindowUnderflow("log_mgf: window underflow at site " + std::to_string(i_first) +
                            " (margin " + std::to_string(M2) + ")");
    sweep(z, i_first, count, eta, M2, a_seed, cur.data());
    bool ok = true;
    for (std::int64_t k = 0; k < count; ++k)
      if (!converged(prev[static_cast<std::size_t>(k)], cur[static_cast<std::size_t>(k)], tol)) {
        ok = false;
        break;
      }
    if (ok || M2 >= cfg.window_cap) {
      std::vector<MgfEval> out(static_cast<std::size_t>(count));
      for (std::int64_t k = 0; k < count; ++k) {
        const auto& p = prev[static_cast<std::size_t>(k)];
        const auto& c = cur[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(k)] =
            to_eval(c, std::abs(std::log(c.a) - std::log(p.a)), !ok);
      }
      return out;
    }
    M = M2;
    prev.swap(cur);
  }
}

}  // namespace

MgfEval log_mgf_site(const ZetaView& zeta, std::int64_t i, double eta,
                     const TruncationConfig& cfg) {
  check_eta(zeta, eta);
  return eval_block(zeta, i, 1, eta, cfg, fixed_point(zeta.min_zeta() + eta))[0];
}

std::vector<MgfEval> log_mgf_range(const ZetaView& zeta, std::int64_t i_first,
                                   std::int64_t count, double eta,
                                   const TruncationConfig& cfg) {
  if (count <= 0) throw InvalidArgument("log_mgf_range: count must be positive");
  check_eta(zeta, eta);
  const double a_seed = fixed_point(zeta.min_zeta() + eta);
  constexpr std::int64_t kChunk = 4096;
  const std::int64_t n_chunks = (count + kChunk - 1) / kChunk;
  std::vector<MgfEval> out(static_cast<std::size_t>(count));
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < n_chunks; ++c) {
    try {
      const std::int64_t lo = c * kChunk;
      const std::int64_t len = std::min(kChunk, count - lo);
      auto block = eval_block(zeta, i_first + lo, len, eta, cfg, a_seed);
      std::copy(block.begin(), block.end(), out.begin() + lo);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

std::vector<MgfEval> log_mgf_range_serial(const ZetaView& zeta, std::int64_t i_first,
                                          std::int64_t count, double eta,
                                          const TruncationConfig& cfg) {
  std::vector<MgfEval> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k)
    out.push_back(log_mgf_site(zeta, i_first + k, eta, cfg));
  return out;
}

MgfEval log_mgf_avg(const ZetaView& zeta, std::int64_t n, double eta,
                    const TruncationConfig& cfg) {
  if (n < 1) throw InvalidArgument("log_mgf_avg: n must be >= 1");
  const auto evals = log_mgf_range(zeta, 1, n, eta, cfg);
  MgfEval avg;
  for (const auto& e : evals) {
    avg.value += e.value;
    avg.d1 += e.d1;
    avg.d2 += e.d2;
    avg.trunc_bound = std::max(avg.trunc_bound, e.trunc_bound);
    avg.slow_convergence |= e.slow_convergence;
  }
  const double inv = 1.0 / static_cast<double>(n);
  avg.value *= inv;
  avg.d1 *= inv;
  avg.d2 *= inv;
  return avg;
}

PopulationMgf log_mgf_population(const EnvironmentLaw& law, double eta,
                                 std::int64_t n_sites, std::uint64_t seed,
                                 const TruncationConfig& cfg) {
  law.validate();
  if (n_sites < 1) throw InvalidArgument("log_mgf_population: n_sites must be >= 1");
  std::int64_t margin = 4096;
  while (true) {
    // Counter-based sampling: widening the window regenerates the same
    // values on the overlap, so retries extend rather than resample.
    const Environment env = sample_environment(law, {1 - margin, n_sites}, seed);
    const ZetaView z = zeta_of(env);
    std::vector<MgfEval> evals;
    try {
      evals = log_mgf_range(z, 1, n_sites, eta, cfg);
    } catch (const WindowUnderflow&) {
      if (margin >= cfg.window_cap) throw;
      margin *= 4;
      continue;
    }
    PopulationMgf pop;
    pop.n_sites = n_sites;
    for (const auto& e : evals) {
      pop.avg.value += e.value;
      pop.avg.d1 += e.d1;
      pop.avg.d2 += e.d2;
      pop.avg.trunc_bound = std::max(pop.avg.trunc_bound, e.trunc_bound);
      pop.avg.slow_convergence |= e.slow_convergence;
    }
    const double inv = 1.0 / static_cast<double>(n_sites);
    pop.avg.value *= inv;
    pop.avg.d1 *= inv;
    pop.avg.d2 *= inv;

    // Batch means over contiguous segments; correlations decay within a
    // few sites so 64 batches are effectively independent.
    const std::int64_t n_batches = std::min<std::int64_t>(64, n_sites);
    double sv = 0.0, sd = 0.0;
    for (std::int64_t b = 0; b < n_batches; ++b) {
      const std::int64_t lo = b * n_sites / n_batches;
      const std::int64_t hi = (b + 1) * n_sites / n_batches;
      double mv = 0.0, md = 0.0;
      for (std::int64_t k = lo; k < hi; ++k) {
        mv += evals[static_cast<std::size_t>(k)].value;
        md += evals[static_cast<std::size_t>(k)].d1;
      }
      mv /= static_cast<double>(hi - lo);
      md /= static_cast<double>(hi - lo);
      sv += (mv - pop.avg.value) * (mv - pop.avg.value);
      sd += (md - pop.avg.d1) * (md - pop.avg.d1);
    }
    if (n_batches > 1) {
      pop.se_value = std::sqrt(sv / static_cast<double>(n_batches - 1) /
                               static_cast<double>(n_batches));
      pop.se_d1 = std::sqrt(sd / static_cast<double>(n_batches - 1) /
                            static_cast<double>(n_batches));
    }
    return pop;
  }
}

double oracle_dense(const ZetaView& zeta, std::int64_t i, double eta, std::int64_t M) {
  check_eta(zeta, eta);
  if (M < 0) throw InvalidArgument("oracle_dense: M must be >= 0");
  if (i - 1 - M < zeta.window.lo)
    throw WindowUnderflow("oracle_dense: window underflow");
  const std::size_t n = static_cast<std::size_t>(M + 1);
  // Thomas algorithm for (1-psi(x)) g(x) - g(x+1)/2 - g(x-1)/2 = rhs,
  // unknowns at x = i-1-M .. i-1, g(i)=1 folded into the rhs.
  std::vector<double> diag(n), rhs(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    diag[k] = 1.0 - (zeta.at(i - 1 - M + static_cast<std::int64_t>(k)) + eta);
  rhs[n - 1] = 0.5;
  std::vector<double> c(n, 0.0);
  c[0] = -0.5 / diag[0];
  rhs[0] = rhs[0] / diag[0];
  for (std::size_t k = 1; k < n; ++k) {
    const double m = diag[k] + 0.5 * c[k - 1];
    c[k] = -0.5 / m;
    rhs[k] = (rhs[k] + 0.5 * rhs[k - 1]) / m;
  }
  double g = rhs[n - 1];
  return std::log(g);
}

}  // namespace brw
