#include "brw/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "brw/errors.hpp"
#include "brw/rng.hpp"

namespace brw {

namespace {

struct Lineage {
  double t;
  std::int32_t pos;
  std::uint32_t sched_idx;    // next schedule entry to record
  std::int32_t special_pos;   // position at special_time once passed
  bool special_done;
  bool in_barriers;
  std::vector<double> hits;   // H_k, k = 1..kmax; empty when untracked
};

}  // namespace

ReplicaSummary simulate_replica(const Environment& env, const SimOptions& opts,
                                std::uint64_t seed, std::uint64_t replica,
                                const ParticleVisitor* visitor,
                                std::vector<std::vector<double>>* hist_accum) {
  if (opts.start_count < 1) throw InvalidArgument("simulate_replica: empty initial condition");
  if (!env.window.contains(opts.start_pos))
    throw DomainTooSmall("simulate_replica: start position outside environment window");

  const Window hw = opts.hist_window.size() > 1 ? opts.hist_window : env.window;
  CounterRng rng(seed, replica);
  ReplicaSummary out;
  out.max_pos.assign(opts.schedule.size(), std::numeric_limits<std::int32_t>::min());

  const auto record = [&](std::uint32_t si, std::int32_t pos) {
    if (pos > out.max_pos[si]) out.max_pos[si] = pos;
    if (hist_accum != nullptr && hw.contains(pos))
      (*hist_accum)[si][static_cast<std::size_t>(pos - hw.lo)] += 1.0;
  };

  std::vector<double> hits0;
  if (opts.hits_kmax > 0)
    hits0.assign(static_cast<std::size_t>(opts.hits_kmax),
                 std::numeric_limits<double>::infinity());

  std::vector<Lineage> stack;
  const bool special0_done = opts.special_time >= 0.0 && opts.special_time <= 0.0;
  for (std::int64_t c = 0; c < opts.start_count; ++c)
    stack.push_back({0.0, opts.start_pos, 0, opts.start_pos, special0_done,
                     static_cast<double>(opts.start_pos) >= opts.barrier_lo &&
                         static_cast<double>(opts.start_pos) <= opts.barrier_hi,
                     hits0});

  std::int64_t created = opts.start_count;

  while (!stack.empty()) {
    Lineage p = std::move(stack.back());
    stack.pop_back();

    while (true) {
      const double xi_here = env.at(p.pos);
      const double rate = 1.0 + xi_here;
      const double t_next = p.t + rng.exponential(rate);

      // barrier bookkeeping: position is constant on [p.t, min(t_next, T)]
      if (p.in_barriers && (static_cast<double>(p.pos) < opts.barrier_lo ||
                            static_cast<double>(p.pos) > opts.barrier_hi))
        p.in_barriers = false;

      const double seg_end = std::min(t_next, opts.T);
      while (p.sched_idx < opts.schedule.size() &&
             opts.schedule[p.sched_idx] <= seg_end + 1e-15 &&
             opts.schedule[p.sched_idx] > p.t) {
        record(p.sched_idx, p.pos);
        ++p.sched_idx;
      }
      if (!p.special_done && opts.special_time >= 0.0 && opts.special_time <= seg_end) {
        p.special_pos = p.pos;
        p.special_done = true;
      }

      if (t_next >= opts.T) {
        ++out.population;
        if (p.in_barriers) ++out.in_barrier_count;
        if (visitor != nullptr)
          (*visitor)(ParticleView{p.pos, p.special_pos, p.in_barriers,
                                  std::span<const double>(p.hits)});
        break;
      }

      ++out.events;
      p.t = t_next;
      if (rng.uniform() * rate < 1.0) {
        // jump +-1
        p.pos += rng.uniform() < 0.5 ? -1 : 1;
        if (p.pos < env.window.lo || p.pos > env.window.hi)
          throw DomainTooSmall("simulate_replica: particle left the environment window at x = " +
                               std::to_string(p.pos));
        if (!p.hits.empty() && p.pos >= 1 && p.pos <= opts.hits_kmax) {
          double& h = p.hits[static_cast<std::size_t>(p.pos - 1)];
          if (!std::isfinite(h)) h = p.t;
        }
      } else {
        // branch: duplicate in place
        if (created >= opts.cap) {
          out.truncated = true;  // copy dropped; results are partial
        } else {
          ++created;
          stack.push_back(p);  // copy carries genealogy state
        }
      }
    }
  }
  return out;
}

double SimMoments::mean(std::size_t ti, std::int64_t x) const {
  return sum[ti][static_cast<std::size_t>(x - hist_window.lo)] / static_cast<double>(replicas);
}

double SimMoments::sem(std::size_t ti, std::int64_t x) const {
  const auto j = static_cast<std::size_t>(x - hist_window.lo);
  const double n = static_cast<double>(replicas);
  const double m = sum[ti][j] / n;
  const double var = (sumsq[ti][j] - n * m * m) / (n - 1.0);
  return std::sqrt(std::max(0.0, var) / n);
}

namespace {

SimMoments run_replicas_impl(const Environment& env, const SimOptions& opts,
                             std::int64_t replicas, std::uint64_t seed, bool parallel) {
  SimMoments mom;
  mom.times = opts.schedule;
  mom.hist_window = opts.hist_window.size() > 1 ? opts.hist_window : env.window;
  mom.replicas = replicas;
  mom.per_replica.resize(static_cast<std::size_t>(replicas));
  const std::size_t nt = opts.schedule.size();
  const auto nx = static_cast<std::size_t>(mom.hist_window.size());
  mom.sum.assign(nt, std::vector<double>(nx, 0.0));
  mom.sumsq.assign(nt, std::vector<double>(nx, 0.0));

  SimOptions o = opts;
  o.hist_window = mom.hist_window;
  o.histograms = true;

  std::exception_ptr err;
#pragma omp parallel if (parallel)
  {
    std::vector<std::vector<double>> hist(nt, std::vector<double>(nx, 0.0));
    std::vector<std::vector<double>> local_sum(nt, std::vector<double>(nx, 0.0));
    std::vector<std::vector<double>> local_sumsq(nt, std::vector<double>(nx, 0.0));
#pragma omp for schedule(dynamic, 16) nowait
    for (std::int64_t r = 0; r < replicas; ++r) {
      try {
        for (auto& h : hist)
          std::fill(h.begin(), h.end(), 0.0);
        mom.per_replica[static_cast<std::size_t>(r)] =
            simulate_replica(env, o, seed, static_cast<std::uint64_t>(r), nullptr, &hist);
        for (std::size_t ti = 0; ti < nt; ++ti)
          for (std::size_t j = 0; j < nx; ++j) {
            local_sum[ti][j] += hist[ti][j];
            local_sumsq[ti][j] += hist[ti][j] * hist[ti][j];
          }
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
#pragma omp critical
    for (std::size_t ti = 0; ti < nt; ++ti)
      for (std::size_t j = 0; j < nx; ++j) {
        mom.sum[ti][j] += local_sum[ti][j];
        mom.sumsq[ti][j] += local_sumsq[ti][j];
      }
  }
  if (err) std::rethrow_exception(err);
  return mom;
}

}  // namespace

SimMoments run_replicas(const Environment& env, const SimOptions& opts, std::int64_t replicas,
                        std::uint64_t seed) {
  return run_replicas_impl(env, opts, replicas, seed, true);
}

SimMoments run_replicas_serial(const Environment& env, const SimOptions& opts,
                               std::int64_t replicas, std::uint64_t seed) {
  return run_replicas_impl(env, opts, replicas, seed, false);
}

MedianEstimate estimate_median(const Environment& env, std::span<const double> t_grid,
                               std::int64_t replicas, std::uint64_t seed,
                               const SimOptions& base) {
  if (replicas < 100) throw InvalidArgument("estimate_median: need at least 100 replicas");
  SimOptions opts = base;
  opts.schedule.assign(t_grid.begin(), t_grid.end());
  std::sort(opts.schedule.begin(), opts.schedule.end());
  opts.T = opts.schedule.back();
  opts.histograms = false;

  MedianEstimate est;
  est.times = opts.schedule;
  const SimMoments mom = run_replicas(env, opts, replicas, seed);
  for (const auto& r : mom.per_replica) est.tainted |= r.truncated;

  const double hw = 3.0 * std::sqrt(0.25 / static_cast<double>(replicas));
  for (std::size_t ti = 0; ti < opts.schedule.size(); ++ti) {
    std::vector<std::int32_t> ms(static_cast<std::size_t>(replicas));
    for (std::int64_t r = 0; r < replicas; ++r)
      ms[static_cast<std::size_t>(r)] = mom.per_replica[static_cast<std::size_t>(r)].max_pos[ti];
    std::sort(ms.begin(), ms.end(), std::greater<>());
    // largest x with #{M >= x} >= R/2: the ceil(R/2)-th largest value
    const auto k = static_cast<std::size_t>((replicas + 1) / 2);
    est.median.push_back(ms[k - 1]);
    est.ci_halfwidth.push_back(hw);
    est.samples.push_back(std::move(ms));
  }
  return est;
}

LeadingCount leading_count(const Environment& env, double t, std::span<const double> tn_table,
                           std::int64_t m_bar, const PsiParams& psi, std::int64_t replicas,
                           std::uint64_t seed, const SimOptions& base) {
  if (m_bar < 1) throw InvalidArgument("leading_count: m_bar must be >= 1");
  if (static_cast<std::size_t>(m_bar) >= tn_table.size() ||
      !std::isfinite(tn_table[static_cast<std::size_t>(m_bar)]))
    throw InvalidArgument("leading_count: T_n table does not cover m_bar");
  for (std::int64_t k = 1; k < m_bar; ++k)
    if (!std::isfinite(tn_table[static_cast<std::size_t>(k)]))
      throw InvalidArgument("leading_count: T_n table has gaps below m_bar");

  SimOptions opts = base;
  opts.T = t;
  opts.schedule = {t};
  opts.hits_kmax = static_cast<int>(m_bar);
  opts.special_time = tn_table[static_cast<std::size_t>(m_bar)];
  opts.histograms = false;

  LeadingCount out;
  out.m_bar = m_bar;
  out.leading.assign(static_cast<std::size_t>(replicas), 0);
  out.at_least.assign(static_cast<std::size_t>(replicas), 0);

  auto psi_of = [&](std::int64_t k) {
    return psi.C + psi.C1 * std::max(1.0, std::log(static_cast<double>(k)));
  };

  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t r = 0; r < replicas; ++r) {
    try {
      std::int64_t n_lead = 0, n_at = 0;
      ParticleVisitor visitor = [&](const ParticleView& p) {
        if (p.pos < m_bar) return;
        ++n_at;
        if (p.special_pos < m_bar) return;
        for (std::int64_t k = 1; k < m_bar; ++k) {
          const double thresh =
              tn_table[static_cast<std::size_t>(k)] - psi.alpha * psi_of(k);
          if (!(p.hits[static_cast<std::size_t>(k - 1)] >= thresh)) return;
        }
        ++n_lead;
      };
      simulate_replica(env, opts, seed, static_cast<std::uint64_t>(r), &visitor, nullptr);
      out.leading[static_cast<std::size_t>(r)] = n_lead;
      out.at_least[static_cast<std::size_t>(r)] = n_at;
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  std::int64_t hits = 0;
  for (std::int64_t x : out.leading) hits += x >= 1 ? 1 : 0;
  const double n = static_cast<double>(replicas);
  out.p_hat = static_cast<double>(hits) / n;
  out.se = std::sqrt(out.p_hat * (1.0 - out.p_hat) / n);
  return out;
}

SecondMomentEstimate empirical_second_moment(const Environment& env, double barrier_lo,
                                             double barrier_hi, double t, std::int64_t replicas,
                                             std::uint64_t seed, const SimOptions& base) {
  SimOptions opts = base;
  opts.T = t;
  opts.schedule = {t};
  opts.barrier_lo = barrier_lo;
  opts.barrier_hi = barrier_hi;
  opts.histograms = false;

  const SimMoments mom = run_replicas(env, opts, replicas, seed);
  SecondMomentEstimate est;
  double s = 0.0, s2 = 0.0;
  for (const auto& r : mom.per_replica) {
    const double c = static_cast<double>(r.in_barrier_count);
    s += c * c;
    s2 += c * c * c * c;
    est.tainted |= r.truncated;
  }
  const double n = static_cast<double>(replicas);
  est.mean = s / n;
  est.se = std::sqrt(std::max(0.0, (s2 - n * est.mean * est.mean) / (n - 1.0)) / n);
  return est;
}

}  // namespace brw
