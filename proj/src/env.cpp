#include "brw/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "brw/errors.hpp"
#include "brw/rng.hpp"
#include "json.hpp"

namespace brw {

namespace {
constexpr int kSchemaVersion = 1;

const char* kind_name(LawKind k) {
  switch (k) {
    case LawKind::TwoPoint: return "two-point";
    case LawKind::UniformInterval: return "uniform-interval";
    case LawKind::FiniteDiscrete: return "finite-discrete";
  }
  return "?";
}

LawKind kind_from_name(const std::string& s) {
  if (s == "two-point") return LawKind::TwoPoint;
  if (s == "uniform-interval") return LawKind::UniformInterval;
  if (s == "finite-discrete") return LawKind::FiniteDiscrete;
  throw InvalidArgument("unknown law kind: " + s);
}
}  // namespace

double EnvironmentLaw::es() const {
  return *std::max_element(points.begin(), points.end()) + shift;
}

double EnvironmentLaw::ei() const {
  return *std::min_element(points.begin(), points.end()) + shift;
}

void EnvironmentLaw::validate() const {
  if (points.empty()) throw InvalidArgument("law: empty support");
  if (shift < 0) throw InvalidArgument("law: shift must be >= 0");
  switch (kind) {
    case LawKind::UniformInterval:
      if (points.size() != 2) throw InvalidArgument("uniform-interval law needs {lo, hi}");
      if (!probs.empty()) throw InvalidArgument("uniform-interval law takes no probabilities");
      break;
    case LawKind::TwoPoint:
      if (points.size() != 2) throw InvalidArgument("two-point law needs two support points");
      [[fallthrough]];
    case LawKind::FiniteDiscrete: {
      if (probs.size() != points.size())
        throw InvalidArgument("law: probabilities must match support points");
      double s = std::accumulate(probs.begin(), probs.end(), 0.0);
      if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("law: probabilities must sum to 1");
      for (double p : probs)
        if (p <= 0.0) throw InvalidArgument("law: atom probabilities must be positive");
      break;
    }
  }
  if (!(ei() > 0.0)) throw InvalidArgument("law: essential infimum must be positive");
  if (!(ei() < es())) throw InvalidArgument("law: need ei < es (non-degenerate support)");
}

double EnvironmentLaw::quantile(double u) const {
  if (kind == LawKind::UniformInterval) return points[0] + u * (points[1] - points[0]);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    acc += probs[k];
    if (u < acc) return points[k];
  }
  return points.back();
}

EnvironmentLaw EnvironmentLaw::two_point(double a, double b, double pa, double shift) {
  EnvironmentLaw law;
  law.kind = LawKind::TwoPoint;
  law.points = {a, b};
  law.probs = {pa, 1.0 - pa};
  law.shift = shift;
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::uniform_interval(double lo, double hi, double shift) {
  EnvironmentLaw law;
  law.kind = LawKind::UniformInterval;
  law.points = {lo, hi};
  law.shift = shift;
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::finite_discrete(std::vector<double> pts, std::vector<double> pr,
                                               double shift) {
  EnvironmentLaw law;
  law.kind = LawKind::FiniteDiscrete;
  law.points = std::move(pts);
  law.probs = std::move(pr);
  law.shift = shift;
  law.validate();
  return law;
}

double Environment::max_xi() const { return *std::max_element(xi.begin(), xi.end()); }
double Environment::min_xi() const { return *std::min_element(xi.begin(), xi.end()); }

double ZetaView::min_zeta() const { return *std::min_element(zeta.begin(), zeta.end()); }
double ZetaView::max_zeta() const { return *std::max_element(zeta.begin(), zeta.end()); }

Environment sample_environment(const EnvironmentLaw& law, Window window, std::uint64_t seed) {
  law.validate();
  if (window.size() <= 0) throw InvalidArgument("sample_environment: empty window");
  Environment env{law, window, seed, {}};
  env.xi.resize(static_cast<std::size_t>(window.size()));
  for (std::int64_t x = window.lo; x <= window.hi; ++x)
    env.xi[static_cast<std::size_t>(x - window.lo)] =
        law.quantile(site_uniform(seed, x)) + law.shift;
  return env;
}

ZetaView zeta_of(const Environment& env) {
  ZetaView z{env.window, env.xi};
  const double es = env.law.es();
  for (double& v : z.zeta) v -= es;
  return z;
}

ZetaView constant_zeta(double value, Window window) {
  return ZetaView{window, std::vector<double>(static_cast<std::size_t>(window.size()), value)};
}

void save_environment(const Environment& env, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["law"] = {{"kind", kind_name(env.law.kind)},
              {"points", env.law.points},
              {"probs", env.law.probs},
              {"shift", env.law.shift}};
  j["window"] = {env.window.lo, env.window.hi};
  j["seed"] = env.seed;
  j["values"] = env.xi;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

Environment load_environment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed environment file " + path + ": " + e.what());
  }
  if (!j.contains("schema_version"))
    throw IoError("environment file missing schema_version: " + path);
  if (j["schema_version"].get<int>() != kSchemaVersion)
    throw IoError("unsupported environment schema version " +
                  j["schema_version"].dump() + " in " + path);
  Environment env;
  try {
    const auto& jl = j.at("law");
    env.law.kind = kind_from_name(jl.at("kind").get<std::string>());
    env.law.points = jl.at("points").get<std::vector<double>>();
    env.law.probs = jl.at("probs").get<std::vector<double>>();
    env.law.shift = jl.at("shift").get<double>();
    env.window.lo = j.at("window")[0].get<std::int64_t>();
    env.window.hi = j.at("window")[1].get<std::int64_t>();
    env.seed = j.at("seed").get<std::uint64_t>();
    env.xi = j.at("values").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed environment file " + path + ": " + e.what());
  }
  env.law.validate();
  if (static_cast<std::int64_t>(env.xi.size()) != env.window.size())
    throw IoError("environment file: value count does not match window: " + path);
  return env;
}

}  // namespace brw
