#include "dynbif/basin.hpp"

#include <cmath>
#include <cstdio>

#include "dynbif/sampling.hpp"

namespace dynbif {

namespace {

// per-chunk counters keep the sum independent of the worker count
template <class Body>
void chunked(long samples, int jobs, Body body) {
  const long chunk = 4096;
  const int chunks = static_cast<int>((samples + chunk - 1) / chunk);
  parallel_for(chunks, jobs, [&](int c) {
    const long lo = c * chunk, hi = std::min(samples, lo + chunk);
    body(c, lo, hi);
  });
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

MeasureEstimate sublevel_complement_measure(double eps, double k, double rho, int n, long samples,
                                            std::uint64_t seed, int jobs) {
  require(eps > 0 && eps < 1, "eps", "eps must lie in (0, 1)");
  require(k > 0 && rho > 0 && n >= 1 && samples > 0, "range", "invalid sampling parameters");
  const double level = k * std::abs(std::log(eps));
  std::vector<long> hits((samples + 4095) / 4096, 0);
  chunked(samples, jobs, [&](int c, long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i), 21);
      if (V0(sample_simplex(rng, n, rho)) > level) ++hits[c];
    }
  });
  MeasureEstimate out;
  out.samples = samples;
  for (long h : hits) out.hits += h;
  out.fraction = static_cast<double>(out.hits) / samples;
  out.stderr_ = std::sqrt(out.fraction * (1 - out.fraction) / samples);
  return out;
}

InclusionCount first_inclusion_check(double eps, double k, double c, double rho, int n,
                                     long samples, std::uint64_t seed, int jobs) {
  require(eps > 0 && eps < 1 && c >= 1, "range", "first inclusion needs eps in (0,1), c >= 1");
  const double level = k * std::abs(std::log(eps)) + c - 1;
  const double bound = std::exp(-c) * std::pow(eps, k);
  std::vector<InclusionCount> part((samples + 4095) / 4096);
  chunked(samples, jobs, [&](int ch, long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i), 22);
      const Vec r = sample_simplex(rng, n, rho);
      if (V0(r) > level) continue;
      ++part[ch].checked;
      if (r.minCoeff() < bound) ++part[ch].violations;
    }
  });
  InclusionCount out;
  for (const auto& p : part) {
    out.checked += p.checked;
    out.violations += p.violations;
  }
  return out;
}

InclusionCount q_set_inclusion(double eps, double k, double c, double rho, int n, long samples,
                               std::uint64_t seed, int jobs) {
  require(eps > 0 && eps < 1 && n >= 1, "range", "q_set_inclusion needs eps in (0,1)");
  if (!(std::abs(std::log(std::pow(eps, k / n))) > rho - std::log(rho)))
    throw ValidationError("hypothesis", "|ln eps^{k/n}| > rho - ln rho fails at eps = " + g17(eps));
  const double level = k * std::abs(std::log(eps));
  const double bound = std::exp(-c) * std::pow(eps, k / n);
  require(n * bound < rho, "range", "Q-set does not meet the simplex");
  std::vector<InclusionCount> part((samples + 4095) / 4096);
  // uniform on {r_j >= bound, sum r <= rho}: shift of a smaller simplex
  chunked(samples, jobs, [&](int ch, long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      CounterRng rng(seed, static_cast<std::uint64_t>(i), 23);
      const Vec r = sample_simplex(rng, n, rho - n * bound).array() + bound;
      ++part[ch].checked;
      if (V0(r) > level) ++part[ch].violations;
    }
  });
  InclusionCount out;
  for (const auto& p : part) {
    out.checked += p.checked;
    out.violations += p.violations;
  }
  return out;
}

SlopeFit log_log_slope(const std::vector<double>& eps, const std::vector<double>& y) {
  std::vector<double> x, l;
  for (std::size_t i = 0; i < eps.size() && i < y.size(); ++i)
    if (y[i] > 0) {
      x.push_back(std::log(eps[i]));
      l.push_back(std::log(y[i]));
    }
  SlopeFit out;
  if (x.size() < 2) return {std::nan(""), std::nan("")};
  auto f = linear_fit(x, l);
  out.slope = f.slope;
  out.stderr_ = f.slope_stderr;
  return out;
}

double terminal_torus_distance(const PolarModel& pm, const TorusGrid& tg, const Vec& r,
                               const Vec& v, const Vec& phi, double horizon, double rtol,
                               double atol) {
  SimOptions so;
  so.rtol = rtol;
  so.atol = atol;
  so.store = false;
  auto tr = simulate(pm, tg.eps, r, v, phi, horizon, so);
  Vec y(pm.n + pm.m);
  y << tr.r_end, tr.v_end;
  return (y - tg.point(tr.phi_end_lift)).norm();
}

CensusResult attraction_census(const PolarModel& pm, const CombinedSystem& cs,
                               const TorusGrid& tg, double probe_residual, double k, long samples,
                               const CensusOptions& opt) {
  if (tg.nodes() == 0 || tg.eps != cs.eps)
    throw ValidationError("dependency", "attraction_census needs a torus solved at this eps");
  require(samples > 0 && k > 0, "range", "attraction_census needs samples > 0 and k > 0");
  const int n = pm.n, m = pm.m;
  const double eps = cs.eps;
  const double level = k * std::abs(std::log(eps));
  CensusResult out;
  out.samples = samples;
  out.threshold = 10 * (probe_residual + opt.rtol + opt.atol);
  std::vector<double> dist(samples);
  parallel_for(static_cast<int>(samples), opt.jobs, [&](int i) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(i), 31);
    Vec r;
    do {
      r = sample_simplex(rng, n, pm.rho);
    } while (!(r.minCoeff() > 0) || (opt.restricted && V0(r) > level));
    const Vec v = sample_ball(rng, m, pm.radii.Rstar_up);
    Vec phi(n);
    for (int j = 0; j < n; ++j) phi(j) = 2 * std::numbers::pi * rng.uniform();
    dist[i] = terminal_torus_distance(pm, tg, r, v, phi, opt.horizon_factor / eps, opt.rtol,
                                      opt.atol);
  });
  for (double x : dist) {
    out.max_distance = std::max(out.max_distance, x);
    if (x < out.threshold) {
      ++out.attracted;
      out.max_attracted_distance = std::max(out.max_attracted_distance, x);
    }
  }
  out.fraction = static_cast<double>(out.attracted) / samples;
  return out;
}

void write_basin_csv(std::ostream& os, const std::vector<BasinRow>& rows) {
  os << "eps,k,complement_fraction,attracted_fraction,samples,slope,stderr\n";
  for (const auto& r : rows)
    os << g17(r.eps) << ',' << g17(r.k) << ',' << g17(r.complement_fraction) << ','
       << g17(r.attracted_fraction) << ',' << r.samples << ',' << g17(r.slope) << ','
       << g17(r.stderr_) << '\n';
}

}  // namespace dynbif
