#include "dynbif/sampling.hpp"

#include <cmath>
#include <numbers>

#include <boost/random/sobol.hpp>

namespace dynbif {

std::vector<Eigen::VectorXd> sobol_cube(int dim, int count, int skip) {
  std::vector<Eigen::VectorXd> out;
  if (dim <= 0 || count <= 0) return out;
  boost::random::sobol eng(dim);
  eng.discard(static_cast<std::uintmax_t>(skip) * dim);
  const double scale = 1.0 / (static_cast<double>(eng.max()) + 1.0);
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x(d) = static_cast<double>(eng()) * scale;
    out.push_back(x);
  }
  return out;
}

std::vector<Eigen::VectorXd> sobol_ball(int dim, double R, int count) {
  std::vector<Eigen::VectorXd> out;
  if (dim <= 0 || count <= 0) return out;
  boost::random::sobol eng(dim);
  const double scale = 1.0 / (static_cast<double>(eng.max()) + 1.0);
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x(d) = 2.0 * static_cast<double>(eng()) * scale - 1.0;
    if (x.norm() <= 1.0) out.push_back(R * x);
  }
  return out;
}

std::vector<Eigen::VectorXd> sobol_sphere(int dim, double R, int count) {
  std::vector<Eigen::VectorXd> out;
  if (dim == 1) {
    out.push_back(Eigen::VectorXd::Constant(1, -R));
    out.push_back(Eigen::VectorXd::Constant(1, R));
    return out;
  }
  boost::random::sobol eng(dim);
  const double scale = 1.0 / (static_cast<double>(eng.max()) + 1.0);
  while (static_cast<int>(out.size()) < count) {
    Eigen::VectorXd x(dim);
    for (int d = 0; d < dim; ++d) x(d) = 2.0 * static_cast<double>(eng()) * scale - 1.0;
    double nx = x.norm();
    if (nx > 1e-3 && nx <= 1.0) out.push_back(R * x / nx);
  }
  return out;
}

static std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream)
    : state_(splitmix(splitmix(seed) ^ splitmix(index + 0x632be59bd9b4e019ULL) ^
                      splitmix(stream * 0x8cb92ba72f3d8dd7ULL + 1))) {}

std::uint64_t CounterRng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::exponential() { return -std::log(uniform()); }

double CounterRng::normal() {
  double u1 = uniform(), u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd sample_simplex(CounterRng& rng, int n, double rho) {
  // n+1 spacings: the first n coordinates of a Dirichlet(1,...,1) point
  Eigen::VectorXd e(n + 1);
  for (int i = 0; i <= n; ++i) e(i) = rng.exponential();
  return rho * e.head(n) / e.sum();
}

Eigen::VectorXd sample_ball(CounterRng& rng, int m, double R) {
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) g(i) = rng.normal();
  double nrm = g.norm();
  double rad = R * std::pow(rng.uniform(), 1.0 / m);
  if (nrm == 0) return Eigen::VectorXd::Zero(m);
  return rad * g / nrm;
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  LinearFit f;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - f.intercept - f.slope * x[i];
    sse += r * r;
  }
  if (n > 2) {
    f.residual_stderr = std::sqrt(sse / (n - 2));
    f.slope_stderr = f.residual_stderr / std::sqrt(sxx);
  }
  return f;
}

}  // namespace dynbif
