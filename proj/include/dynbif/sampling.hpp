#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dynbif {

// First `count` points of a Sobol sequence mapped into the closed ball B_R of R^dim
// (rejection from the cube; prefixes of longer requests are nested).
std::vector<Eigen::VectorXd> sobol_ball(int dim, double R, int count);

// Points on the sphere of radius R (for dim = 1 the two points +-R).
std::vector<Eigen::VectorXd> sobol_sphere(int dim, double R, int count);

// Points of [0,1)^dim.
std::vector<Eigen::VectorXd> sobol_cube(int dim, int count, int skip = 0);

// Counter-based generator: the stream for (seed, index) is fixed, so results
// do not depend on thread scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0);
  std::uint64_t next_u64();
  double uniform();              // (0, 1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  double exponential() ;

 private:
  std::uint64_t state_;
};

// uniform point of the simplex {r >= 0, sum r <= rho} via exponential spacings
Eigen::VectorXd sample_simplex(CounterRng& rng, int n, double rho);
// uniform point of the ball B_R in R^m
Eigen::VectorXd sample_ball(CounterRng& rng, int m, double R);

struct LinearFit {
  double slope = 0, intercept = 0, slope_stderr = 0, residual_stderr = 0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dynbif
