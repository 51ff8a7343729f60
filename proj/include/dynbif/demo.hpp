#pragma once

#include <cstdint>

#include "dynbif/normalform.hpp"

namespace dynbif {

// Builds a real TaylorModel from complex w-form data, w_j = x_{2j-1} + i x_{2j}.
// fast_w holds the n equations for w_1..w_n as polynomials in (w, wbar, eps, v)
// (ny = 2n); the conjugate equations are generated. slow_w must be real-valued.
TaylorModel taylor_from_w_form(int n, int m, int N, int s, int dv, const Radii& radii,
                               const std::vector<ScalarPoly>& fast_w,
                               const std::vector<ScalarPoly>& slow_w,
                               const std::vector<ScalarPoly>& omega);

// conjugate of a w-form polynomial with w_j and wbar_j exchanged
ScalarPoly conj_swap(const ScalarPoly& p, int n);

// bundled two-oscillator model whose normal form reduces to the demo polar model
TaylorModel demo_taylor_model();

// demo polar model before rescaling (A(0) = [[1, .3], [.3, 1]], r* = (1/2.6, 1/2.6))
PolarModel demo_polar_model_raw();
// the same model rescaled to r* = (1, 1)
PolarModel demo_polar_model();

// d = 4 matrix family A(eps, v) with two complex pairs, perturbed in eps and v to order s + 1,
// and slow field G(v) = 0.2 - v, for the block-diagonalization order test
struct BlockDiagSystem {
  std::vector<ScalarPoly> A, G;
  int d = 4;
  Vec v0;
};
BlockDiagSystem demo_blockdiag_system(int s, std::uint64_t seed = 7);

}  // namespace dynbif
