#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dynbif/polyalg.hpp"

namespace dynbif {

struct Radii {
  double R0 = 0.5;
  double Rstar = 0.8;
  double Rstar_up = 1.0;
  bool operator==(const Radii&) const = default;
  void validate() const;
};

// Truncated Taylor data of
//   x' = f(x, u, eps),  u' = eps g(x, u, eps),  x in R^{2n}, u in R^m.
// Each component is a ScalarPoly in (x, eps, v) with real coefficients;
// the degree-k slice in x is the form F_k (resp. G_k).
struct TaylorModel {
  int n = 1;
  int m = 1;
  int N = 5;
  int s = 3;
  int dv = 4;
  Radii radii;
  std::vector<ScalarPoly> fast;   // 2n components
  std::vector<ScalarPoly> slow;   // m components
  std::vector<ScalarPoly> omega;  // n components, polynomials in v only

  PolyShape shape() const { return {2 * n, m, N, s, dv}; }
  PolyShape omega_shape() const { return {0, m, 0, 0, dv}; }
  Vec omega_at(const Vec& v) const;
  // F_k, G_k
  ScalarPoly fast_form(int comp, int k) const { return fast.at(comp).y_degree_slice(k); }
  ScalarPoly slow_form(int comp, int k) const { return slow.at(comp).y_degree_slice(k); }
  // structural checks: no constant term in f, real coefficients, F_1 in block form
  // matching omega at eps = 0, separated positive frequencies on samples of B_{R^*}
  void validate(int sample_budget = 256) const;
  bool operator==(const TaylorModel& o) const;
};

struct NormalFormResult {
  int n = 0, m = 0, N = 0, s = 0;
  PolyShape shape;     // w-coordinates: ny = 2n, nv = m
  BasisChange basis;
  std::vector<ScalarPoly> fhat, ghat;  // the model in w-coordinates
  std::vector<ScalarPoly> J;           // diagonal linear part J_i(v, eps), y-free
  std::vector<ScalarPoly> H, X;        // 2n components, y-degrees 2..N
  std::vector<ScalarPoly> C, U;        // m components; C from degree 0, U from degree 1
  double resonance_margin = 0;         // smallest sampled divisor

  // coefficient at y^q eps^j as a polynomial in v (shape {0, m, 0, 0, dv})
  ScalarPoly H_coeff(int i, const MultiIndex& q, int j) const;
  ScalarPoly X_coeff(int i, const MultiIndex& q, int j) const;
  ScalarPoly C_coeff(int l, const MultiIndex& q, int j) const;
  ScalarPoly U_coeff(int l, const MultiIndex& q, int j) const;
};

NormalFormResult solve_normal_form(const TaylorModel& model, const ResonanceStructure& rs,
                                   int sample_budget = 2048);

// Substitute the computed change of variables into the truncated model and
// return the transformed right-hand sides (w' = hT, v' = eps cT).
struct TransformedSystem {
  std::vector<ScalarPoly> hT;  // 2n
  std::vector<ScalarPoly> cT;  // m
};
TransformedSystem transform_system(const NormalFormResult& nf);

struct NormalFormCheck {
  double fast_nonresonant = 0;  // max |coefficient| at non-resonant (i, q)
  double fast_resonant = 0;     // max |coefficient - H|
  double slow_nonresonant = 0;
  double slow_resonant = 0;
  int checked = 0;
  double worst() const;
};
NormalFormCheck check_normal_form(const NormalFormResult& nf, const TransformedSystem& ts);

// --------------------------------------------------------------- block diagonalization in eps

template <class T>
struct BlockDiagResult {
  using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  Vec v0;
  int s = 0;
  std::vector<M> T_eps;  // T_k(v0), k = 0..s
  std::vector<M> B_eps;  // B_k(v0), k = 0..s
  double commutator = 0; // max_k ||B_k B_0 - B_0 B_k||
  // || eps T_v' G + T B - A T || at (v0, eps)
  T defect(T eps) const;

  // internals for the defect
  std::vector<M> dT_G;  // coefficients of (T_v' G)(v0) in eps
  std::vector<M> A_eps;  // A(v0, eps) coefficients
};

// A: d*d entries (row-major) as polynomials in (eps, v) with ny = 0; G: m polynomials in v.
template <class T>
BlockDiagResult<T> eps_block_diagonalize(const std::vector<ScalarPoly>& A, int d,
                                         const std::vector<ScalarPoly>& G, int s, const Vec& v0);

// --------------------------------------------------------------- polar form

class RemainderModel {
 public:
  virtual ~RemainderModel() = default;
  virtual std::string kind() const = 0;
  // r in unscaled (physical) coordinates; outputs R (n), Phi (n), Z (m)
  virtual void eval(const double* r, const double* v, const double* phi, double eps, double* R,
                    double* Phi, double* Z) const = 0;
};

struct TrigTerm {
  enum Target { R, Phi, Z } target = R;
  int comp = 0;
  double coef = 0;
  bool sqrt_r = false;     // extra factor sqrt(r_comp)
  std::vector<int> r_pow;  // n
  std::vector<int> v_pow;  // m
  std::vector<int> k;      // n, angular wave vector
  bool is_sin = false;
  bool operator==(const TrigTerm&) const = default;
};

class TrigRemainder : public RemainderModel {
 public:
  TrigRemainder(int n, int m, std::vector<TrigTerm> terms);
  std::string kind() const override { return "trig"; }
  void eval(const double* r, const double* v, const double* phi, double eps, double* R,
            double* Phi, double* Z) const override;
  const std::vector<TrigTerm>& terms() const { return terms_; }
  int n() const { return n_; }
  int m() const { return m_; }

 private:
  int n_, m_;
  std::vector<TrigTerm> terms_;
};

class NormalFormRemainder : public RemainderModel {
 public:
  NormalFormRemainder(std::shared_ptr<const TaylorModel> model,
                      std::shared_ptr<const NormalFormResult> nf);
  std::string kind() const override { return "normal_form"; }
  void eval(const double* r, const double* v, const double* phi, double eps, double* R,
            double* Phi, double* Z) const override;
  const TaylorModel& model() const { return *model_; }
  const NormalFormResult& nf() const { return *nf_; }

 private:
  std::shared_ptr<const TaylorModel> model_;
  std::shared_ptr<const NormalFormResult> nf_;
  std::vector<std::vector<ScalarPoly>> dX_, dU_;  // Jacobians in (w, v)
};

struct PolarModel {
  int n = 0, m = 0, N = 5, s = 3, dv = 4;
  double eps0 = 0.05;
  double rho = 4.0;
  Radii radii;
  std::vector<double> r_scale;             // r_physical = r_scale * r
  std::vector<ScalarPoly> alpha, omega, c; // polynomials in v
  std::vector<ScalarPoly> A;               // n*n, row-major, polynomials in v
  std::vector<ScalarPoly> B, W, Psi;       // polynomials in (r, eps, v)
  std::shared_ptr<const RemainderModel> remainder;

  PolyShape v_shape() const { return {0, m, 0, 0, dv}; }
  PolyShape r_shape() const { return {n, m, N, s, dv}; }

  Vec alpha_at(const Vec& v) const;
  Vec omega_at(const Vec& v) const;
  Vec c_at(const Vec& v) const;
  Mat A_at(const Vec& v) const;
  Vec B_at(const Vec& r, const Vec& v, double eps) const;
  Vec W_at(const Vec& r, const Vec& v, double eps) const;
  Vec Psi_at(const Vec& r, const Vec& v, double eps) const;
  // remainders in this model's coordinates
  void remainders(const Vec& r, const Vec& v, const Vec& phi, double eps, Vec& R, Vec& Phi,
                  Vec& Z) const;

  Vec r_star() const;  // A(0)^{-1} alpha(0)
  // r -> r_star * r; throws on a non-positive r_star component
  PolarModel rescaled() const;
  void validate() const;
};

// polar model of a solved normal form, by default rescaled so that r* = (1,...,1)
PolarModel to_polar(std::shared_ptr<const NormalFormResult> nf,
                    std::shared_ptr<const TaylorModel> model, double eps0 = 0.05,
                    double rho = 4.0, bool rescale = true);

struct ZoneConstants {
  double alpha0 = 0, alpha_star = 0, alpha_up = 0;
  double A_star = 0, A_up = 0;
  double kappa = 0;
  double delta = 0;
  int samples = 0;
  // bounds on |r| defining the trapping set K
  double K_lower() const { return (alpha_star - delta) / A_up; }
  double K_upper(int n) const;
};

ZoneConstants verify_conditions(const PolarModel& pm, int sample_budget = 2048);

struct PolarBounds {
  double C0 = 0;              // sup of |B|, |R|, |W|, |Z| over the sampled domain
  double sqrt_r_ratio = 0;    // sup |R|,|Phi| / ||sqrt r|| for small r
};
PolarBounds polar_bounds(const PolarModel& pm, int sample_budget = 4096);

}  // namespace dynbif
