#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynbif/error.hpp"

namespace dynbif {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> exps);
  static MultiIndex zero(int len) { return MultiIndex(std::vector<int>(len, 0)); }
  // 0-based position
  static MultiIndex unit(int len, int i);
  static MultiIndex parse(std::string_view s);

  int size() const { return static_cast<int>(e_.size()); }
  int operator[](int i) const { return e_[i]; }
  int order() const;
  const std::vector<int>& exps() const { return e_; }
  MultiIndex operator+(const MultiIndex& o) const;
  // "q1.q2.....qk"
  std::string str() const;

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::vector<int> e_;
};

// all multi-indices of the given length and exact order, in lexicographic order
std::vector<MultiIndex> multi_indices_of_order(int len, int order);

struct ResonanceStructure {
  int n = 1;
  int N = 5;
  double nu = 0.05;

  ResonanceStructure() = default;
  ResonanceStructure(int n_, int N_, double nu_);
  // I = [E_n, -E_n] applied to q
  std::vector<int> apply_I(const MultiIndex& q) const;
  Eigen::MatrixXi I() const;
};

// ---------------------------------------------------------------------------
// Sparse polynomials in (y, eps, v) with complex coefficients.
// Monomials are packed into 64-bit keys, 4 bits per exponent, ordered with the
// total y-degree in the most significant nibble.

struct PolyShape {
  int ny = 0;
  int nv = 0;
  int max_y = 5;
  int max_eps = 3;
  int max_v = 4;
  bool operator==(const PolyShape&) const = default;
  bool same_vars(const PolyShape& o) const { return ny == o.ny && nv == o.nv; }
  void validate() const;
};

class ScalarPoly {
 public:
  using Key = std::uint64_t;
  using Entry = std::pair<Key, Complex>;

  struct Term {
    MultiIndex y;
    int eps = 0;
    MultiIndex v;
    Complex c;
  };

  ScalarPoly() = default;
  explicit ScalarPoly(const PolyShape& shape);

  static ScalarPoly constant(const PolyShape& shape, Complex c);
  static ScalarPoly y_var(const PolyShape& shape, int i);
  static ScalarPoly v_var(const PolyShape& shape, int l);
  static ScalarPoly monomial(const PolyShape& shape, const MultiIndex& y, int eps,
                             const MultiIndex& v, Complex c);

  const PolyShape& shape() const { return shape_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  const std::vector<Entry>& entries() const { return terms_; }
  std::vector<Term> terms() const;

  // terms beyond the caps are dropped silently
  void add_term(const MultiIndex& y, int eps, const MultiIndex& v, Complex c);
  Complex coeff(const MultiIndex& y, int eps, const MultiIndex& v) const;

  ScalarPoly operator+(const ScalarPoly& o) const;
  ScalarPoly operator-(const ScalarPoly& o) const;
  ScalarPoly operator-() const;
  ScalarPoly operator*(const ScalarPoly& o) const;
  ScalarPoly operator*(Complex s) const;
  ScalarPoly& operator+=(const ScalarPoly& o);
  ScalarPoly& operator-=(const ScalarPoly& o);

  ScalarPoly derivative_y(int i) const;
  ScalarPoly derivative_v(int l) const;
  // multiply by eps^k
  ScalarPoly shift_eps(int k) const;

  // Substitute polynomials for y and/or v. A null pointer keeps the variables.
  // The result lives in `target` (which must match the substitutes' shape).
  ScalarPoly compose(const std::vector<ScalarPoly>* ysub, const std::vector<ScalarPoly>* vsub,
                     const PolyShape& target) const;

  ScalarPoly with_caps(int max_y, int max_eps, int max_v) const;
  ScalarPoly y_degree_slice(int k) const;
  ScalarPoly eps_slice(int j) const;
  ScalarPoly filtered(const std::function<bool(const Term&)>& keep) const;
  ScalarPoly chopped(double tol) const;
  ScalarPoly conj() const;
  double max_abs() const;

  Complex eval(const Complex* y, Complex eps, const Complex* v) const;
  double eval_real(const double* y, double eps, const double* v) const;

  bool operator==(const ScalarPoly& o) const { return shape_ == o.shape_ && terms_ == o.terms_; }

  // key codec
  Key encode(const MultiIndex& y, int eps, const MultiIndex& v) const;
  void decode(Key k, int* y, int* eps, int* v) const;
  int key_ydeg(Key k) const { return static_cast<int>(k >> sh_ydeg_) & 15; }
  int key_eps(Key k) const { return static_cast<int>(k >> sh_eps_) & 15; }
  int key_vdeg(Key k) const { return static_cast<int>(k >> sh_vdeg_) & 15; }
  Key key_y_part(Key k) const { return k >> sh_eps_ << sh_eps_; }

 private:
  void setup_codec();
  void canonicalize(std::vector<Entry>& v);
  bool fits(Key k) const {
    return key_ydeg(k) <= shape_.max_y && key_eps(k) <= shape_.max_eps &&
           key_vdeg(k) <= shape_.max_v;
  }

  PolyShape shape_;
  std::vector<Entry> terms_;
  int sh_ydeg_ = 0, sh_eps_ = 0, sh_vdeg_ = 0;
  friend class PolyOps;
};

// Flat real-part evaluator for hot loops.
class CompiledPoly {
 public:
  CompiledPoly() = default;
  explicit CompiledPoly(const ScalarPoly& p);
  double operator()(const double* y, double eps, const double* v) const;
  bool empty() const { return coef_.empty(); }

 private:
  int ny_ = 0, nv_ = 0;
  std::vector<double> coef_;
  std::vector<std::uint8_t> exps_;  // per term: ny y-exponents, eps, nv v-exponents
};

// 1 / p as a truncated series; p must have a non-vanishing constant term and no y
ScalarPoly series_reciprocal(const ScalarPoly& p);

// ---------------------------------------------------------------------------

struct BasisChange {
  int n = 0;
  CMat S;
  CMat S_inv;

  // standard choice for the block form diag([[a,-w],[w,a]]) in the ordering
  // x = (x_1, x_2, ..., x_{2n}) with blocks (x_{2j-1}, x_{2j})
  static BasisChange standard(int n);
  static BasisChange from_matrix(const CMat& S);
  void check() const;
};

// prod_j ([S^{-1} y]_j)^{q_j}
Complex basis_form_eval(const BasisChange& S, const MultiIndex& q, const Vec& y);

// i = 0: i<omega, I q>;  i in 1..2n: i<omega, I(q - e_i)>
Complex lie_eigenvalue(const Vec& omega, const ResonanceStructure& rs, const MultiIndex& q,
                       int i);

struct ResonanceCheck {
  std::vector<bool> member;  // i = 0..n
  bool all = false;
  double margin = 0.0;       // min |eigenvalue| over the nonzero cases
  int worst_i = -1;
  MultiIndex worst_q;
};

ResonanceCheck resonance_member(const std::function<Vec(const Vec&)>& omega_fn,
                                const ResonanceStructure& rs, const Vec& v);

// ---------------------------------------------------------------------------

template <class T>
struct AdSplit {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> X;
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> Y0;
};

// Y = Y0 + (Z X - X Z) with Y0 in ker ad_Z, X in im ad_Z
template <class T>
AdSplit<T> ad_solve(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& Z,
                    const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& Y) {
  using M = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using CT = std::complex<T>;
  using CM = Eigen::Matrix<CT, Eigen::Dynamic, Eigen::Dynamic>;
  const int d = static_cast<int>(Z.rows());
  if (Z.cols() != d || Y.rows() != d || Y.cols() != d)
    throw ValidationError("dimension", "ad_solve: dimension mismatch");
  Eigen::EigenSolver<M> es(Z);
  if (es.info() != Eigen::Success) throw NumericError("eigen", "ad_solve: eigensolver failed");
  CM S = es.eigenvectors();
  auto lam = es.eigenvalues();
  T gap = std::numeric_limits<T>::infinity();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) gap = std::min(gap, std::abs(lam(i) - lam(j)));
  const T zn = std::max<T>(Z.norm(), std::numeric_limits<T>::min());
  if (d > 1 && !(gap > T(1e-8) * zn))
    throw NumericError("degenerate_spectrum",
                       "ad_solve: eigenvalues are not distinct (gap " +
                           std::to_string(static_cast<double>(gap)) + ")");
  CM Sinv = S.inverse();
  CM Yt = Sinv * Y.template cast<CT>() * S;
  CM D = CM::Zero(d, d);
  CM Xt = CM::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j)
        D(i, i) = Yt(i, i);
      else
        Xt(i, j) = Yt(i, j) / (lam(i) - lam(j));
    }
  CM Y0c = S * D * Sinv;
  CM Xc = S * Xt * Sinv;
  const T scale = std::max<T>(T(1), Y.norm());
  const T im = std::max(Y0c.imag().cwiseAbs().maxCoeff(), Xc.imag().cwiseAbs().maxCoeff());
  if (im > T(1e-10) * scale)
    throw NumericError("realness", "ad_solve: imaginary residue " +
                                       std::to_string(static_cast<double>(im)));
  return {Xc.real(), Y0c.real()};
}

}  // namespace dynbif
