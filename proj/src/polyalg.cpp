#include "dynbif/polyalg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace dynbif {

// ---------------------------------------------------------------- MultiIndex

MultiIndex::MultiIndex(std::vector<int> exps) : e_(std::move(exps)) {
  for (int x : e_)
    if (x < 0) throw ValidationError("multi_index", "negative exponent in multi-index");
}

MultiIndex MultiIndex::unit(int len, int i) {
  std::vector<int> e(len, 0);
  if (i < 0 || i >= len) throw ValidationError("dimension", "unit index out of range");
  e[i] = 1;
  return MultiIndex(std::move(e));
}

int MultiIndex::order() const {
  int s = 0;
  for (int x : e_) s += x;
  return s;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
  if (o.size() != size()) throw ValidationError("dimension", "multi-index length mismatch");
  std::vector<int> e(e_);
  for (int i = 0; i < size(); ++i) e[i] += o.e_[i];
  return MultiIndex(std::move(e));
}

std::string MultiIndex::str() const {
  std::string s;
  for (std::size_t i = 0; i < e_.size(); ++i) {
    if (i) s += '.';
    s += std::to_string(e_[i]);
  }
  return s;
}

MultiIndex MultiIndex::parse(std::string_view s) {
  std::vector<int> e;
  if (s.empty()) return MultiIndex(e);
  std::size_t pos = 0;
  while (true) {
    std::size_t dot = s.find('.', pos);
    std::string_view part = s.substr(pos, dot == std::string_view::npos ? s.size() - pos : dot - pos);
    int v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size() || part.empty())
      throw ValidationError("multi_index", "bad multi-index string '" + std::string(s) + "'");
    e.push_back(v);
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return MultiIndex(std::move(e));
}

static void enum_rec(int len, int pos, int left, std::vector<int>& cur,
                     std::vector<MultiIndex>& out) {
  if (pos == len - 1) {
    cur[pos] = left;
    out.emplace_back(cur);
    return;
  }
  for (int a = left; a >= 0; --a) {
    cur[pos] = a;
    enum_rec(len, pos + 1, left - a, cur, out);
  }
}

std::vector<MultiIndex> multi_indices_of_order(int len, int order) {
  std::vector<MultiIndex> out;
  if (len == 0) {
    if (order == 0) out.emplace_back(std::vector<int>{});
    return out;
  }
  std::vector<int> cur(len, 0);
  enum_rec(len, 0, order, cur, out);
  return out;
}

// ----------------------------------------------------------- ResonanceStructure

ResonanceStructure::ResonanceStructure(int n_, int N_, double nu_) : n(n_), N(N_), nu(nu_) {
  require(n >= 1, "resonance_structure", "n must be positive");
  require(N >= 3, "resonance_structure", "N must be at least 3");
  require(nu > 0, "resonance_structure", "nu must be positive");
}

std::vector<int> ResonanceStructure::apply_I(const MultiIndex& q) const {
  if (q.size() != 2 * n) throw ValidationError("dimension", "multi-index length must be 2n");
  std::vector<int> out(n);
  for (int j = 0; j < n; ++j) out[j] = q[j] - q[j + n];
  return out;
}

Eigen::MatrixXi ResonanceStructure::I() const {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(n, 2 * n);
  for (int j = 0; j < n; ++j) {
    m(j, j) = 1;
    m(j, j + n) = -1;
  }
  return m;
}

// ----------------------------------------------------------------- ScalarPoly

void PolyShape::validate() const {
  require(ny >= 0 && nv >= 0, "poly_shape", "negative variable count");
  require(ny + nv <= 13, "poly_shape", "too many variables for the packed monomial key");
  require(max_y >= 0 && max_y <= 15 && max_eps >= 0 && max_eps <= 15 && max_v >= 0 &&
              max_v <= 15,
          "poly_shape", "degree caps must lie in 0..15");
}

ScalarPoly::ScalarPoly(const PolyShape& shape) : shape_(shape) {
  shape_.validate();
  setup_codec();
}

void ScalarPoly::setup_codec() {
  sh_vdeg_ = 4 * shape_.nv;
  sh_eps_ = sh_vdeg_ + 4;
  sh_ydeg_ = sh_eps_ + 4 + 4 * shape_.ny;
}

ScalarPoly::Key ScalarPoly::encode(const MultiIndex& y, int eps, const MultiIndex& v) const {
  if (y.size() != shape_.ny || v.size() != shape_.nv)
    throw ValidationError("dimension", "monomial does not match the polynomial shape");
  int yd = y.order(), vd = v.order();
  if (yd > 15 || vd > 15 || eps > 15 || eps < 0)
    throw ValidationError("poly_shape", "exponent beyond key capacity");
  Key k = Key(yd) << sh_ydeg_;
  for (int i = 0; i < shape_.ny; ++i) k |= Key(y[i]) << (sh_eps_ + 4 + 4 * (shape_.ny - 1 - i));
  k |= Key(eps) << sh_eps_;
  k |= Key(vd) << sh_vdeg_;
  for (int l = 0; l < shape_.nv; ++l) k |= Key(v[l]) << (4 * (shape_.nv - 1 - l));
  return k;
}

void ScalarPoly::decode(Key k, int* y, int* eps, int* v) const {
  for (int i = 0; i < shape_.ny; ++i)
    y[i] = static_cast<int>(k >> (sh_eps_ + 4 + 4 * (shape_.ny - 1 - i))) & 15;
  *eps = key_eps(k);
  for (int l = 0; l < shape_.nv; ++l) v[l] = static_cast<int>(k >> (4 * (shape_.nv - 1 - l))) & 15;
}

void ScalarPoly::canonicalize(std::vector<Entry>& v) {
  std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
  terms_.clear();
  terms_.reserve(v.size());
  for (std::size_t i = 0; i < v.size();) {
    Key k = v[i].first;
    Complex c = 0;
    while (i < v.size() && v[i].first == k) c += v[i++].second;
    if (c != Complex(0)) terms_.emplace_back(k, c);
  }
}

ScalarPoly ScalarPoly::constant(const PolyShape& shape, Complex c) {
  ScalarPoly p(shape);
  if (c != Complex(0)) p.terms_.emplace_back(0, c);
  return p;
}

ScalarPoly ScalarPoly::y_var(const PolyShape& shape, int i) {
  ScalarPoly p(shape);
  p.add_term(MultiIndex::unit(shape.ny, i), 0, MultiIndex::zero(shape.nv), 1.0);
  return p;
}

ScalarPoly ScalarPoly::v_var(const PolyShape& shape, int l) {
  ScalarPoly p(shape);
  p.add_term(MultiIndex::zero(shape.ny), 0, MultiIndex::unit(shape.nv, l), 1.0);
  return p;
}

ScalarPoly ScalarPoly::monomial(const PolyShape& shape, const MultiIndex& y, int eps,
                                const MultiIndex& v, Complex c) {
  ScalarPoly p(shape);
  p.add_term(y, eps, v, c);
  return p;
}

std::vector<ScalarPoly::Term> ScalarPoly::terms() const {
  std::vector<Term> out;
  out.reserve(terms_.size());
  std::vector<int> y(shape_.ny), v(shape_.nv);
  for (const auto& [k, c] : terms_) {
    int e = 0;
    decode(k, y.data(), &e, v.data());
    out.push_back({MultiIndex(y), e, MultiIndex(v), c});
  }
  return out;
}

void ScalarPoly::add_term(const MultiIndex& y, int eps, const MultiIndex& v, Complex c) {
  if (y.order() > shape_.max_y || eps > shape_.max_eps || v.order() > shape_.max_v) return;
  Key k = encode(y, eps, v);
  auto it = std::lower_bound(terms_.begin(), terms_.end(), k,
                             [](const Entry& e, Key key) { return e.first < key; });
  if (it != terms_.end() && it->first == k) {
    it->second += c;
    if (it->second == Complex(0)) terms_.erase(it);
  } else if (c != Complex(0)) {
    terms_.insert(it, {k, c});
  }
}

Complex ScalarPoly::coeff(const MultiIndex& y, int eps, const MultiIndex& v) const {
  if (y.order() > 15 || v.order() > 15 || eps > 15) return 0;
  Key k = encode(y, eps, v);
  auto it = std::lower_bound(terms_.begin(), terms_.end(), k,
                             [](const Entry& e, Key key) { return e.first < key; });
  return (it != terms_.end() && it->first == k) ? it->second : Complex(0);
}

static void check_same(const ScalarPoly& a, const ScalarPoly& b) {
  if (!(a.shape() == b.shape()))
    throw ValidationError("dimension", "polynomial shapes differ");
}

ScalarPoly ScalarPoly::operator+(const ScalarPoly& o) const {
  ScalarPoly r(*this);
  r += o;
  return r;
}

ScalarPoly& ScalarPoly::operator+=(const ScalarPoly& o) {
  check_same(*this, o);
  if (o.terms_.empty()) return *this;
  std::vector<Entry> out;
  out.reserve(terms_.size() + o.terms_.size());
  std::size_t i = 0, j = 0;
  while (i < terms_.size() || j < o.terms_.size()) {
    if (j == o.terms_.size() || (i < terms_.size() && terms_[i].first < o.terms_[j].first)) {
      out.push_back(terms_[i++]);
    } else if (i == terms_.size() || o.terms_[j].first < terms_[i].first) {
      out.push_back(o.terms_[j++]);
    } else {
      Complex c = terms_[i].second + o.terms_[j].second;
      if (c != Complex(0)) out.emplace_back(terms_[i].first, c);
      ++i;
      ++j;
    }
  }
  terms_ = std::move(out);
  return *this;
}

ScalarPoly ScalarPoly::operator-() const {
  ScalarPoly r(*this);
  for (auto& e : r.terms_) e.second = -e.second;
  return r;
}

ScalarPoly ScalarPoly::operator-(const ScalarPoly& o) const { return *this + (-o); }

ScalarPoly& ScalarPoly::operator-=(const ScalarPoly& o) {
  *this += -o;
  return *this;
}

ScalarPoly ScalarPoly::operator*(Complex s) const {
  ScalarPoly r(shape_);
  if (s == Complex(0)) return r;
  r.terms_.reserve(terms_.size());
  for (const auto& [k, c] : terms_) {
    Complex x = c * s;
    if (x != Complex(0)) r.terms_.emplace_back(k, x);
  }
  return r;
}

ScalarPoly ScalarPoly::operator*(const ScalarPoly& o) const {
  check_same(*this, o);
  ScalarPoly r(shape_);
  if (terms_.empty() || o.terms_.empty()) return r;
  const int cy = shape_.max_y, ce = shape_.max_eps, cv = shape_.max_v;
  std::unordered_map<Key, Complex> acc;
  acc.reserve(std::min<std::size_t>(terms_.size() * o.terms_.size(), 1u << 16));
  for (const auto& [ka, ca] : terms_) {
    const int ya = key_ydeg(ka);
    if (ya > cy) break;
    const int ea = key_eps(ka), va = key_vdeg(ka);
    for (const auto& [kb, cb] : o.terms_) {
      if (ya + key_ydeg(kb) > cy) break;
      if (ea + key_eps(kb) > ce || va + key_vdeg(kb) > cv) continue;
      acc[ka + kb] += ca * cb;
    }
  }
  std::vector<Entry> v(acc.begin(), acc.end());
  r.canonicalize(v);
  return r;
}

ScalarPoly ScalarPoly::derivative_y(int i) const {
  if (i < 0 || i >= shape_.ny) throw ValidationError("dimension", "derivative index out of range");
  ScalarPoly r(shape_);
  const int sh = sh_eps_ + 4 + 4 * (shape_.ny - 1 - i);
  std::vector<Entry> v;
  for (const auto& [k, c] : terms_) {
    int e = static_cast<int>(k >> sh) & 15;
    if (e == 0) continue;
    v.emplace_back(k - (Key(1) << sh) - (Key(1) << sh_ydeg_), c * double(e));
  }
  r.canonicalize(v);
  return r;
}

ScalarPoly ScalarPoly::derivative_v(int l) const {
  if (l < 0 || l >= shape_.nv) throw ValidationError("dimension", "derivative index out of range");
  ScalarPoly r(shape_);
  const int sh = 4 * (shape_.nv - 1 - l);
  std::vector<Entry> v;
  for (const auto& [k, c] : terms_) {
    int e = static_cast<int>(k >> sh) & 15;
    if (e == 0) continue;
    v.emplace_back(k - (Key(1) << sh) - (Key(1) << sh_vdeg_), c * double(e));
  }
  r.canonicalize(v);
  return r;
}

ScalarPoly ScalarPoly::shift_eps(int k) const {
  ScalarPoly r(shape_);
  for (const auto& [key, c] : terms_) {
    if (key_eps(key) + k > shape_.max_eps) continue;
    r.terms_.emplace_back(key + (Key(k) << sh_eps_), c);
  }
  return r;
}

ScalarPoly ScalarPoly::compose(const std::vector<ScalarPoly>* ysub,
                               const std::vector<ScalarPoly>* vsub,
                               const PolyShape& target) const {
  ScalarPoly out(target);
  if (ysub && static_cast<int>(ysub->size()) != shape_.ny)
    throw ValidationError("dimension", "compose: wrong number of y substitutes");
  if (vsub && static_cast<int>(vsub->size()) != shape_.nv)
    throw ValidationError("dimension", "compose: wrong number of v substitutes");
  if (!ysub && target.ny != shape_.ny)
    throw ValidationError("dimension", "compose: target y-dimension mismatch");
  if (!vsub && target.nv != shape_.nv)
    throw ValidationError("dimension", "compose: target v-dimension mismatch");
  if (ysub)
    for (const auto& p : *ysub)
      if (!(p.shape() == target)) throw ValidationError("dimension", "compose: substitute shape");
  if (vsub)
    for (const auto& p : *vsub)
      if (!(p.shape() == target)) throw ValidationError("dimension", "compose: substitute shape");
  if (terms_.empty()) return out;

  auto ybase = [&](int i) { return ysub ? (*ysub)[i] : ScalarPoly::y_var(target, i); };
  auto vbase = [&](int l) { return vsub ? (*vsub)[l] : ScalarPoly::v_var(target, l); };

  // power caches
  std::vector<std::vector<ScalarPoly>> vp(shape_.nv);
  auto vpow = [&](int l, int b) -> const ScalarPoly& {
    auto& c = vp[l];
    if (c.empty()) {
      c.push_back(ScalarPoly::constant(target, 1.0));
      c.push_back(vbase(l));
    }
    while (static_cast<int>(c.size()) <= b) c.push_back(c.back() * c[1]);
    return c[b];
  };
  std::vector<ScalarPoly> ybases(shape_.ny);
  for (int i = 0; i < shape_.ny; ++i) ybases[i] = ybase(i);

  // memoized y-monomials keyed by the y-part of the source key
  std::unordered_map<Key, ScalarPoly> ymono;
  std::vector<int> yb(shape_.ny), vb(shape_.nv);
  std::function<const ScalarPoly&(const std::vector<int>&)> ymon =
      [&](const std::vector<int>& q) -> const ScalarPoly& {
    MultiIndex qi(q);
    Key k = encode(qi, 0, MultiIndex::zero(shape_.nv));
    auto it = ymono.find(k);
    if (it != ymono.end()) return it->second;
    int first = -1;
    for (int i = 0; i < shape_.ny; ++i)
      if (q[i] > 0) {
        first = i;
        break;
      }
    ScalarPoly val(target);
    if (first < 0) {
      val = ScalarPoly::constant(target, 1.0);
    } else {
      std::vector<int> q2(q);
      q2[first] -= 1;
      val = ymon(q2) * ybases[first];
    }
    return ymono.emplace(k, std::move(val)).first->second;
  };

  // group terms by y-part
  std::size_t i = 0;
  while (i < terms_.size()) {
    Key yk = key_y_part(terms_[i].first);
    ScalarPoly coef(target);
    int e = 0;
    for (; i < terms_.size() && key_y_part(terms_[i].first) == yk; ++i) {
      decode(terms_[i].first, yb.data(), &e, vb.data());
      ScalarPoly t = ScalarPoly::constant(target, terms_[i].second).shift_eps(e);
      for (int l = 0; l < shape_.nv; ++l)
        if (vb[l] > 0) t = t * vpow(l, vb[l]);
      coef += t;
    }
    if (coef.is_zero()) continue;
    out += ymon(yb) * coef;
  }
  return out;
}

ScalarPoly ScalarPoly::with_caps(int max_y, int max_eps, int max_v) const {
  PolyShape s = shape_;
  s.max_y = max_y;
  s.max_eps = max_eps;
  s.max_v = max_v;
  ScalarPoly r(s);
  for (const auto& e : terms_)
    if (r.fits(e.first)) r.terms_.push_back(e);
  return r;
}

ScalarPoly ScalarPoly::y_degree_slice(int k) const {
  ScalarPoly r(shape_);
  for (const auto& e : terms_)
    if (key_ydeg(e.first) == k) r.terms_.push_back(e);
  return r;
}

ScalarPoly ScalarPoly::eps_slice(int j) const {
  ScalarPoly r(shape_);
  for (const auto& e : terms_)
    if (key_eps(e.first) == j) r.terms_.push_back(e);
  return r;
}

ScalarPoly ScalarPoly::filtered(const std::function<bool(const Term&)>& keep) const {
  ScalarPoly r(shape_);
  std::vector<int> y(shape_.ny), v(shape_.nv);
  for (const auto& [k, c] : terms_) {
    int e = 0;
    decode(k, y.data(), &e, v.data());
    if (keep(Term{MultiIndex(y), e, MultiIndex(v), c})) r.terms_.emplace_back(k, c);
  }
  return r;
}

ScalarPoly ScalarPoly::chopped(double tol) const {
  ScalarPoly r(shape_);
  for (const auto& e : terms_)
    if (std::abs(e.second) > tol) r.terms_.push_back(e);
  return r;
}

ScalarPoly ScalarPoly::conj() const {
  ScalarPoly r(*this);
  for (auto& e : r.terms_) e.second = std::conj(e.second);
  return r;
}

double ScalarPoly::max_abs() const {
  double m = 0;
  for (const auto& e : terms_) m = std::max(m, std::abs(e.second));
  return m;
}

template <class S>
static S eval_impl(const ScalarPoly& p, const S* y, S eps, const S* v) {
  const PolyShape& sh = p.shape();
  // power tables
  std::vector<S> yp((sh.max_y + 1) * sh.ny), vp((sh.max_v + 1) * sh.nv), ep(sh.max_eps + 1);
  for (int i = 0; i < sh.ny; ++i) {
    yp[i * (sh.max_y + 1)] = S(1);
    for (int a = 1; a <= sh.max_y; ++a) yp[i * (sh.max_y + 1) + a] = yp[i * (sh.max_y + 1) + a - 1] * y[i];
  }
  for (int l = 0; l < sh.nv; ++l) {
    vp[l * (sh.max_v + 1)] = S(1);
    for (int a = 1; a <= sh.max_v; ++a) vp[l * (sh.max_v + 1) + a] = vp[l * (sh.max_v + 1) + a - 1] * v[l];
  }
  ep[0] = S(1);
  for (int a = 1; a <= sh.max_eps; ++a) ep[a] = ep[a - 1] * eps;
  std::vector<int> ye(sh.ny), ve(sh.nv);
  S sum(0);
  for (const auto& [k, c] : p.entries()) {
    int e = 0;
    p.decode(k, ye.data(), &e, ve.data());
    S t = ep[e];
    for (int i = 0; i < sh.ny; ++i)
      if (ye[i]) t *= yp[i * (sh.max_y + 1) + ye[i]];
    for (int l = 0; l < sh.nv; ++l)
      if (ve[l]) t *= vp[l * (sh.max_v + 1) + ve[l]];
    if constexpr (std::is_same_v<S, double>)
      sum += c.real() * t;
    else
      sum += c * t;
  }
  return sum;
}

Complex ScalarPoly::eval(const Complex* y, Complex eps, const Complex* v) const {
  return eval_impl<Complex>(*this, y, eps, v);
}

double ScalarPoly::eval_real(const double* y, double eps, const double* v) const {
  return eval_impl<double>(*this, y, eps, v);
}

ScalarPoly series_reciprocal(const ScalarPoly& p) {
  const PolyShape& sh = p.shape();
  Complex c0 = p.coeff(MultiIndex::zero(sh.ny), 0, MultiIndex::zero(sh.nv));
  if (std::abs(c0) == 0.0) throw NumericError("division", "series reciprocal of a non-unit");
  for (const auto& [k, c] : p.entries())
    if (p.key_ydeg(k) > 0)
      throw ValidationError("poly_shape", "series reciprocal needs a y-free polynomial");
  ScalarPoly one = ScalarPoly::constant(sh, 1.0);
  ScalarPoly t = (p * (1.0 / c0)) - one;  // p/c0 - 1, no constant term
  ScalarPoly r = one;
  ScalarPoly pw = one;
  const int K = sh.max_eps + sh.max_v;
  for (int k = 1; k <= K; ++k) {
    pw = pw * (-t);
    if (pw.is_zero()) break;
    r += pw;
  }
  return r * (1.0 / c0);
}

// ---------------------------------------------------------------- BasisChange

BasisChange BasisChange::standard(int n) {
  BasisChange b;
  b.n = n;
  const Complex I(0, 1);
  b.S = CMat::Zero(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    b.S(2 * j, j) = 0.5;
    b.S(2 * j + 1, j) = -0.5 * I;
    b.S(2 * j, j + n) = 0.5;
    b.S(2 * j + 1, j + n) = 0.5 * I;
  }
  b.S_inv = b.S.inverse();
  b.check();
  return b;
}

BasisChange BasisChange::from_matrix(const CMat& S) {
  if (S.rows() != S.cols() || S.rows() % 2)
    throw ValidationError("dimension", "basis matrix must be square of even size");
  BasisChange b;
  b.n = static_cast<int>(S.rows() / 2);
  b.S = S;
  b.S_inv = S.inverse();
  b.check();
  return b;
}

void BasisChange::check() const {
  CMat I = S * S_inv;
  double err = (I - CMat::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff();
  if (!(err <= 1e-12)) throw NumericError("basis", "S * S_inv deviates from identity");
  for (int j = 0; j < n; ++j)
    if ((S.col(j + n) - S.col(j).conjugate()).cwiseAbs().maxCoeff() > 1e-14)
      throw ValidationError("basis", "basis columns are not conjugate pairs");
}

Complex basis_form_eval(const BasisChange& S, const MultiIndex& q, const Vec& y) {
  if (y.size() != 2 * S.n || q.size() != 2 * S.n)
    throw ValidationError("dimension", "basis_form_eval: dimension mismatch");
  CVec w = S.S_inv * y.cast<Complex>();
  Complex r = 1.0;
  for (int j = 0; j < 2 * S.n; ++j)
    for (int a = 0; a < q[j]; ++a) r *= w(j);
  return r;
}

Complex lie_eigenvalue(const Vec& omega, const ResonanceStructure& rs, const MultiIndex& q,
                       int i) {
  if (omega.size() != rs.n) throw ValidationError("dimension", "omega must have n entries");
  if (i < 0 || i > 2 * rs.n) throw ValidationError("dimension", "operator index out of range");
  std::vector<int> Iq = rs.apply_I(q);
  if (i >= 1) {
    if (i <= rs.n)
      Iq[i - 1] -= 1;
    else
      Iq[i - 1 - rs.n] += 1;
  }
  double s = 0;
  for (int j = 0; j < rs.n; ++j) s += omega(j) * Iq[j];
  return Complex(0.0, s);
}

ResonanceCheck resonance_member(const std::function<Vec(const Vec&)>& omega_fn,
                                const ResonanceStructure& rs, const Vec& v) {
  Vec om = omega_fn(v);
  ResonanceCheck res;
  res.member.assign(rs.n + 1, true);
  res.margin = std::numeric_limits<double>::infinity();
  for (int k = 2; k <= rs.N; ++k) {
    for (const MultiIndex& q : multi_indices_of_order(2 * rs.n, k)) {
      for (int i = 0; i <= rs.n; ++i) {
        std::vector<int> Iq = rs.apply_I(q);
        if (i >= 1) Iq[i - 1] -= 1;
        bool zero = std::all_of(Iq.begin(), Iq.end(), [](int x) { return x == 0; });
        if (zero) continue;
        double lam = std::abs(lie_eigenvalue(om, rs, q, i).imag());
        if (lam < res.margin) {
          res.margin = lam;
          res.worst_i = i;
          res.worst_q = q;
        }
        if (!(lam > rs.nu)) res.member[i] = false;
      }
    }
  }
  res.all = std::all_of(res.member.begin(), res.member.end(), [](bool b) { return b; });
  return res;
}

}  // namespace dynbif

namespace dynbif {

CompiledPoly::CompiledPoly(const ScalarPoly& p) : ny_(p.shape().ny), nv_(p.shape().nv) {
  std::vector<int> y(ny_), v(nv_);
  int e = 0;
  for (const auto& [k, c] : p.entries()) {
    if (c.real() == 0.0) continue;
    p.decode(k, y.data(), &e, v.data());
    coef_.push_back(c.real());
    for (int i = 0; i < ny_; ++i) exps_.push_back(static_cast<std::uint8_t>(y[i]));
    exps_.push_back(static_cast<std::uint8_t>(e));
    for (int l = 0; l < nv_; ++l) exps_.push_back(static_cast<std::uint8_t>(v[l]));
  }
}

double CompiledPoly::operator()(const double* y, double eps, const double* v) const {
  const int stride = ny_ + 1 + nv_;
  double sum = 0;
  const std::uint8_t* ex = exps_.data();
  for (std::size_t t = 0; t < coef_.size(); ++t, ex += stride) {
    double term = coef_[t];
    for (int i = 0; i < ny_; ++i)
      for (int a = 0; a < ex[i]; ++a) term *= y[i];
    for (int a = 0; a < ex[ny_]; ++a) term *= eps;
    for (int l = 0; l < nv_; ++l)
      for (int a = 0; a < ex[ny_ + 1 + l]; ++a) term *= v[l];
    sum += term;
  }
  return sum;
}

}  // namespace dynbif
