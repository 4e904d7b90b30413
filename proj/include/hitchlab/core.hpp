#pragma once
// Minkowski R^{2,1} and hyperboloid-model primitives.
//
// Conventions, fixed once for the whole library:
//   h  = diag(+1,+1,-1);  H^2 = { x : h(x,x) = -1, x3 > 0 };  e3 = (0,0,1).
//   SO+(2,1): M^T h M = h, det M = 1, upper sheet preserved; M^{-1} = h M^T h.
//   so(2,1):  X = alpha*Jz + b(u) with Jz the rotation generator about e3 and
//             b(u) the boost generator;  X^3 = kappa X,  kappa = |u|^2 - alpha^2.
//
// exp/log on SO+(2,1) are closed form (Rodrigues-type identities):
//   exp(X) = I + f(kappa) X + g(kappa) X^2,
//     f = sinh(s)/s, g = (cosh s - 1)/s^2, s = sqrt(kappa)   (hyperbolic)
//     f = sin(s)/s,  g = (1 - cos s)/s^2,  s = sqrt(-kappa)  (elliptic)
//   tr exp(X) = 1 + 2 cosh s  resp.  1 + 2 cos s.
//   log(M) = (M - M^{-1}) / (2 f);  throws log_branch_error when the elliptic
//   angle approaches pi (boundary of the principal branch).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hitchlab {

template <class S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat3 = Eigen::Matrix<S, 3, 3>;

using LD = long double;
using Vec2d = Vec2<double>;
using Vec3d = Vec3<double>;
using Mat2d = Mat2<double>;
using Mat3d = Mat3<double>;

inline constexpr double pi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Error taxonomy. Exit codes are part of the cli contract:
//   0 ok, 2 usage, 3 invariant failure, 4 tolerance failure, 5 missing input.
class hl_error : public std::runtime_error {
public:
  hl_error(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int exit_code() const { return code_; }

private:
  int code_;
};

class usage_error : public hl_error {
public:
  explicit usage_error(const std::string& what) : hl_error(2, what) {}
};
class invariant_error : public hl_error {
public:
  explicit invariant_error(const std::string& what) : hl_error(3, what) {}
};
class tolerance_error : public hl_error {
public:
  explicit tolerance_error(const std::string& what) : hl_error(4, what) {}
};
class missing_input_error : public hl_error {
public:
  explicit missing_input_error(const std::string& what) : hl_error(5, what) {}
};

// Principal-branch failure of so21_log. Control flow for the extraction
// gauge (vortex edges are expected and handled), not a run failure.
class log_branch_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Minkowski algebra.

template <class S> Mat3<S> hmat() {
  Mat3<S> h = Mat3<S>::Identity();
  h(2, 2) = S(-1);
  return h;
}

template <class S> Vec3<S> e3() { return Vec3<S>(S(0), S(0), S(1)); }

template <class S> S hdot(const Vec3<S>& x, const Vec3<S>& y) {
  return x[0] * y[0] + x[1] * y[1] - x[2] * y[2];
}

// inverse in SO(2,1): M^{-1} = h M^T h (cheap, exact for group elements)
template <class S> Mat3<S> soinv(const Mat3<S>& M) {
  Mat3<S> R = M.transpose();
  R(0, 2) = -R(0, 2);
  R(1, 2) = -R(1, 2);
  R(2, 0) = -R(2, 0);
  R(2, 1) = -R(2, 1);
  return R;
}

template <class S> S so21_deviation(const Mat3<S>& M) {
  const Mat3<S> h = hmat<S>();
  S dev = (M.transpose() * h * M - h).template lpNorm<Eigen::Infinity>();
  dev = std::max(dev, S(std::abs(M.determinant() - S(1))));
  return dev;
}

inline bool is_so21(const Mat3d& M, double tol = 1e-10) {
  return so21_deviation(M) <= tol && M(2, 2) > 0.0;
}

// h-Gram-Schmidt in column order (+,+,-); drift control for long products.
inline Mat3d h_orthonormalize(const Mat3d& M) {
  Vec3d c0 = M.col(0), c1 = M.col(1), c2 = M.col(2);
  c0 /= std::sqrt(hdot(c0, c0));
  c1 -= hdot(c1, c0) * c0;
  c1 /= std::sqrt(hdot(c1, c1));
  c2 -= hdot(c2, c0) * c0 + hdot(c2, c1) * c1;
  c2 /= std::sqrt(-hdot(c2, c2));
  Mat3d R;
  R.col(0) = c0;
  R.col(1) = c1;
  R.col(2) = c2;
  if (R(2, 2) < 0.0 || R.determinant() < 0.0)
    throw invariant_error("h_orthonormalize: input not near SO+(2,1)");
  return R;
}

// ---------------------------------------------------------------------------
// Hyperboloid points.

template <class S> Vec3<S> normalize_pt(const Vec3<S>& x) {
  return x / std::sqrt(-hdot(x, x));
}

template <class S> S hdist(const Vec3<S>& x, const Vec3<S>& y) {
  return std::acosh(std::max(-hdot(x, y), S(1)));
}

// geodesic midpoint: the normalized sum (exact on the hyperboloid)
template <class S> Vec3<S> hmid(const Vec3<S>& x, const Vec3<S>& y) {
  return normalize_pt<S>(x + y);
}

// log_x(y): tangent vector at x of h-length d(x,y) pointing toward y
template <class S> Vec3<S> hlog(const Vec3<S>& x, const Vec3<S>& y) {
  const S c = std::max(-hdot(x, y), S(1));
  const S d = std::acosh(c);
  const Vec3<S> w = y - c * x;
  if (d <= S(1e-12)) return w;  // sinh d ~ d: w already has length ~ d
  return (d / std::sinh(d)) * w;
}

// exp_x(v) for tangent v (h(x,v)=0, v spacelike); renormalized onto the sheet
template <class S> Vec3<S> hexp(const Vec3<S>& x, const Vec3<S>& v) {
  const S n2 = hdot(v, v);
  if (n2 <= S(0)) return normalize_pt(x);
  const S n = std::sqrt(n2);
  Vec3<S> out = std::cosh(n) * x + (std::sinh(n) / n) * v;
  return normalize_pt(out);
}

// ---------------------------------------------------------------------------
// Standard isometries.

// rotation about the timelike axis e3
template <class S> Mat3<S> rot_z(S t) {
  const S c = std::cos(t), s = std::sin(t);
  Mat3<S> R = Mat3<S>::Identity();
  R(0, 0) = c;
  R(0, 1) = -s;
  R(1, 0) = s;
  R(1, 1) = c;
  return R;
}

// pure boost with translation 2-vector v (direction v/|v|, rapidity |v|)
template <class S> Mat3<S> boost_xy(const Vec2<S>& v) {
  const S n = std::hypot(v[0], v[1]);
  if (n < S(1e-300)) return Mat3<S>::Identity();
  const S x = v[0] / n, y = v[1] / n;
  const S sh = std::sinh(n), ch = std::cosh(n);
  Mat3<S> B = Mat3<S>::Identity();
  B(0, 0) += (ch - 1) * x * x;
  B(0, 1) = B(1, 0) = (ch - 1) * x * y;
  B(1, 1) += (ch - 1) * y * y;
  B(0, 2) = B(2, 0) = sh * x;
  B(1, 2) = B(2, 1) = sh * y;
  B(2, 2) = ch;
  return B;
}

// B(x): the pure boost with B x = e3, closed form
template <class S> Mat3<S> boost_to_origin(const Vec3<S>& x) {
  Mat3<S> B;
  const S d = S(1) + x[2];
  B(0, 0) = S(1) + x[0] * x[0] / d;
  B(0, 1) = x[0] * x[1] / d;
  B(0, 2) = -x[0];
  B(1, 0) = B(0, 1);
  B(1, 1) = S(1) + x[1] * x[1] / d;
  B(1, 2) = -x[1];
  B(2, 0) = -x[0];
  B(2, 1) = -x[1];
  B(2, 2) = x[2];
  return B;
}

// ---------------------------------------------------------------------------
// so(2,1) basis and closed-form exp/log.

template <class S> Mat3<S> jz() {
  Mat3<S> J = Mat3<S>::Zero();
  J(0, 1) = S(-1);
  J(1, 0) = S(1);
  return J;
}

template <class S> Mat3<S> bmat(const Vec2<S>& u) {
  Mat3<S> B = Mat3<S>::Zero();
  B(0, 2) = B(2, 0) = u[0];
  B(1, 2) = B(2, 1) = u[1];
  return B;
}

namespace detail {
// coefficients of exp(X) = I + f X + g X^2 as functions of kappa
template <class S> void exp_fg(S kappa, S& f, S& g) {
  if (kappa > S(1e-12)) {
    const S s = std::sqrt(kappa);
    f = std::sinh(s) / s;
    g = (std::cosh(s) - 1) / kappa;
  } else if (kappa < S(-1e-12)) {
    const S s = std::sqrt(-kappa);
    f = std::sin(s) / s;
    g = (1 - std::cos(s)) / (-kappa);
  } else {
    f = S(1) + kappa / 6;
    g = S(0.5) + kappa / 24;
  }
}
}  // namespace detail

template <class S> Mat3<S> so21_exp(S alpha, const Vec2<S>& u) {
  const Mat3<S> X = alpha * jz<S>() + bmat(u);
  const S kappa = u[0] * u[0] + u[1] * u[1] - alpha * alpha;
  S f, g;
  detail::exp_fg(kappa, f, g);
  return Mat3<S>::Identity() + f * X + g * (X * X);
}

template <class S> Mat3<S> so21_exp(const Mat3<S>& X) {
  const S a = X(1, 0);
  return so21_exp(a, Vec2<S>(X(0, 2), X(1, 2)));
}

// principal log; throws log_branch_error near the elliptic angle pi
template <class S> Mat3<S> so21_log(const Mat3<S>& M) {
  const S t = (M.trace() - 1) / 2;
  S f;
  if (t >= S(1) + S(1e-12)) {
    const S s = std::acosh(t);
    f = std::sinh(s) / s;
  } else if (t <= S(1) - S(1e-12)) {
    const S s = std::acos(std::clamp(t, S(-1), S(1)));
    f = std::sin(s) / s;
    if (std::abs(s) > S(pi) - S(1e-6)) throw log_branch_error("log branch near pi");
  } else {
    // parabolic neighborhood: series in k = s^2 ~ 2(t-1), both branches
    const S k = 2 * (t - 1);
    f = S(1) + k / 6 + k * k / 120;
  }
  return (M - soinv(M)) / (2 * f);
}

// polar rotation angle: exact for SO+(2,1) since the Euclidean polar factor
// is diag(R(theta),1) and the upper-left 2x2 block is R(theta) times SPD
template <class S> S polar_angle(const Mat3<S>& M) {
  return std::atan2(M(1, 0) - M(0, 1), M(0, 0) + M(1, 1));
}

template <class S> S wrap_pi(S t) {
  S r = std::fmod(t + S(pi), S(2) * S(pi));
  if (r < S(0)) r += S(2) * S(pi);
  return r - S(pi);
}

inline Mat3d to_f64(const Mat3<LD>& M) { return M.cast<double>(); }
inline Vec3d to_f64(const Vec3<LD>& v) { return v.cast<double>(); }

}  // namespace hitchlab
