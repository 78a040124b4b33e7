#pragma once

#include <cmath>

namespace slcrit {

/// Second-order forward jet: value, first and second derivative with respect
/// to a single scalar variable.
template <typename Scalar>
struct Jet2 {
  Scalar value{0};
  Scalar d1{0};
  Scalar d2{0};

  static constexpr Jet2 constant(Scalar c) { return {c, Scalar(0), Scalar(0)}; }
  static constexpr Jet2 variable(Scalar x) { return {x, Scalar(1), Scalar(0)}; }
};

template <typename S>
constexpr Jet2<S> operator-(const Jet2<S>& a) {
  return {-a.value, -a.d1, -a.d2};
}

template <typename S>
constexpr Jet2<S> operator+(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
}

template <typename S>
constexpr Jet2<S> operator-(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
}

template <typename S>
constexpr Jet2<S> operator*(const Jet2<S>& a, const Jet2<S>& b) {
  return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
          a.d2 * b.value + S(2) * a.d1 * b.d1 + a.value * b.d2};
}

// Caller guarantees b.value != 0.
template <typename S>
constexpr Jet2<S> operator/(const Jet2<S>& a, const Jet2<S>& b) {
  const S q = a.value / b.value;
  const S q1 = (a.d1 - q * b.d1) / b.value;
  const S q2 = (a.d2 - S(2) * q1 * b.d1 - q * b.d2) / b.value;
  return {q, q1, q2};
}

/// Chain rule for an outer function g with g(x), g'(x), g''(x) given.
template <typename S>
constexpr Jet2<S> compose(const Jet2<S>& a, S g0, S g1, S g2) {
  return {g0, g1 * a.d1, g2 * a.d1 * a.d1 + g1 * a.d2};
}

template <typename S>
S ipow(S x, unsigned k) {
  S r(1);
  while (k) {
    if (k & 1u) r *= x;
    x *= x;
    k >>= 1u;
  }
  return r;
}

template <typename S>
Jet2<S> pow(const Jet2<S>& a, unsigned k) {
  if (k == 0) return Jet2<S>::constant(S(1));
  const S p1 = ipow(a.value, k - 1);
  const S p2 = k >= 2 ? ipow(a.value, k - 2) : S(0);
  const S kk = S(k);
  return compose(a, p1 * a.value, kk * p1, kk * (kk - S(1)) * p2);
}

template <typename S>
Jet2<S> sin(const Jet2<S>& a) {
  using std::cos, std::sin;
  const S s = sin(a.value);
  return compose(a, s, cos(a.value), -s);
}

template <typename S>
Jet2<S> cos(const Jet2<S>& a) {
  using std::cos, std::sin;
  const S c = cos(a.value);
  return compose(a, c, -sin(a.value), -c);
}

template <typename S>
Jet2<S> exp(const Jet2<S>& a) {
  using std::exp;
  const S e = exp(a.value);
  return compose(a, e, e, e);
}

template <typename S>
Jet2<S> tanh(const Jet2<S>& a) {
  using std::tanh;
  const S t = tanh(a.value);
  const S sech2 = S(1) - t * t;
  return compose(a, t, sech2, S(-2) * t * sech2);
}

// Caller guarantees a.value > 0.
template <typename S>
Jet2<S> log(const Jet2<S>& a) {
  using std::log;
  const S inv = S(1) / a.value;
  return compose(a, log(a.value), inv, -inv * inv);
}

}  // namespace slcrit
