#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "hemoflow/errors.hpp"

namespace hemo {

/// Number of independent variables a jet carries derivatives for: (x, y, z, t).
inline constexpr int kJetVars = 4;
/// Packed size of the symmetric 4x4 Hessian.
inline constexpr int kJetHess = 10;

/// Packed index of Hessian entry (i,j) with i <= j.
constexpr int jet_pack(int i, int j) { return i * (2 * kJetVars - 1 - i) / 2 + j; }

inline double primal(double x) { return x; }

/// Truncated second-order Taylor scalar in four variables. Arithmetic on Jet2
/// propagates the value, the gradient and the full symmetric Hessian exactly
/// (to rounding) through every smooth operation. T is double for plain
/// evaluation or a reverse-mode scalar when derivatives of the derivatives
/// are needed.
template <class T>
struct Jet2 {
    T v{};
    std::array<T, kJetVars> g{};
    std::array<T, kJetHess> h{};

    Jet2() = default;
    explicit Jet2(const T& value) : v(value) {}

    static Jet2 constant(const T& value) { return Jet2(value); }

    /// Seeds variable `index` so that d(jet)/d(var index) = 1.
    static Jet2 variable(const T& value, int index) {
        Jet2 j(value);
        j.g[static_cast<std::size_t>(index)] = T(1.0);
        return j;
    }

    const T& hess(int i, int j) const { return h[static_cast<std::size_t>(i <= j ? jet_pack(i, j) : jet_pack(j, i))]; }

    Jet2& operator+=(const Jet2& o) {
        v += o.v;
        for (int i = 0; i < kJetVars; ++i) g[i] += o.g[i];
        for (int i = 0; i < kJetHess; ++i) h[i] += o.h[i];
        return *this;
    }
    Jet2& operator-=(const Jet2& o) {
        v -= o.v;
        for (int i = 0; i < kJetVars; ++i) g[i] -= o.g[i];
        for (int i = 0; i < kJetHess; ++i) h[i] -= o.h[i];
        return *this;
    }
    Jet2& operator*=(const Jet2& o) { return *this = *this * o; }
    Jet2& operator+=(const T& c) {
        v += c;
        return *this;
    }
    Jet2& operator*=(const T& c) {
        v *= c;
        for (int i = 0; i < kJetVars; ++i) g[i] *= c;
        for (int i = 0; i < kJetHess; ++i) h[i] *= c;
        return *this;
    }

    friend Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
    friend Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
    friend Jet2 operator-(const Jet2& a) {
        Jet2 r;
        r.v = -a.v;
        for (int i = 0; i < kJetVars; ++i) r.g[i] = -a.g[i];
        for (int i = 0; i < kJetHess; ++i) r.h[i] = -a.h[i];
        return r;
    }

    friend Jet2 operator*(const Jet2& a, const Jet2& b) {
        Jet2 r;
        r.v = a.v * b.v;
        for (int i = 0; i < kJetVars; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
        for (int i = 0; i < kJetVars; ++i)
            for (int j = i; j < kJetVars; ++j)
                r.h[jet_pack(i, j)] = a.h[jet_pack(i, j)] * b.v + a.v * b.h[jet_pack(i, j)] +
                                      a.g[i] * b.g[j] + a.g[j] * b.g[i];
        return r;
    }

    friend Jet2 operator+(Jet2 a, const T& c) { return a += c; }
    friend Jet2 operator+(const T& c, Jet2 a) { return a += c; }
    friend Jet2 operator-(Jet2 a, const T& c) {
        a.v -= c;
        return a;
    }
    friend Jet2 operator-(const T& c, const Jet2& a) { return (-a) + c; }
    friend Jet2 operator*(Jet2 a, const T& c) { return a *= c; }
    friend Jet2 operator*(const T& c, Jet2 a) { return a *= c; }
    friend Jet2 operator/(Jet2 a, const T& c) { return a *= (T(1.0) / c); }
};

/// Composes f with a jet given f(v), f'(v), f''(v).
template <class T>
Jet2<T> jet_chain(const Jet2<T>& a, const T& f0, const T& f1, const T& f2) {
    Jet2<T> r;
    r.v = f0;
    for (int i = 0; i < kJetVars; ++i) r.g[i] = f1 * a.g[i];
    for (int i = 0; i < kJetVars; ++i)
        for (int j = i; j < kJetVars; ++j)
            r.h[jet_pack(i, j)] = f1 * a.h[jet_pack(i, j)] + f2 * a.g[i] * a.g[j];
    return r;
}

template <class T>
Jet2<T> sin(const Jet2<T>& a) {
    using std::cos;
    using std::sin;
    T s = sin(a.v), c = cos(a.v);
    return jet_chain(a, s, c, -s);
}

template <class T>
Jet2<T> cos(const Jet2<T>& a) {
    using std::cos;
    using std::sin;
    T c = cos(a.v), s = sin(a.v);
    return jet_chain(a, c, -s, -c);
}

template <class T>
Jet2<T> exp(const Jet2<T>& a) {
    using std::exp;
    T e = exp(a.v);
    return jet_chain(a, e, e, e);
}

template <class T>
Jet2<T> log(const Jet2<T>& a) {
    using std::log;
    if (!(primal(a.v) > 0.0)) raise(errc::numeric, "log of non-positive jet value");
    T inv = T(1.0) / a.v;
    return jet_chain(a, log(a.v), inv, -inv * inv);
}

template <class T>
Jet2<T> sqrt(const Jet2<T>& a) {
    using std::sqrt;
    if (!(primal(a.v) > 0.0)) raise(errc::numeric, "sqrt of non-positive jet value");
    T s = sqrt(a.v);
    T f1 = T(0.5) / s;
    T f2 = T(-0.25) / (s * a.v);
    return jet_chain(a, s, f1, f2);
}

/// Real power with real exponent; requires a positive base.
template <class T>
Jet2<T> pow(const Jet2<T>& a, double c) {
    using std::pow;
    if (!(primal(a.v) > 0.0)) raise(errc::numeric, "pow of non-positive jet base");
    T f0 = pow(a.v, c);
    T f1 = pow(a.v, c - 1.0) * c;
    T f2 = pow(a.v, c - 2.0) * (c * (c - 1.0));
    return jet_chain(a, f0, f1, f2);
}

template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) {
    if (primal(b.v) == 0.0) raise(errc::numeric, "jet division by zero");
    T inv = T(1.0) / b.v;
    Jet2<T> r = jet_chain(b, inv, -inv * inv, T(2.0) * inv * inv * inv);
    return a * r;
}

template <class T>
T sigmoid_value(const T& x) {
    using std::exp;
    if (primal(x) >= 0.0) {
        T e = exp(-x);
        return T(1.0) / (T(1.0) + e);
    }
    T e = exp(x);
    return e / (T(1.0) + e);
}

inline double sigmoid(double x) { return sigmoid_value(x); }
inline double swish(double x) { return x * sigmoid_value(x); }

template <class T>
Jet2<T> sigmoid(const Jet2<T>& a) {
    T s = sigmoid_value(a.v);
    T s1 = s * (T(1.0) - s);
    T s2 = s1 * (T(1.0) - T(2.0) * s);
    return jet_chain(a, s, s1, s2);
}

template <class T>
Jet2<T> tanh(const Jet2<T>& a) {
    using std::tanh;
    T t = tanh(a.v);
    T f1 = T(1.0) - t * t;
    return jet_chain(a, t, f1, T(-2.0) * t * f1);
}

/// swish(x) = x * sigmoid(x); the network activation.
template <class T>
Jet2<T> swish(const Jet2<T>& a) {
    T s = sigmoid_value(a.v);
    T s1 = s * (T(1.0) - s);
    T s2 = s1 * (T(1.0) - T(2.0) * s);
    T f0 = a.v * s;
    T f1 = s + a.v * s1;
    T f2 = T(2.0) * s1 + a.v * s2;
    return jet_chain(a, f0, f1, f2);
}

using Jetd = Jet2<double>;

}  // namespace hemo
