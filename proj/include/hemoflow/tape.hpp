#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hemoflow/errors.hpp"

namespace hemo {

class Var;

/// Reverse-mode tape of scalar operations. Each recorded node stores at most
/// two parents with local partials; one reverse sweep yields the gradient of
/// any recorded scalar with respect to every leaf. Tapes are single-threaded
/// and meant to be reset and reused (capacity is retained across clear()).
class Tape {
  public:
    struct Node {
        double w0, w1;
        std::int32_t p0, p1;
    };

    std::int32_t leaf() { return push(0.0, -1, 0.0, -1); }
    std::int32_t unary(std::int32_t p, double w) { return push(w, p, 0.0, -1); }
    std::int32_t binary(std::int32_t p0, double w0, std::int32_t p1, double w1) {
        return push(w0, p0, w1, p1);
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Reverse sweep seeding d(output)/d(output) = seed for each given output.
    /// Returns adjoints for all nodes; index by a Var's node id.
    void backward(const std::vector<std::pair<std::int32_t, double>>& seeds,
                  std::vector<double>& adjoint) const {
        adjoint.assign(nodes_.size(), 0.0);
        for (const auto& [idx, seed] : seeds) adjoint[static_cast<std::size_t>(idx)] += seed;
        for (std::size_t k = nodes_.size(); k-- > 0;) {
            double a = adjoint[k];
            if (a == 0.0) continue;
            const Node& n = nodes_[k];
            if (n.p0 >= 0) adjoint[static_cast<std::size_t>(n.p0)] += n.w0 * a;
            if (n.p1 >= 0) adjoint[static_cast<std::size_t>(n.p1)] += n.w1 * a;
        }
    }

  private:
    std::int32_t push(double w0, std::int32_t p0, double w1, std::int32_t p1) {
        nodes_.push_back({w0, w1, p0, p1});
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

/// Scalar recorded on a Tape. A Var without a tape is a constant; mixing
/// constants with taped values is allowed and records nothing for the
/// constant side.
class Var {
  public:
    Var() = default;
    Var(double v) : v_(v) {}
    Var(double v, Tape* tape) : v_(v), tape_(tape), idx_(tape->leaf()) {}

    double value() const { return v_; }
    std::int32_t index() const { return idx_; }
    bool taped() const { return tape_ != nullptr; }

    friend double primal(const Var& x) { return x.v_; }

    friend Var operator+(const Var& a, const Var& b) {
        return combine(a, b, a.v_ + b.v_, 1.0, 1.0);
    }
    friend Var operator-(const Var& a, const Var& b) {
        return combine(a, b, a.v_ - b.v_, 1.0, -1.0);
    }
    friend Var operator*(const Var& a, const Var& b) {
        return combine(a, b, a.v_ * b.v_, b.v_, a.v_);
    }
    friend Var operator/(const Var& a, const Var& b) {
        if (b.v_ == 0.0) raise(errc::numeric, "tape division by zero");
        double inv = 1.0 / b.v_;
        return combine(a, b, a.v_ * inv, inv, -a.v_ * inv * inv);
    }
    friend Var operator-(const Var& a) { return chain(a, -a.v_, -1.0); }

    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }
    Var& operator*=(const Var& o) { return *this = *this * o; }
    Var& operator/=(const Var& o) { return *this = *this / o; }

    friend Var sin(const Var& a) { return chain(a, std::sin(a.v_), std::cos(a.v_)); }
    friend Var cos(const Var& a) { return chain(a, std::cos(a.v_), -std::sin(a.v_)); }
    friend Var exp(const Var& a) {
        double e = std::exp(a.v_);
        return chain(a, e, e);
    }
    friend Var log(const Var& a) {
        if (!(a.v_ > 0.0)) raise(errc::numeric, "tape log of non-positive value");
        return chain(a, std::log(a.v_), 1.0 / a.v_);
    }
    friend Var sqrt(const Var& a) {
        if (!(a.v_ > 0.0)) raise(errc::numeric, "tape sqrt of non-positive value");
        double s = std::sqrt(a.v_);
        return chain(a, s, 0.5 / s);
    }
    friend Var pow(const Var& a, double c) {
        if (!(a.v_ > 0.0)) raise(errc::numeric, "tape pow of non-positive base");
        return chain(a, std::pow(a.v_, c), c * std::pow(a.v_, c - 1.0));
    }
    friend Var tanh(const Var& a) {
        double t = std::tanh(a.v_);
        return chain(a, t, 1.0 - t * t);
    }

  private:
    static Var chain(const Var& a, double value, double dda) {
        Var r(value);
        if (a.tape_) {
            r.tape_ = a.tape_;
            r.idx_ = a.tape_->unary(a.idx_, dda);
        }
        return r;
    }

    static Var combine(const Var& a, const Var& b, double value, double dda, double ddb) {
        Var r(value);
        Tape* t = a.tape_ ? a.tape_ : b.tape_;
        if (!t) return r;
        r.tape_ = t;
        if (a.tape_ && b.tape_)
            r.idx_ = t->binary(a.idx_, dda, b.idx_, ddb);
        else if (a.tape_)
            r.idx_ = t->unary(a.idx_, dda);
        else
            r.idx_ = t->unary(b.idx_, ddb);
        return r;
    }

    double v_ = 0.0;
    Tape* tape_ = nullptr;
    std::int32_t idx_ = -1;
};

}  // namespace hemo
