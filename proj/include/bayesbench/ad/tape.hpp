#pragma once

// Tape-based reverse-mode automatic differentiation over scalars.
//
// A Var either references a node on a Tape or holds a plain constant
// (tape == nullptr). Arithmetic between constants folds without recording.
// One backward pass over the tape yields the full gradient with respect to
// the leaf variables. Each evaluation owns its tape; tapes are not shared
// across threads.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace bayesbench::ad {

class Tape {
 public:
  struct Node {
    double d1;
    double d2;
    std::int32_t p1;
    std::int32_t p2;
  };

  void clear() {
    nodes_.clear();
    nonfinite_ = false;
  }

  std::size_t size() const { return nodes_.size(); }
  bool saw_nonfinite() const { return nonfinite_; }
  void note_nonfinite() { nonfinite_ = true; }

  std::int32_t push_leaf() {
    nodes_.push_back(Node{0.0, 0.0, -1, -1});
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }

  std::int32_t push_unary(std::int32_t parent, double d) {
    nodes_.push_back(Node{d, 0.0, parent, -1});
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }

  std::int32_t push_binary(std::int32_t pa, double da, std::int32_t pb, double db) {
    nodes_.push_back(Node{da, db, pa, pb});
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }

  const Node& node(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)]; }

  std::vector<double>& adjoint_scratch() { return adjoints_; }

 private:
  std::vector<Node> nodes_;
  std::vector<double> adjoints_;
  bool nonfinite_ = false;
};

struct Var {
  double val = 0.0;
  Tape* tape = nullptr;
  std::int32_t idx = -1;

  Var() = default;
  Var(double v) : val(v) {}  // NOLINT: implicit constant lift is intended
  Var(double v, Tape* t, std::int32_t i) : val(v), tape(t), idx(i) {}

  bool recorded() const { return tape != nullptr; }
};

inline double value_of(const Var& v) { return v.val; }
inline double value_of(double v) { return v; }

template <class T>
inline constexpr bool is_var_v = std::is_same_v<std::decay_t<T>, Var>;

// Var if either operand is a Var, double otherwise.
template <class A, class B>
using promote_t = std::conditional_t<is_var_v<A> || is_var_v<B>, Var, double>;

namespace detail {

inline Var record_unary(const Var& a, double value, double d) {
  if (!a.recorded()) return Var(value);
  Tape* t = a.tape;
  if (!std::isfinite(value) || !std::isfinite(d)) t->note_nonfinite();
  return Var(value, t, t->push_unary(a.idx, d));
}

inline Var record_binary(const Var& a, const Var& b, double value, double da, double db) {
  Tape* t = a.recorded() ? a.tape : b.tape;
  if (t == nullptr) return Var(value);
  if (!std::isfinite(value)) t->note_nonfinite();
  if (a.recorded() && b.recorded()) {
    if (!std::isfinite(da) || !std::isfinite(db)) t->note_nonfinite();
    return Var(value, t, t->push_binary(a.idx, da, b.idx, db));
  }
  if (a.recorded()) {
    if (!std::isfinite(da)) t->note_nonfinite();
    return Var(value, t, t->push_unary(a.idx, da));
  }
  if (!std::isfinite(db)) t->note_nonfinite();
  return Var(value, t, t->push_unary(b.idx, db));
}

}  // namespace detail

// --- arithmetic -------------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  return detail::record_binary(a, b, a.val + b.val, 1.0, 1.0);
}
inline Var operator+(const Var& a, double b) { return detail::record_unary(a, a.val + b, 1.0); }
inline Var operator+(double a, const Var& b) { return detail::record_unary(b, a + b.val, 1.0); }

inline Var operator-(const Var& a, const Var& b) {
  return detail::record_binary(a, b, a.val - b.val, 1.0, -1.0);
}
inline Var operator-(const Var& a, double b) { return detail::record_unary(a, a.val - b, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::record_unary(b, a - b.val, -1.0); }
inline Var operator-(const Var& a) { return detail::record_unary(a, -a.val, -1.0); }

inline Var operator*(const Var& a, const Var& b) {
  return detail::record_binary(a, b, a.val * b.val, b.val, a.val);
}
inline Var operator*(const Var& a, double b) { return detail::record_unary(a, a.val * b, b); }
inline Var operator*(double a, const Var& b) { return detail::record_unary(b, a * b.val, a); }

inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.val;
  return detail::record_binary(a, b, a.val * inv, inv, -a.val * inv * inv);
}
inline Var operator/(const Var& a, double b) {
  const double inv = 1.0 / b;
  return detail::record_unary(a, a.val * inv, inv);
}
inline Var operator/(double a, const Var& b) {
  const double inv = 1.0 / b.val;
  return detail::record_unary(b, a * inv, -a * inv * inv);
}

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator-=(Var& a, double b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator*=(Var& a, double b) { return a = a * b; }

// Comparisons act on values; branches taken on them choose the expression the
// derivative flows through, which is the usual subgradient convention.
inline bool operator<(const Var& a, const Var& b) { return a.val < b.val; }
inline bool operator<(const Var& a, double b) { return a.val < b; }
inline bool operator<(double a, const Var& b) { return a < b.val; }
inline bool operator>(const Var& a, const Var& b) { return a.val > b.val; }
inline bool operator>(const Var& a, double b) { return a.val > b; }
inline bool operator>(double a, const Var& b) { return a > b.val; }
inline bool operator<=(const Var& a, double b) { return a.val <= b; }
inline bool operator>=(const Var& a, double b) { return a.val >= b; }

// --- elementary functions ---------------------------------------------------

inline Var exp(const Var& a) {
  const double e = std::exp(a.val);
  return detail::record_unary(a, e, e);
}

inline Var log(const Var& a) { return detail::record_unary(a, std::log(a.val), 1.0 / a.val); }

inline Var log1p(const Var& a) {
  return detail::record_unary(a, std::log1p(a.val), 1.0 / (1.0 + a.val));
}

inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.val);
  return detail::record_unary(a, s, 0.5 / s);
}

inline Var tanh(const Var& a) {
  const double t = std::tanh(a.val);
  return detail::record_unary(a, t, 1.0 - t * t);
}

inline Var sin(const Var& a) { return detail::record_unary(a, std::sin(a.val), std::cos(a.val)); }
inline Var cos(const Var& a) { return detail::record_unary(a, std::cos(a.val), -std::sin(a.val)); }

inline Var erf(const Var& a) {
  constexpr double two_over_sqrt_pi = 1.1283791670955125739;
  return detail::record_unary(a, std::erf(a.val), two_over_sqrt_pi * std::exp(-a.val * a.val));
}

inline Var erfc(const Var& a) {
  constexpr double two_over_sqrt_pi = 1.1283791670955125739;
  return detail::record_unary(a, std::erfc(a.val), -two_over_sqrt_pi * std::exp(-a.val * a.val));
}

inline Var pow(const Var& a, double p) {
  return detail::record_unary(a, std::pow(a.val, p), p * std::pow(a.val, p - 1.0));
}

inline Var fabs(const Var& a) {
  const double d = a.val > 0.0 ? 1.0 : (a.val < 0.0 ? -1.0 : 0.0);
  return detail::record_unary(a, std::fabs(a.val), d);
}
inline Var abs(const Var& a) { return fabs(a); }

inline Var max(const Var& a, const Var& b) {
  return a.val >= b.val ? detail::record_binary(a, b, a.val, 1.0, 0.0)
                        : detail::record_binary(a, b, b.val, 0.0, 1.0);
}
inline Var min(const Var& a, const Var& b) {
  return a.val <= b.val ? detail::record_binary(a, b, a.val, 1.0, 0.0)
                        : detail::record_binary(a, b, b.val, 0.0, 1.0);
}

// --- gradients ----------------------------------------------------------------

struct GradientRecord {
  double value = 0.0;
  std::vector<double> gradient;
  bool divergent = false;  // non-finite value, intermediate, or gradient entry
};

// Records f on `tape` and backpropagates. A non-finite intermediate or output
// marks the record divergent instead of throwing, so samplers can treat it as
// a rejected/divergent proposal.
template <class F>
GradientRecord value_and_grad(F&& f, std::span<const double> x, Tape& tape) {
  tape.clear();
  std::vector<Var> leaves;
  leaves.reserve(x.size());
  for (double xi : x) leaves.emplace_back(xi, &tape, tape.push_leaf());

  const Var out = f(std::span<const Var>(leaves.data(), leaves.size()));

  GradientRecord rec;
  rec.value = out.val;
  rec.gradient.assign(x.size(), 0.0);

  bool ok = std::isfinite(out.val) && !tape.saw_nonfinite();
  if (ok && out.recorded()) {
    auto& adj = tape.adjoint_scratch();
    adj.assign(tape.size(), 0.0);
    adj[static_cast<std::size_t>(out.idx)] = 1.0;
    for (std::int32_t i = out.idx; i >= 0; --i) {
      const double a = adj[static_cast<std::size_t>(i)];
      if (a == 0.0) continue;
      const Tape::Node& n = tape.node(i);
      if (n.p1 >= 0) adj[static_cast<std::size_t>(n.p1)] += n.d1 * a;
      if (n.p2 >= 0) adj[static_cast<std::size_t>(n.p2)] += n.d2 * a;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      rec.gradient[i] = adj[i];
      if (!std::isfinite(rec.gradient[i])) ok = false;
    }
  }
  rec.divergent = !ok;
  return rec;
}

template <class F>
GradientRecord value_and_grad(F&& f, std::span<const double> x) {
  Tape tape;
  return value_and_grad(std::forward<F>(f), x, tape);
}

// Central finite differences; the standard independent oracle for gradient tests.
template <class F>
std::vector<double> finite_difference_grad(F&& f, std::span<const double> x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_grad: h must be positive");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = point[i];
    point[i] = xi + h;
    const double fp = f(std::span<const double>(point));
    point[i] = xi - h;
    const double fm = f(std::span<const double>(point));
    point[i] = xi;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace bayesbench::ad
