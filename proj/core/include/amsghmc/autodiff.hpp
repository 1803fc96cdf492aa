// Copyright 2026 The amsghmc Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "amsghmc/error.hpp"

// Small differentiation engine.
//
// Reverse mode: a Tape records a Wengert list of primitive operations on
// Var handles; Tape::adjoints() runs one reverse sweep.
// Forward mode: Dual<T> carries one tangent. Dual<Var> records both the
// primal and the tangent onto the enclosing tape, so a first partial
// derivative can itself be differentiated in reverse mode.
//
// Generic code is written once against the free functions below and
// instantiated for double, Var, Dual<double> and Dual<Var>.
namespace amsghmc::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kAddConst,
  kMulConst,
  kDivConst,    // a / c
  kConstDiv,    // c / a
  kConstSub,    // c - a
  kNeg,
  kExp,
  kLog,
  kTanh,
  kSigmoid,
  kRelu,
  kLeakyRelu,
  kSqrt,
  kPowConst,
};

class Tape;

/// Handle to a node on a Tape, or a constant when detached from any tape.
class Var {
 public:
  Var() = default;
  // NOLINTNEXTLINE(google-explicit-constructor)
  Var(double constant) : value_(constant) {}

  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int index, double value)
      : tape_(tape), index_(index), value_(value) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(double value);
  std::vector<Var> variables(std::span<const double> values);

  /// Records op(a) or op(a, b). Constant operands are folded by the caller.
  Var record(Op op, const Var& a, double constant = 0.0);
  Var record(Op op, const Var& a, const Var& b);

  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }
  void clear();

  /// One reverse sweep seeded at `output`; result is indexed by node.
  std::vector<double> adjoints(const Var& output) const;
  /// Reverse sweep restricted to the leaves, in creation order.
  std::vector<double> leaf_gradient(const Var& output) const;
  /// Reverse sweep seeded with arbitrary output adjoints.
  std::vector<double> leaf_gradient(std::span<const Var> outputs,
                                    std::span<const double> seeds) const;

  /// Recomputes every node from new leaf values. Returns the node values.
  std::vector<double> replay(std::span<const double> leaf_values) const;

  /// Index of the first node holding a non-finite value, or -1.
  int first_non_finite() const;

  double value_at(int index) const { return nodes_[index].value; }

 private:
  struct Node {
    Op op;
    int a;
    int b;
    double constant;
    double value;
    double da;
    double db;
  };
  static void evaluate(Node& node, double va, double vb);

  std::vector<Node> nodes_;
  std::vector<int> leaves_;
};

// ---------------------------------------------------------------------------
// Scalar primitives on double.

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double leaky_relu(double x, double slope) {
  return x > 0.0 ? x : slope * x;
}
inline double value(double x) { return x; }
using std::exp;
using std::log;
using std::pow;
using std::sqrt;
using std::tanh;

// ---------------------------------------------------------------------------
// Var arithmetic.

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sqrt(const Var& a);
Var pow(const Var& a, double exponent);
inline double value(const Var& a) { return a.value(); }

// ---------------------------------------------------------------------------
// Forward-mode dual numbers over any scalar T.

template <class T>
struct Dual {
  T primal{};
  T tangent{};

  Dual() = default;
  // NOLINTNEXTLINE(google-explicit-constructor)
  Dual(double constant) : primal(constant), tangent(0.0) {}
  Dual(T p, T t) : primal(std::move(p)), tangent(std::move(t)) {}
};

template <class T>
double value(const Dual<T>& d) {
  return value(d.primal);
}

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.primal + b.primal, a.tangent + b.tangent};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.primal - b.primal, a.tangent - b.tangent};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.primal * b.primal, a.tangent * b.primal + a.primal * b.tangent};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.primal / b.primal;
  return {q, (a.tangent - q * b.tangent) / b.primal};
}
template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.primal, -a.tangent};
}
template <class T>
Dual<T> operator+(const Dual<T>& a, double c) {
  return {a.primal + c, a.tangent};
}
template <class T>
Dual<T> operator+(double c, const Dual<T>& a) {
  return {c + a.primal, a.tangent};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, double c) {
  return {a.primal - c, a.tangent};
}
template <class T>
Dual<T> operator-(double c, const Dual<T>& a) {
  return {c - a.primal, -a.tangent};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, double c) {
  return {a.primal * c, a.tangent * c};
}
template <class T>
Dual<T> operator*(double c, const Dual<T>& a) {
  return {c * a.primal, c * a.tangent};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, double c) {
  return {a.primal / c, a.tangent / c};
}
// Mixed Dual<Var> (op) Var, used when a network weight meets a dual input.
inline Dual<Var> operator*(const Var& w, const Dual<Var>& a) {
  return {w * a.primal, w * a.tangent};
}
inline Dual<Var> operator+(const Dual<Var>& a, const Var& b) {
  return {a.primal + b, a.tangent};
}
template <class T>
Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
  return a = a + b;
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.primal);
  return {e, e * a.tangent};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.primal), a.tangent / a.primal};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  T t = tanh(a.primal);
  return {t, (1.0 - t * t) * a.tangent};
}
template <class T>
Dual<T> sigmoid(const Dual<T>& a) {
  T s = sigmoid(a.primal);
  return {s, (s * (1.0 - s)) * a.tangent};
}
template <class T>
Dual<T> relu(const Dual<T>& a) {
  if (value(a.primal) > 0.0) return a;
  return {T(0.0), T(0.0)};
}
template <class T>
Dual<T> leaky_relu(const Dual<T>& a, double slope) {
  if (value(a.primal) > 0.0) return a;
  return {slope * a.primal, slope * a.tangent};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T r = sqrt(a.primal);
  return {r, a.tangent / (2.0 * r)};
}
template <class T>
Dual<T> pow(const Dual<T>& a, double exponent) {
  using std::pow;
  return {pow(a.primal, exponent),
          (exponent * pow(a.primal, exponent - 1.0)) * a.tangent};
}

// ---------------------------------------------------------------------------
// Driver functions.

struct Gradient {
  double value = 0.0;
  std::vector<double> grad;
};

/// Value and reverse-mode gradient of f: span<const Var> -> Var at x.
/// Throws EvaluationError naming the first non-finite node.
template <class F>
Gradient evaluate_with_gradient(F&& f, std::span<const double> x) {
  Tape tape;
  std::vector<Var> inputs = tape.variables(x);
  Var out = f(std::span<const Var>(inputs));
  if (int bad = tape.first_non_finite(); bad >= 0) {
    throw EvaluationError("non-finite intermediate at tape node " +
                              std::to_string(bad),
                          bad);
  }
  if (out.is_constant()) {
    return {out.value(), std::vector<double>(x.size(), 0.0)};
  }
  return {out.value(), tape.leaf_gradient(out)};
}

/// Forward-mode partial of f with respect to input i, over base scalar T.
/// With T = Var the returned tangent lives on the caller's tape.
template <class T, class F>
T partial(F&& f, std::span<const T> x, std::size_t i) {
  if (i >= x.size()) throw PreconditionError("partial: index out of range");
  std::vector<Dual<T>> duals;
  duals.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    duals.emplace_back(x[j], T(j == i ? 1.0 : 0.0));
  }
  Dual<T> out = f(std::span<const Dual<T>>(duals));
  if constexpr (std::is_same_v<T, double>) {
    if (!std::isfinite(out.tangent)) {
      throw EvaluationError("non-finite partial derivative", -1);
    }
  }
  return out.tangent;
}

}  // namespace amsghmc::ad
