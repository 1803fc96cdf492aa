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

#include "amsghmc/autodiff.hpp"

#include <cassert>
#include <cmath>

namespace amsghmc::ad {

Var Tape::variable(double value) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({Op::kLeaf, -1, -1, 0.0, value, 0.0, 0.0});
  leaves_.push_back(index);
  return Var(this, index, value);
}

std::vector<Var> Tape::variables(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(variable(v));
  return out;
}

void Tape::clear() {
  nodes_.clear();
  leaves_.clear();
}

// Computes value and local partials of a node from its operand values.
// Both recording and replay go through here, so replay is bit-exact.
void Tape::evaluate(Node& n, double va, double vb) {
  const double c = n.constant;
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd:
      n.value = va + vb;
      n.da = 1.0;
      n.db = 1.0;
      break;
    case Op::kSub:
      n.value = va - vb;
      n.da = 1.0;
      n.db = -1.0;
      break;
    case Op::kMul:
      n.value = va * vb;
      n.da = vb;
      n.db = va;
      break;
    case Op::kDiv:
      n.value = va / vb;
      n.da = 1.0 / vb;
      n.db = -n.value / vb;
      break;
    case Op::kAddConst:
      n.value = va + c;
      n.da = 1.0;
      break;
    case Op::kMulConst:
      n.value = va * c;
      n.da = c;
      break;
    case Op::kDivConst:
      n.value = va / c;
      n.da = 1.0 / c;
      break;
    case Op::kConstDiv:
      n.value = c / va;
      n.da = -n.value / va;
      break;
    case Op::kConstSub:
      n.value = c - va;
      n.da = -1.0;
      break;
    case Op::kNeg:
      n.value = -va;
      n.da = -1.0;
      break;
    case Op::kExp:
      n.value = std::exp(va);
      n.da = n.value;
      break;
    case Op::kLog:
      n.value = std::log(va);
      n.da = 1.0 / va;
      break;
    case Op::kTanh:
      n.value = std::tanh(va);
      n.da = 1.0 - n.value * n.value;
      break;
    case Op::kSigmoid:
      n.value = sigmoid(va);
      n.da = n.value * (1.0 - n.value);
      break;
    case Op::kRelu:
      n.value = relu(va);
      n.da = va > 0.0 ? 1.0 : 0.0;
      break;
    case Op::kLeakyRelu:
      // The subgradient at 0 is the negative-side slope.
      n.value = leaky_relu(va, c);
      n.da = va > 0.0 ? 1.0 : c;
      break;
    case Op::kSqrt:
      n.value = std::sqrt(va);
      n.da = 0.5 / n.value;
      break;
    case Op::kPowConst:
      n.value = std::pow(va, c);
      n.da = c * std::pow(va, c - 1.0);
      break;
  }
}

Var Tape::record(Op op, const Var& a, double constant) {
  assert(a.tape() == this);
  Node n{op, a.index(), -1, constant, 0.0, 0.0, 0.0};
  evaluate(n, a.value(), 0.0);
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(n);
  return Var(this, index, n.value);
}

Var Tape::record(Op op, const Var& a, const Var& b) {
  assert(a.tape() == this && b.tape() == this);
  Node n{op, a.index(), b.index(), 0.0, 0.0, 0.0, 0.0};
  evaluate(n, a.value(), b.value());
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(n);
  return Var(this, index, n.value);
}

std::vector<double> Tape::adjoints(const Var& output) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  if (output.is_constant()) return adj;
  adj[output.index()] = 1.0;
  for (int i = output.index(); i >= 0; --i) {
    const Node& n = nodes_[i];
    const double g = adj[i];
    if (g == 0.0 || n.op == Op::kLeaf) continue;
    adj[n.a] += g * n.da;
    if (n.b >= 0) adj[n.b] += g * n.db;
  }
  return adj;
}

std::vector<double> Tape::leaf_gradient(const Var& output) const {
  const std::vector<double> adj = adjoints(output);
  std::vector<double> out(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) out[i] = adj[leaves_[i]];
  return out;
}

std::vector<double> Tape::leaf_gradient(std::span<const Var> outputs,
                                        std::span<const double> seeds) const {
  std::vector<double> adj(nodes_.size(), 0.0);
  int top = -1;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    if (outputs[k].is_constant()) continue;
    adj[outputs[k].index()] += seeds[k];
    top = std::max(top, outputs[k].index());
  }
  for (int i = top; i >= 0; --i) {
    const Node& n = nodes_[i];
    const double g = adj[i];
    if (g == 0.0 || n.op == Op::kLeaf) continue;
    adj[n.a] += g * n.da;
    if (n.b >= 0) adj[n.b] += g * n.db;
  }
  std::vector<double> out(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) out[i] = adj[leaves_[i]];
  return out;
}

std::vector<double> Tape::replay(std::span<const double> leaf_values) const {
  if (leaf_values.size() != leaves_.size()) {
    throw PreconditionError("replay: leaf count mismatch");
  }
  std::vector<double> values(nodes_.size());
  std::size_t next_leaf = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node n = nodes_[i];
    if (n.op == Op::kLeaf) {
      values[i] = leaf_values[next_leaf++];
      continue;
    }
    evaluate(n, values[n.a], n.b >= 0 ? values[n.b] : 0.0);
    values[i] = n.value;
  }
  return values;
}

int Tape::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!std::isfinite(nodes_[i].value)) return static_cast<int>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------

namespace {

Tape* tape_of(const Var& a, const Var& b) {
  assert(a.tape() == nullptr || b.tape() == nullptr || a.tape() == b.tape());
  return a.tape() != nullptr ? a.tape() : b.tape();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value() + b.value());
  if (a.is_constant()) return tape_of(a, b)->record(Op::kAddConst, b, a.value());
  if (b.is_constant()) return tape_of(a, b)->record(Op::kAddConst, a, b.value());
  return tape_of(a, b)->record(Op::kAdd, a, b);
}

Var operator-(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value() - b.value());
  if (a.is_constant()) return tape_of(a, b)->record(Op::kConstSub, b, a.value());
  if (b.is_constant()) {
    return tape_of(a, b)->record(Op::kAddConst, a, -b.value());
  }
  return tape_of(a, b)->record(Op::kSub, a, b);
}

Var operator*(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value() * b.value());
  if (a.is_constant()) return tape_of(a, b)->record(Op::kMulConst, b, a.value());
  if (b.is_constant()) return tape_of(a, b)->record(Op::kMulConst, a, b.value());
  return tape_of(a, b)->record(Op::kMul, a, b);
}

Var operator/(const Var& a, const Var& b) {
  if (a.is_constant() && b.is_constant()) return Var(a.value() / b.value());
  if (a.is_constant()) return tape_of(a, b)->record(Op::kConstDiv, b, a.value());
  if (b.is_constant()) return tape_of(a, b)->record(Op::kDivConst, a, b.value());
  return tape_of(a, b)->record(Op::kDiv, a, b);
}

Var operator+(const Var& a, double c) { return a + Var(c); }
Var operator+(double c, const Var& a) { return Var(c) + a; }
Var operator-(const Var& a, double c) { return a - Var(c); }
Var operator-(double c, const Var& a) { return Var(c) - a; }
Var operator*(const Var& a, double c) { return a * Var(c); }
Var operator*(double c, const Var& a) { return Var(c) * a; }
Var operator/(const Var& a, double c) { return a / Var(c); }
Var operator/(double c, const Var& a) { return Var(c) / a; }

Var operator-(const Var& a) {
  if (a.is_constant()) return Var(-a.value());
  return a.tape()->record(Op::kNeg, a);
}

#define AMSGHMC_UNARY(name, op, expr)                 \
  Var name(const Var& a) {                           \
    if (a.is_constant()) {                           \
      const double x = a.value();                    \
      return Var(expr);                              \
    }                                                \
    return a.tape()->record(op, a);                  \
  }

AMSGHMC_UNARY(exp, Op::kExp, std::exp(x))
AMSGHMC_UNARY(log, Op::kLog, std::log(x))
AMSGHMC_UNARY(tanh, Op::kTanh, std::tanh(x))
AMSGHMC_UNARY(sigmoid, Op::kSigmoid, sigmoid(x))
AMSGHMC_UNARY(relu, Op::kRelu, relu(x))
AMSGHMC_UNARY(sqrt, Op::kSqrt, std::sqrt(x))

#undef AMSGHMC_UNARY

Var leaky_relu(const Var& a, double slope) {
  if (a.is_constant()) return Var(leaky_relu(a.value(), slope));
  return a.tape()->record(Op::kLeakyRelu, a, slope);
}

Var pow(const Var& a, double exponent) {
  if (a.is_constant()) return Var(std::pow(a.value(), exponent));
  return a.tape()->record(Op::kPowConst, a, exponent);
}

}  // namespace amsghmc::ad
