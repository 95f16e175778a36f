#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "meher/diffcore/tensor.hpp"

namespace meher::diff {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// tape that produced it is alive.
class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAddRow,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kTanh,
  kExp,
  kSquare,
  kClamp,
  kMinimum,
  kSum,
  kMean,
  kGaussianLogProb,
};

struct TapeNode {
  OpKind op = OpKind::kLeaf;
  std::array<std::size_t, 3> inputs{};
  std::uint8_t input_count = 0;
  bool requires_grad = false;
  double lo = 0.0;  // scalar attributes: scale factor, clamp bounds
  double hi = 0.0;
  Tensor value;
};

/// Gradients of a scalar loss with respect to every node on the tape.
class Gradients {
 public:
  /// Gradient for `v`; a zero tensor of the right shape if `v` did not
  /// influence the loss.
  const Tensor& of(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<Tensor> zeros_;
};

/// Append-only record of tensor operations. Backward replays it in strict
/// reverse insertion order and never touches forward values.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  const TapeNode& node(Var v) const { return nodes_.at(v.id()); }
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(Var loss) const;

  // Appends an op node. Used by the free op functions below.
  Var record(OpKind op, std::initializer_list<Var> inputs, Tensor value, double lo = 0.0,
             double hi = 0.0);

 private:
  std::vector<TapeNode> nodes_;
};

// Matrix product of [n,k] x [k,m].
Var matmul(Var a, Var b);
// Adds a [1,m] row to every row of an [n,m] matrix.
Var add_row(Var a, Var row);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
// Elementwise product.
Var operator*(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var tanh(Var a);
Var exp(Var a);
Var square(Var a);
// Gradient is passed through strictly inside (lo, hi) and zeroed outside.
Var clamp(Var a, double lo, double hi);
// Elementwise minimum; ties route the gradient to `a`.
Var minimum(Var a, Var b);
Var sum(Var a);
Var mean(Var a);
// Per-row log density of `actions` under N(mean, diag(exp(log_std))^2).
// mean, actions: [n,d]; log_std: [1,d]. Result: [n,1].
Var gaussian_log_prob(Var mean, Var log_std, Var actions);

}  // namespace meher::diff
