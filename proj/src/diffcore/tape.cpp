#include "meher/diffcore/tape.hpp"

#include <cmath>

#include "meher/diffcore/gaussian.hpp"
#include "meher/errors.hpp"

namespace meher::diff {

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ConfigError(std::string(op) + ": expected a 2-D tensor, got shape " + t.shape_string());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ConfigError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                      b.shape_string());
  }
}

Tape& tape_of(Var a) { return a.tape(); }

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw UsageError("operands recorded on different tapes");
}

// c[n,m] += a[n,k] * b[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// da[n,k] += dc[n,m] * b[k,m]^T
void gemm_nt(const double* dc, const double* b, double* da, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* dcrow = dc + i * m;
    double* darow = da + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += dcrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// db[k,m] += a[n,k]^T * dc[n,m]
void gemm_tn(const double* a, const double* dc, double* db, std::size_t n, std::size_t k,
             std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    const double* dcrow = dc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      double* dbrow = db + p * m;
      for (std::size_t j = 0; j < m; ++j) dbrow[j] += av * dcrow[j];
    }
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }

const Tensor& Gradients::of(Var v) const {
  const Tensor& g = grads_.at(v.id());
  if (!g.empty() || v.value().empty()) return g;
  return zeros_.at(v.id());
}

Var Tape::constant(Tensor value) {
  TapeNode node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
  TapeNode node;
  node.requires_grad = true;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind op, std::initializer_list<Var> inputs, Tensor value, double lo,
                 double hi) {
  TapeNode node;
  node.op = op;
  node.lo = lo;
  node.hi = hi;
  for (Var in : inputs) {
    if (&in.tape() != this) throw UsageError("operand recorded on a different tape");
    node.inputs[node.input_count++] = in.id();
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) throw UsageError("loss recorded on a different tape");
  const Tensor& loss_value = value(loss);
  if (loss_value.size() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + loss_value.shape_string());
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  auto& grads = out.grads_;
  auto grad_for = [&](std::size_t id) -> Tensor& {
    Tensor& g = grads[id];
    if (g.empty()) g = Tensor(nodes_[id].value.shape(), 0.0);
    return g;
  };

  grad_for(loss.id())[0] = 1.0;

  for (std::size_t idx = loss.id() + 1; idx-- > 0;) {
    const TapeNode& node = nodes_[idx];
    if (node.op == OpKind::kLeaf || !node.requires_grad || grads[idx].empty()) continue;
    const Tensor& g = grads[idx];
    const auto in0 = node.inputs[0];
    const auto in1 = node.inputs[1];
    auto wants = [&](std::size_t id) { return nodes_[id].requires_grad; };

    switch (node.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = nodes_[in0].value;
        const Tensor& b = nodes_[in1].value;
        const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
        if (wants(in0)) gemm_nt(g.data().data(), b.data().data(), grad_for(in0).data().data(), n, k, m);
        if (wants(in1)) gemm_tn(a.data().data(), g.data().data(), grad_for(in1).data().data(), n, k, m);
        break;
      }
      case OpKind::kAddRow: {
        if (wants(in0)) {
          Tensor& ga = grad_for(in0);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(in1)) {
          Tensor& gr = grad_for(in1);
          const std::size_t m = g.cols();
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < m; ++j) gr[j] += g[i * m + j];
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = node.op == OpKind::kAdd ? 1.0 : -1.0;
        if (wants(in0)) {
          Tensor& ga = grad_for(in0);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(in1)) {
          Tensor& gb = grad_for(in1);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = nodes_[in0].value;
        const Tensor& b = nodes_[in1].value;
        if (wants(in0)) {
          Tensor& ga = grad_for(in0);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (wants(in1)) {
          Tensor& gb = grad_for(in1);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
        break;
      }
      case OpKind::kScale: {
        Tensor& ga = grad_for(in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.lo * g[i];
        break;
      }
      case OpKind::kAddScalar: {
        Tensor& ga = grad_for(in0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case OpKind::kTanh: {
        Tensor& ga = grad_for(in0);
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case OpKind::kExp: {
        Tensor& ga = grad_for(in0);
        const Tensor& y = node.value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        break;
      }
      case OpKind::kSquare: {
        Tensor& ga = grad_for(in0);
        const Tensor& x = nodes_[in0].value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
        break;
      }
      case OpKind::kClamp: {
        Tensor& ga = grad_for(in0);
        const Tensor& x = nodes_[in0].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x[i] > node.lo && x[i] < node.hi) ga[i] += g[i];
        }
        break;
      }
      case OpKind::kMinimum: {
        const Tensor& a = nodes_[in0].value;
        const Tensor& b = nodes_[in1].value;
        for (std::size_t i = 0; i < g.size(); ++i) {
          const bool pick_a = a[i] <= b[i];
          const std::size_t target = pick_a ? in0 : in1;
          if (wants(target)) grad_for(target)[i] += g[i];
        }
        break;
      }
      case OpKind::kSum:
      case OpKind::kMean: {
        Tensor& ga = grad_for(in0);
        const double factor =
            node.op == OpKind::kSum ? g[0] : g[0] / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor;
        break;
      }
      case OpKind::kGaussianLogProb: {
        const Tensor& mu = nodes_[in0].value;
        const Tensor& log_std = nodes_[in1].value;
        const auto in2 = node.inputs[2];
        const Tensor& x = nodes_[in2].value;
        const std::size_t n = mu.rows(), d = mu.cols();
        Tensor* gmu = wants(in0) ? &grad_for(in0) : nullptr;
        Tensor* gls = wants(in1) ? &grad_for(in1) : nullptr;
        Tensor* gx = wants(in2) ? &grad_for(in2) : nullptr;
        for (std::size_t j = 0; j < d; ++j) {
          const double inv_var = std::exp(-2.0 * log_std[j]);
          for (std::size_t i = 0; i < n; ++i) {
            const double diff = x[i * d + j] - mu[i * d + j];
            const double gi = g[i];
            if (gmu) (*gmu)[i * d + j] += gi * diff * inv_var;
            if (gx) (*gx)[i * d + j] -= gi * diff * inv_var;
            if (gls) (*gls)[j] += gi * (diff * diff * inv_var - 1.0);
          }
        }
        break;
      }
    }
  }

  out.zeros_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (grads[i].empty()) out.zeros_[i] = Tensor(nodes_[i].value.shape(), 0.0);
  }
  return out;
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw ConfigError("matmul: inner dimensions differ " + av.shape_string() + " x " +
                      bv.shape_string());
  }
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), av.rows(), av.cols(), bv.cols());
  return tape_of(a).record(OpKind::kMatMul, {a, b}, std::move(out));
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_matrix(av, "add_row");
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ConfigError("add_row: row shape " + rv.shape_string() + " incompatible with " +
                      av.shape_string());
  }
  Tensor out = av;
  const std::size_t m = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += rv[j];
  return tape_of(a).record(OpKind::kAddRow, {a, row}, std::move(out));
}

namespace {

template <typename F>
Var binary(Var a, Var b, OpKind op, const char* name, F f) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, name);
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return tape_of(a).record(op, {a, b}, std::move(out));
}

template <typename F>
Var unary(Var a, OpKind op, F f, double lo = 0.0, double hi = 0.0) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return tape_of(a).record(op, {a}, std::move(out), lo, hi);
}

}  // namespace

Var operator+(Var a, Var b) {
  return binary(a, b, OpKind::kAdd, "add", [](double x, double y) { return x + y; });
}

Var operator-(Var a, Var b) {
  return binary(a, b, OpKind::kSub, "sub", [](double x, double y) { return x - y; });
}

Var operator*(Var a, Var b) {
  return binary(a, b, OpKind::kMul, "mul", [](double x, double y) { return x * y; });
}

Var minimum(Var a, Var b) {
  return binary(a, b, OpKind::kMinimum, "minimum",
                [](double x, double y) { return x <= y ? x : y; });
}

Var scale(Var a, double factor) {
  return unary(a, OpKind::kScale, [factor](double x) { return factor * x; }, factor);
}

Var add_scalar(Var a, double offset) {
  return unary(a, OpKind::kAddScalar, [offset](double x) { return x + offset; }, offset);
}

Var tanh(Var a) {
  return unary(a, OpKind::kTanh, [](double x) { return std::tanh(x); });
}

Var exp(Var a) {
  return unary(a, OpKind::kExp, [](double x) { return std::exp(x); });
}

Var square(Var a) {
  return unary(a, OpKind::kSquare, [](double x) { return x * x; });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ConfigError("clamp: lower bound exceeds upper bound");
  return unary(
      a, OpKind::kClamp, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); }, lo, hi);
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  return tape_of(a).record(OpKind::kSum, {a}, Tensor::scalar(total));
}

Var mean(Var a) {
  const Tensor& av = a.value();
  if (av.empty()) throw UsageError("mean of an empty tensor");
  double total = 0.0;
  for (double x : av.data()) total += x;
  return tape_of(a).record(OpKind::kMean, {a}, Tensor::scalar(total / static_cast<double>(av.size())));
}

Var gaussian_log_prob(Var mean_v, Var log_std, Var actions) {
  require_same_tape(mean_v, log_std);
  require_same_tape(mean_v, actions);
  const Tensor& mu = mean_v.value();
  const Tensor& ls = log_std.value();
  const Tensor& x = actions.value();
  require_matrix(mu, "gaussian_log_prob");
  require_same_shape(mu, x, "gaussian_log_prob");
  if (ls.rows() != 1 || ls.cols() != mu.cols()) {
    throw ConfigError("gaussian_log_prob: log_std shape " + ls.shape_string() +
                      " incompatible with mean " + mu.shape_string());
  }
  const std::size_t n = mu.rows(), d = mu.cols();
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = gaussian_log_density(mu.data().subspan(i * d, d), ls.data(), x.data().subspan(i * d, d));
  }
  return tape_of(mean_v).record(OpKind::kGaussianLogProb, {mean_v, log_std, actions},
                                std::move(out));
}

}  // namespace meher::diff
