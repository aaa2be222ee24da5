#pragma once

// Reverse-mode differentiation over dense row-major double matrices.
//
// A Tape records one forward evaluation. Every op is batched over rows so a
// whole graph layer or a whole pair batch is one tape node. Tapes are meant
// to live for a single optimisation step.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace graphmore {

class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw UsageError("Matrix: value count does not match shape");
  }

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix column(std::vector<double> v) {
    const auto n = v.size();
    return Matrix(n, 1, std::move(v));
  }
  static Matrix row(std::vector<double> v) {
    const auto n = v.size();
    return Matrix(1, n, std::move(v));
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row_span(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row_span(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  double item() const {
    if (size() != 1) throw UsageError("Matrix::item on non-scalar");
    return data[0];
  }
};

enum class ParamKind { weight, bias, curvature };

/// A named trainable array. Tapes reference parameters by pointer, so a
/// Parameter must outlive every tape that reads it.
struct Parameter {
  std::string name;
  Matrix value;
  ParamKind kind = ParamKind::weight;
  bool trainable = true;
  /// Box constraint re-applied after every optimiser step.
  double lower = -INFINITY;
  double upper = INFINITY;
};

using GradientMap = std::map<std::string, Matrix>;

/// Row-indexed sets, CSR layout: set i is indices[offsets[i] .. offsets[i+1]).
struct RowSets {
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;

  std::size_t count() const { return offsets.size() - 1; }
  std::span<const std::size_t> set(std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  void push(std::span<const std::size_t> members) {
    indices.insert(indices.end(), members.begin(), members.end());
    offsets.push_back(indices.size());
  }
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const { return value().item(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), {}, nullptr); }
  Var constant(double v) { return constant(Matrix::scalar(v)); }

  /// Leaf for a parameter. Frozen parameters enter the tape as constants and
  /// never appear in the gradient map.
  Var param(Parameter& p) {
    if (!p.trainable) return constant(p.value);
    return push(p.value, {}, &p);
  }

  Var push(Matrix value, BackwardFn backward, Parameter* param = nullptr) {
    nodes_.push_back(Node{std::move(value), Matrix{}, std::move(backward), param});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Runs reverse accumulation from a scalar root. Returns adjoints for every
  /// trainable parameter registered on this tape, summed over repeated use.
  GradientMap backward(Var root) {
    if (root.tape() != this) throw UsageError("backward: root belongs to another tape");
    const Matrix& rv = nodes_[root.id()].value;
    if (rv.size() != 1) throw UsageError("backward: root must be a scalar");
    for (auto& n : nodes_) n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
    nodes_[root.id()].grad.data[0] = 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
    GradientMap out;
    for (auto& n : nodes_) {
      if (!n.param) continue;
      auto [it, inserted] = out.try_emplace(n.param->name, n.grad);
      if (!inserted) {
        for (std::size_t k = 0; k < n.grad.size(); ++k) it->second.data[k] += n.grad.data[k];
      }
    }
    return out;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }

namespace ad {

namespace detail {

inline void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape()) throw UsageError(std::string(op) + ": operands on different tapes");
}

inline void require_shape(bool ok, const char* op, const char* what) {
  if (!ok) throw UsageError(std::string(op) + ": " + what);
}

inline void accumulate(Tape& t, std::size_t id, const Matrix& g) {
  auto& dst = t.grad_mut(id);
  for (std::size_t k = 0; k < g.size(); ++k) dst.data[k] += g.data[k];
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class F, class D>
Var unary(const Var& a, F f, D dfdx) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix y(x.rows, x.cols);
  for (std::size_t k = 0; k < x.size(); ++k) y.data[k] = f(x.data[k]);
  const std::size_t ia = a.id();
  return t.push(std::move(y), [ia, dfdx](Tape& tp, std::size_t self) {
    const Matrix& xv = tp.value(ia);
    const Matrix& yv = tp.value(self);
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * dfdx(xv.data[k], yv.data[k]);
  });
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "add");
  detail::require_shape(a.value().same_shape(b.value()), "add", "shape mismatch");
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data[k] += b.value().data[k];
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    detail::accumulate(tp, ia, tp.grad(self));
    detail::accumulate(tp, ib, tp.grad(self));
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_shape(a.value().same_shape(b.value()), "sub", "shape mismatch");
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data[k] -= b.value().data[k];
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    detail::accumulate(tp, ia, g);
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k];
  });
}

inline Var scale(const Var& a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var add_const(const Var& a, double c) {
  return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Var mul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "mul");
  detail::require_shape(a.value().same_shape(b.value()), "mul", "shape mismatch");
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y.data[k] *= b.value().data[k];
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& av = tp.value(ia);
    const Matrix& bv = tp.value(ib);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * bv.data[k];
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * av.data[k];
  });
}

inline Var div(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "div");
  detail::require_shape(a.value().same_shape(b.value()), "div", "shape mismatch");
  Tape& t = *a.tape();
  Matrix y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double d = b.value().data[k];
    if (d == 0.0) throw NumericalDomainError("div: division by zero");
    y.data[k] /= d;
  }
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& bv = tp.value(ib);
    const Matrix& yv = tp.value(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] / bv.data[k];
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k] * yv.data[k] / bv.data[k];
  });
}

/// a (r x c) times per-row factor v (r x 1).
inline Var mul_col(const Var& a, const Var& v) {
  detail::require_same_tape(a, v, "mul_col");
  const Matrix& av = a.value();
  const Matrix& vv = v.value();
  detail::require_shape(vv.cols == 1 && vv.rows == av.rows, "mul_col", "factor must be rows x 1");
  Matrix y = av;
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) *= vv.data[r];
  const auto ia = a.id(), iv = v.id();
  return a.tape()->push(std::move(y), [ia, iv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& A = tp.value(ia);
    const Matrix& V = tp.value(iv);
    Matrix& ga = tp.grad_mut(ia);
    Matrix& gv = tp.grad_mut(iv);
    for (std::size_t r = 0; r < g.rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < g.cols; ++c) {
        ga(r, c) += g(r, c) * V.data[r];
        acc += g(r, c) * A(r, c);
      }
      gv.data[r] += acc;
    }
  });
}

/// a times a 1x1 node.
inline Var mul_scalar(const Var& a, const Var& s) {
  detail::require_same_tape(a, s, "mul_scalar");
  detail::require_shape(s.value().size() == 1, "mul_scalar", "factor must be 1x1");
  const double sv = s.item();
  Matrix y = a.value();
  for (auto& x : y.data) x *= sv;
  const auto ia = a.id(), is = s.id();
  return a.tape()->push(std::move(y), [ia, is](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& A = tp.value(ia);
    const double s0 = tp.value(is).data[0];
    Matrix& ga = tp.grad_mut(ia);
    double acc = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      ga.data[k] += g.data[k] * s0;
      acc += g.data[k] * A.data[k];
    }
    tp.grad_mut(is).data[0] += acc;
  });
}

/// a (r x c) plus a row vector b (1 x c) broadcast over rows.
inline Var add_row(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "add_row");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  detail::require_shape(bv.rows == 1 && bv.cols == av.cols, "add_row", "bias must be 1 x cols");
  Matrix y = av;
  for (std::size_t r = 0; r < y.rows; ++r)
    for (std::size_t c = 0; c < y.cols; ++c) y(r, c) += bv.data[c];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    detail::accumulate(tp, ia, g);
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += g(r, c);
  });
}

/// a plus a 1x1 node broadcast everywhere.
inline Var add_scalar(const Var& a, const Var& s) {
  detail::require_same_tape(a, s, "add_scalar");
  detail::require_shape(s.value().size() == 1, "add_scalar", "addend must be 1x1");
  Matrix y = a.value();
  for (auto& x : y.data) x += s.item();
  const auto ia = a.id(), is = s.id();
  return a.tape()->push(std::move(y), [ia, is](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    detail::accumulate(tp, ia, g);
    double acc = 0.0;
    for (double v : g.data) acc += v;
    tp.grad_mut(is).data[0] += acc;
  });
}

/// Row-wise inner product, result rows x 1.
inline Var dot_rows(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "dot_rows");
  detail::require_shape(a.value().same_shape(b.value()), "dot_rows", "shape mismatch");
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  Matrix y(A.rows, 1);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) acc += A(r, c) * B(r, c);
    y.data[r] = acc;
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    const Matrix& Bv = tp.value(ib);
    Matrix& ga = tp.grad_mut(ia);
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t r = 0; r < Av.rows; ++r)
      for (std::size_t c = 0; c < Av.cols; ++c) {
        ga(r, c) += g.data[r] * Bv(r, c);
        gb(r, c) += g.data[r] * Av(r, c);
      }
  });
}

/// Row-wise squared Euclidean norm, rows x 1.
inline Var sqnorm_rows(const Var& a) {
  const Matrix& A = a.value();
  Matrix y(A.rows, 1);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    for (double v : A.row_span(r)) acc += v * v;
    y.data[r] = acc;
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t r = 0; r < Av.rows; ++r)
      for (std::size_t c = 0; c < Av.cols; ++c) ga(r, c) += 2.0 * g.data[r] * Av(r, c);
  });
}

/// Row-wise Euclidean norm, rows x 1. The gradient at a zero row is taken as zero.
inline Var norm_rows(const Var& a) {
  const Matrix& A = a.value();
  Matrix y(A.rows, 1);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    for (double v : A.row_span(r)) acc += v * v;
    y.data[r] = std::sqrt(acc);
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    const Matrix& n = tp.value(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t r = 0; r < Av.rows; ++r) {
      if (n.data[r] == 0.0) continue;
      const double f = g.data[r] / n.data[r];
      for (std::size_t c = 0; c < Av.cols; ++c) ga(r, c) += f * Av(r, c);
    }
  });
}

/// Dense product (r x k)(k x c). Covers matrix-vector products as c = 1.
inline Var matmul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "matmul");
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  detail::require_shape(A.cols == B.rows, "matmul", "inner dimensions differ");
  Matrix y(A.rows, B.cols);
  for (std::size_t r = 0; r < A.rows; ++r)
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double av = A(r, k);
      if (av == 0.0) continue;
      for (std::size_t c = 0; c < B.cols; ++c) y(r, c) += av * B(k, c);
    }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->push(std::move(y), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    const Matrix& Bv = tp.value(ib);
    Matrix& ga = tp.grad_mut(ia);
    Matrix& gb = tp.grad_mut(ib);
    for (std::size_t r = 0; r < Av.rows; ++r)
      for (std::size_t k = 0; k < Av.cols; ++k) {
        double acc = 0.0;
        const double av = Av(r, k);
        for (std::size_t c = 0; c < Bv.cols; ++c) {
          acc += g(r, c) * Bv(k, c);
          gb(k, c) += av * g(r, c);
        }
        ga(r, k) += acc;
      }
  });
}

inline Var tan(const Var& a) {
  return detail::unary(a, [](double x) { return std::tan(x); }, [](double, double y) { return 1.0 + y * y; });
}

inline Var atan(const Var& a) {
  return detail::unary(a, [](double x) { return std::atan(x); }, [](double x, double) { return 1.0 / (1.0 + x * x); });
}

inline Var tanh(const Var& a) {
  return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var atanh(const Var& a) {
  for (double x : a.value().data)
    if (!(std::abs(x) < 1.0)) throw NumericalDomainError("atanh: argument magnitude must be < 1, got " + std::to_string(x));
  return detail::unary(a, [](double x) { return std::atanh(x); }, [](double x, double) { return 1.0 / (1.0 - x * x); });
}

inline Var exp(const Var& a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(const Var& a) {
  for (double x : a.value().data)
    if (!(x > 0.0)) throw NumericalDomainError("log: argument must be > 0, got " + std::to_string(x));
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

/// Square root; the derivative at exactly zero is taken as zero.
inline Var sqrt(const Var& a) {
  for (double x : a.value().data)
    if (!(x >= 0.0)) throw NumericalDomainError("sqrt: argument must be >= 0, got " + std::to_string(x));
  return detail::unary(a, [](double x) { return std::sqrt(x); },
                       [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

inline Var square(const Var& a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var reciprocal(const Var& a) {
  for (double x : a.value().data)
    if (x == 0.0) throw NumericalDomainError("reciprocal: division by zero");
  return detail::unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

inline Var relu(const Var& a) {
  return detail::unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var abs(const Var& a) {
  return detail::unary(a, [](double x) { return std::abs(x); },
                       [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

/// Elementwise min(x, bound); the gradient passes where the bound is inactive.
inline Var clamp_max(const Var& a, double bound) {
  return detail::unary(a, [bound](double x) { return std::min(x, bound); },
                       [bound](double x, double) { return x < bound ? 1.0 : 0.0; });
}

/// Elementwise max(x, bound).
inline Var clamp_min(const Var& a, double bound) {
  return detail::unary(a, [bound](double x) { return std::max(x, bound); },
                       [bound](double x, double) { return x > bound ? 1.0 : 0.0; });
}

/// Row-wise softmax with max subtraction.
inline Var softmax_rows(const Var& a) {
  const Matrix& A = a.value();
  Matrix y(A.rows, A.cols);
  for (std::size_t r = 0; r < A.rows; ++r) {
    auto in = A.row_span(r);
    auto out = y.row_span(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) z += (out[c] = std::exp(in[c] - mx));
    for (auto& v : out) v /= z;
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t r = 0; r < Y.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < Y.cols; ++c) s += g(r, c) * Y(r, c);
      for (std::size_t c = 0; c < Y.cols; ++c) ga(r, c) += Y(r, c) * (g(r, c) - s);
    }
  });
}

/// Output row i is the mean of the input rows in sets.set(i); empty sets give zero rows.
/// `sets` is referenced by the tape and must outlive it.
inline Var mean_rows(const Var& a, const RowSets& sets) {
  const Matrix& A = a.value();
  Matrix y(sets.count(), A.cols);
  for (std::size_t i = 0; i < sets.count(); ++i) {
    auto members = sets.set(i);
    if (members.empty()) continue;
    auto out = y.row_span(i);
    for (auto m : members) {
      detail::require_shape(m < A.rows, "mean_rows", "member index out of range");
      auto in = A.row_span(m);
      for (std::size_t c = 0; c < A.cols; ++c) out[c] += in[c];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (auto& v : out) v *= inv;
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, &sets](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < sets.count(); ++i) {
      auto members = sets.set(i);
      if (members.empty()) continue;
      const double inv = 1.0 / static_cast<double>(members.size());
      auto gi = g.row_span(i);
      for (auto m : members) {
        auto dst = ga.row_span(m);
        for (std::size_t c = 0; c < g.cols; ++c) dst[c] += gi[c] * inv;
      }
    }
  });
}

inline Var sum_all(const Var& a) {
  const Matrix& A = a.value();
  double acc = 0.0;
  for (double v : A.data) acc += v;
  const auto ia = a.id();
  return a.tape()->push(Matrix::scalar(acc), [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self).data[0];
    for (auto& v : tp.grad_mut(ia).data) v += g;
  });
}

inline Var mean_all(const Var& a) {
  if (a.value().size() == 0) throw UsageError("mean_all: empty input");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Column-wise concatenation of equal-row inputs.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p, "concat_cols");
    detail::require_shape(p.rows() == rows, "concat_cols", "row counts differ");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Matrix& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < P.cols; ++c) y(r, off + c) = P(r, c);
    off += P.cols;
    ids.push_back(p.id());
  }
  return parts.front().tape()->push(std::move(y), [ids](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    std::size_t offset = 0;
    for (auto id : ids) {
      Matrix& gp = tp.grad_mut(id);
      for (std::size_t r = 0; r < gp.rows; ++r)
        for (std::size_t c = 0; c < gp.cols; ++c) gp(r, c) += g(r, offset + c);
      offset += gp.cols;
    }
  });
}

/// Column k of a as a rows x 1 node.
inline Var select_col(const Var& a, std::size_t k) {
  const Matrix& A = a.value();
  detail::require_shape(k < A.cols, "select_col", "column out of range");
  Matrix y(A.rows, 1);
  for (std::size_t r = 0; r < A.rows; ++r) y.data[r] = A(r, k);
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, k](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t r = 0; r < g.rows; ++r) ga(r, k) += g.data[r];
  });
}

/// Logistic function 1 / (1 + exp(-x)), evaluated without overflow.
inline Var sigmoid(const Var& a) {
  return detail::unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  const Matrix& A = a.value();
  Matrix y(index.size(), A.cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::require_shape(index[i] < A.rows, "gather_rows", "index out of range");
    std::copy_n(A.row_span(index[i]).begin(), A.cols, y.row_span(i).begin());
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, index = std::move(index)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < index.size(); ++i) {
      auto dst = ga.row_span(index[i]);
      auto src = g.row_span(i);
      for (std::size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

/// For pairs (first[p], second[p]): squared Euclidean distance between those rows of a.
/// Result is P x 1. Fuses gather + difference + squared norm.
inline Var pair_sqdist(const Var& a, std::span<const std::size_t> first, std::span<const std::size_t> second) {
  detail::require_shape(first.size() == second.size(), "pair_sqdist", "index lists differ in length");
  const Matrix& A = a.value();
  Matrix y(first.size(), 1);
  for (std::size_t p = 0; p < first.size(); ++p) {
    detail::require_shape(first[p] < A.rows && second[p] < A.rows, "pair_sqdist", "index out of range");
    auto x = A.row_span(first[p]);
    auto z = A.row_span(second[p]);
    double acc = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) {
      const double d = x[c] - z[c];
      acc += d * d;
    }
    y.data[p] = acc;
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, first = std::vector<std::size_t>(first.begin(), first.end()),
                                       second = std::vector<std::size_t>(second.begin(), second.end())](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t p = 0; p < first.size(); ++p) {
      const double gp = 2.0 * g.data[p];
      if (gp == 0.0) continue;
      auto x = Av.row_span(first[p]);
      auto z = Av.row_span(second[p]);
      auto gx = ga.row_span(first[p]);
      auto gz = ga.row_span(second[p]);
      for (std::size_t c = 0; c < Av.cols; ++c) {
        const double d = gp * (x[c] - z[c]);
        gx[c] += d;
        gz[c] -= d;
      }
    }
  });
}

/// For pairs (first[p], second[p]): inner product of those rows of a, P x 1.
inline Var pair_dot(const Var& a, std::span<const std::size_t> first, std::span<const std::size_t> second) {
  detail::require_shape(first.size() == second.size(), "pair_dot", "index lists differ in length");
  const Matrix& A = a.value();
  Matrix y(first.size(), 1);
  for (std::size_t p = 0; p < first.size(); ++p) {
    detail::require_shape(first[p] < A.rows && second[p] < A.rows, "pair_dot", "index out of range");
    auto x = A.row_span(first[p]);
    auto z = A.row_span(second[p]);
    double acc = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) acc += x[c] * z[c];
    y.data[p] = acc;
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, first = std::vector<std::size_t>(first.begin(), first.end()),
                                       second = std::vector<std::size_t>(second.begin(), second.end())](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Av = tp.value(ia);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t p = 0; p < first.size(); ++p) {
      const double gp = g.data[p];
      if (gp == 0.0) continue;
      auto x = Av.row_span(first[p]);
      auto z = Av.row_span(second[p]);
      auto gx = ga.row_span(first[p]);
      auto gz = ga.row_span(second[p]);
      for (std::size_t c = 0; c < Av.cols; ++c) {
        gx[c] += gp * z[c];
        gz[c] += gp * x[c];
      }
    }
  });
}

/// Rescales rows whose norm exceeds max_norm back onto the sphere of that radius.
/// max_norm is treated as a constant.
inline Var clip_row_norm(const Var& a, double max_norm) {
  const Matrix& A = a.value();
  Matrix y = A;
  std::vector<double> factor(A.rows, 1.0);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double acc = 0.0;
    for (double v : A.row_span(r)) acc += v * v;
    const double n = std::sqrt(acc);
    if (n > max_norm) {
      factor[r] = max_norm / n;
      for (auto& v : y.row_span(r)) v *= factor[r];
    }
  }
  const auto ia = a.id();
  return a.tape()->push(std::move(y), [ia, factor = std::move(factor)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const Matrix& Y = tp.value(self);
    Matrix& ga = tp.grad_mut(ia);
    for (std::size_t r = 0; r < Y.rows; ++r) {
      if (factor[r] == 1.0) {
        for (std::size_t c = 0; c < Y.cols; ++c) ga(r, c) += g(r, c);
        continue;
      }
      // y = R x / |x|: dy/dx = (R/|x|)(I - u u^T), u = y / R.
      double radius2 = 0.0, gy = 0.0;
      for (std::size_t c = 0; c < Y.cols; ++c) {
        radius2 += Y(r, c) * Y(r, c);
        gy += g(r, c) * Y(r, c);
      }
      for (std::size_t c = 0; c < Y.cols; ++c)
        ga(r, c) += factor[r] * (g(r, c) - gy * Y(r, c) / radius2);
    }
  });
}

}  // namespace ad
}  // namespace graphmore
