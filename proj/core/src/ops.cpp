#include "smpler/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smpler/errors.hpp"

namespace smpler {

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

template <typename F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

// Elementwise unary op with derivative df(x, y).
template <typename F, typename DF>
Var unary(const Var& a, const char* name, F f, DF df) {
  return make_op(map_values(a.value(), f), name, {a}, [df](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = self.grad[i] * df(x[i], self.value[i]);
    self.inputs[0]->accumulate(g);
  });
}

// Accumulates a * b^T (r x c) when `a` is r x k and `b` is c x k.
Tensor matmul_nt_values(const Tensor& a, const Tensor& b, double s) {
  Tensor bt = transpose_values(b);
  Tensor out = matmul_values(a, bt);
  if (s != 1.0) {
    for (auto& v : out.values()) v *= s;
  }
  return out;
}

}  // namespace

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose_values(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  return out;
}

Tensor softmax_rows_values(const Tensor& a) {
  require_finite(a, "softmax_rows input");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < m; ++i) {
    auto in = a.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      s += o[j];
    }
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < n; ++j) o[j] *= inv;
  }
  return out;
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_op(std::move(out), "add", {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) self.inputs[1]->accumulate(self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op(std::move(out), "sub", {a, b}, [](Node& self) {
    if (wants(self, 0)) self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor g = self.grad;
      for (auto& v : g.values()) v = -v;
      self.inputs[1]->accumulate(g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op(std::move(out), "mul", {a, b}, [](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    const Tensor& y = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(x.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * y[i];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(y.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] * x[i];
      self.inputs[1]->accumulate(g);
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same(a, b, "div");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return make_op(std::move(out), "div", {a, b}, [](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    const Tensor& y = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(x.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = self.grad[i] / y[i];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(y.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = -self.grad[i] * x[i] / (y[i] * y[i]);
      self.inputs[1]->accumulate(g);
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var add_row(const Var& a, const Var& row) {
  const std::size_t m = a.rows(), n = a.cols();
  if (row.value().size() != n) {
    throw ShapeError("add_row: " + shape_string(a.shape()) + " + " + shape_string(row.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += row.value()[j];
  return make_op(std::move(out), "add_row", {a, row}, [m, n](Node& self) {
    if (wants(self, 0)) self.inputs[0]->accumulate(self.grad);
    if (wants(self, 1)) {
      Tensor g(self.inputs[1]->value.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad(i, j);
      self.inputs[1]->accumulate(g);
    }
  });
}

Var mul_col(const Var& a, const Var& col) {
  const std::size_t m = a.rows(), n = a.cols();
  if (col.value().size() != m) {
    throw ShapeError("mul_col: " + shape_string(a.shape()) + " * " + shape_string(col.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) *= col.value()[i];
  return make_op(std::move(out), "mul_col", {a, col}, [m, n](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    const Tensor& c = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g(x.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = self.grad(i, j) * c[i];
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g(c.shape());
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad(i, j) * x(i, j);
      self.inputs[1]->accumulate(g);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul_values(a.value(), b.value());
  count_flops(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  return make_op(std::move(out), "matmul", {a, b}, [](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    const Tensor& y = self.inputs[1]->value;
    if (wants(self, 0)) self.inputs[0]->accumulate(matmul_nt_values(self.grad, y, 1.0));
    if (wants(self, 1)) self.inputs[1]->accumulate(matmul_values(transpose_values(x), self.grad));
  });
}

Var matmul_nt(const Var& a, const Var& b, double s) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  }
  Tensor out = matmul_nt_values(a.value(), b.value(), s);
  count_flops(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.rows());
  return make_op(std::move(out), "matmul_nt", {a, b}, [s](Node& self) {
    const Tensor& x = self.inputs[0]->value;
    const Tensor& y = self.inputs[1]->value;
    if (wants(self, 0)) {
      Tensor g = matmul_values(self.grad, y);
      for (auto& v : g.values()) v *= s;
      self.inputs[0]->accumulate(g);
    }
    if (wants(self, 1)) {
      Tensor g = matmul_values(transpose_values(self.grad), x);
      for (auto& v : g.values()) v *= s;
      self.inputs[1]->accumulate(g);
    }
  });
}

Var transpose(const Var& a) {
  return make_op(transpose_values(a.value()), "transpose", {a}, [](Node& self) {
    self.inputs[0]->accumulate(transpose_values(self.grad));
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_op(std::move(out), "reshape", {a}, [](Node& self) {
    self.inputs[0]->accumulate(self.grad);
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t n = a.cols();
  if (begin > end || end > a.rows()) throw ShapeError("slice_rows out of range");
  Tensor out({end - begin, n});
  std::copy(a.value().data() + begin * n, a.value().data() + end * n, out.data());
  return make_op(std::move(out), "slice_rows", {a}, [begin, n](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    std::copy(self.grad.data(), self.grad.data() + self.grad.size(), g.data() + begin * n);
    self.inputs[0]->accumulate(g);
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows();
  if (begin > end || end > a.cols()) throw ShapeError("slice_cols out of range");
  const std::size_t w = end - begin;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = a.value()(i, begin + j);
  return make_op(std::move(out), "slice_cols", {a}, [m, w, begin](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g(i, begin + j) = self.grad(i, j);
    self.inputs[0]->accumulate(g);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n && p.value().size() != 0) throw ShapeError("concat_rows: column mismatch");
    m += p.rows();
  }
  Tensor out({m, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return make_op(std::move(out), "concat_rows", parts, [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      const std::size_t sz = in->value.size();
      if (in->requires_grad) {
        Tensor g(in->value.shape());
        std::copy(self.grad.data() + off, self.grad.data() + off + sz, g.data());
        in->accumulate(g);
      }
      off += sz;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw ShapeError("concat_cols: row mismatch");
    n += p.cols();
  }
  Tensor out({m, n});
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out(i, c0 + j) = p.value()(i, j);
    c0 += w;
  }
  return make_op(std::move(out), "concat_cols", parts, [m](Node& self) {
    std::size_t c0 = 0;
    for (auto& in : self.inputs) {
      const std::size_t w = in->value.cols();
      if (in->requires_grad) {
        Tensor g(in->value.shape());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < w; ++j) g(i, j) = self.grad(i, c0 + j);
        in->accumulate(g);
      }
      c0 += w;
    }
  });
}

Var row_sum(const Var& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out({m, 1});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a.value()(i, j);
  return make_op(std::move(out), "row_sum", {a}, [m, n](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = self.grad[i];
    self.inputs[0]->accumulate(g);
  });
}

Var mean_rows(const Var& a) {
  const std::size_t m = a.rows(), n = a.cols();
  if (m == 0) throw ShapeError("mean_rows of empty tensor");
  Tensor out({1, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value()(i, j);
  for (auto& v : out.values()) v /= static_cast<double>(m);
  return make_op(std::move(out), "mean_rows", {a}, [m, n](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g(i, j) = self.grad[j] * inv;
    self.inputs[0]->accumulate(g);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor({1, 1}, s), "sum", {a}, [](Node& self) {
    self.inputs[0]->accumulate(Tensor(self.inputs[0]->value.shape(), self.grad[0]));
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor({1, 1}, s / static_cast<double>(n)), "mean", {a}, [n](Node& self) {
    self.inputs[0]->accumulate(Tensor(self.inputs[0]->value.shape(), self.grad[0] / static_cast<double>(n)));
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = softmax_rows_values(a.value());
  count_flops(8ULL * a.value().size());
  return make_op(std::move(out), "softmax_rows", {a}, [](Node& self) {
    const Tensor& y = self.value;
    const std::size_t m = y.rows(), n = y.cols();
    Tensor g(y.shape());
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < n; ++j) g(i, j) = y(i, j) * (self.grad(i, j) - dot);
    }
    self.inputs[0]->accumulate(g);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw ShapeError("layer_norm: gain/bias length must equal row width " + std::to_string(n));
  }
  Tensor normed(x.shape());
  Tensor inv_std({m, 1});
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x.value()(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = x.value()(i, j) - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      normed(i, j) = (x.value()(i, j) - mu) * is;
      out(i, j) = gain.value()[j] * normed(i, j) + bias.value()[j];
    }
  }
  return make_op(std::move(out), "layer_norm", {x, gain, bias},
                 [normed = std::move(normed), inv_std = std::move(inv_std), m, n](Node& self) {
                   const Tensor& g = self.inputs[1]->value;
                   if (wants(self, 1) || wants(self, 2)) {
                     Tensor dg(g.shape()), db(g.shape());
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j) {
                         dg[j] += self.grad(i, j) * normed(i, j);
                         db[j] += self.grad(i, j);
                       }
                     if (wants(self, 1)) self.inputs[1]->accumulate(dg);
                     if (wants(self, 2)) self.inputs[2]->accumulate(db);
                   }
                   if (wants(self, 0)) {
                     Tensor dx(self.value.shape());
                     const double inv_n = 1.0 / static_cast<double>(n);
                     for (std::size_t i = 0; i < m; ++i) {
                       double s1 = 0.0, s2 = 0.0;
                       for (std::size_t j = 0; j < n; ++j) {
                         const double dh = self.grad(i, j) * g[j];
                         s1 += dh;
                         s2 += dh * normed(i, j);
                       }
                       for (std::size_t j = 0; j < n; ++j) {
                         const double dh = self.grad(i, j) * g[j];
                         dx(i, j) = inv_std[i] * (dh - s1 * inv_n - normed(i, j) * s2 * inv_n);
                       }
                     }
                     self.inputs[0]->accumulate(dx);
                   }
                 });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      a, "gelu", [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [kInvSqrt2Pi](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var softplus(const Var& a) {
  return unary(
      a, "softplus", [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var tanh(const Var& a) {
  return unary(
      a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sqrt(const Var& a) {
  for (double v : a.value().values()) {
    if (v < 0.0) throw NumericDomainError("sqrt of negative value");
  }
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(const Var& a) {
  return unary(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary(
      a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var mat3_mul_rows(const Var& a, const Var& b) {
  if (a.cols() != 9 || b.cols() != 9 || a.rows() != b.rows()) {
    throw ShapeError("mat3_mul_rows: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t n = a.rows();
  Tensor out({n, 9});
  for (std::size_t r = 0; r < n; ++r) {
    const double* x = a.value().data() + 9 * r;
    const double* y = b.value().data() + 9 * r;
    double* o = out.data() + 9 * r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        o[3 * i + j] = x[3 * i] * y[j] + x[3 * i + 1] * y[3 + j] + x[3 * i + 2] * y[6 + j];
  }
  return make_op(std::move(out), "mat3_mul_rows", {a, b}, [n](Node& self) {
    const Tensor& xa = self.inputs[0]->value;
    const Tensor& yb = self.inputs[1]->value;
    Tensor ga(xa.shape()), gb(yb.shape());
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = xa.data() + 9 * r;
      const double* y = yb.data() + 9 * r;
      const double* g = self.grad.data() + 9 * r;
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
          double sa = 0.0, sb = 0.0;
          for (int j = 0; j < 3; ++j) {
            sa += g[3 * i + j] * y[3 * k + j];  // (G Y^T)_{ik}
            sb += x[3 * j + i] * g[3 * j + k];  // (X^T G)_{ik}
          }
          ga[9 * r + 3 * i + k] = sa;
          gb[9 * r + 3 * i + k] = sb;
        }
    }
    if (wants(self, 0)) self.inputs[0]->accumulate(ga);
    if (wants(self, 1)) self.inputs[1]->accumulate(gb);
  });
}

Var affine_rows(const Var& t, const Var& v) {
  if (t.cols() != 12 || v.cols() != 3 || t.rows() != v.rows()) {
    throw ShapeError("affine_rows: " + shape_string(t.shape()) + " with " + shape_string(v.shape()));
  }
  const std::size_t n = t.rows();
  Tensor out({n, 3});
  for (std::size_t r = 0; r < n; ++r) {
    const double* m = t.value().data() + 12 * r;
    const double* p = v.value().data() + 3 * r;
    for (int i = 0; i < 3; ++i) out(r, i) = m[3 * i] * p[0] + m[3 * i + 1] * p[1] + m[3 * i + 2] * p[2] + m[9 + i];
  }
  return make_op(std::move(out), "affine_rows", {t, v}, [n](Node& self) {
    const Tensor& tv = self.inputs[0]->value;
    const Tensor& pv = self.inputs[1]->value;
    Tensor gt(tv.shape()), gv(pv.shape());
    for (std::size_t r = 0; r < n; ++r) {
      const double* m = tv.data() + 12 * r;
      const double* p = pv.data() + 3 * r;
      const double* g = self.grad.data() + 3 * r;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          gt[12 * r + 3 * i + j] = g[i] * p[j];
          gv[3 * r + j] += m[3 * i + j] * g[i];
        }
        gt[12 * r + 9 + i] = g[i];
      }
    }
    if (wants(self, 0)) self.inputs[0]->accumulate(gt);
    if (wants(self, 1)) self.inputs[1]->accumulate(gv);
  });
}

Tensor avg_pool2d_values(const Tensor& grid, std::size_t h, std::size_t w, std::size_t stride) {
  if (stride == 0 || h % stride != 0 || w % stride != 0) {
    throw ShapeError("avg_pool2d: grid " + std::to_string(h) + "x" + std::to_string(w) +
                     " not divisible by stride " + std::to_string(stride));
  }
  if (grid.rows() != h * w) throw ShapeError("avg_pool2d: token count does not match grid");
  const std::size_t d = grid.cols(), oh = h / stride, ow = w / stride;
  Tensor out({oh * ow, d});
  const double inv = 1.0 / static_cast<double>(stride * stride);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      auto o = out.row(oy * ow + ox);
      for (std::size_t dy = 0; dy < stride; ++dy)
        for (std::size_t dx = 0; dx < stride; ++dx) {
          auto in = grid.row((oy * stride + dy) * w + ox * stride + dx);
          for (std::size_t c = 0; c < d; ++c) o[c] += in[c];
        }
      for (auto& v : o) v *= inv;
    }
  return out;
}

Var avg_pool2d(const Var& grid, std::size_t h, std::size_t w, std::size_t stride) {
  Tensor out = avg_pool2d_values(grid.value(), h, w, stride);
  return make_op(std::move(out), "avg_pool2d", {grid}, [h, w, stride](Node& self) {
    const std::size_t d = self.value.cols(), ow = w / stride, oh = h / stride;
    const double inv = 1.0 / static_cast<double>(stride * stride);
    Tensor g(self.inputs[0]->value.shape());
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        auto go = self.grad.row(oy * ow + ox);
        for (std::size_t dy = 0; dy < stride; ++dy)
          for (std::size_t dx = 0; dx < stride; ++dx) {
            auto gi = g.row((oy * stride + dy) * w + ox * stride + dx);
            for (std::size_t c = 0; c < d; ++c) gi[c] += go[c] * inv;
          }
      }
    self.inputs[0]->accumulate(g);
  });
}

namespace {

struct BilinearTaps {
  std::size_t idx[4];
  double weight[4];
};

BilinearTaps bilinear_taps(std::size_t h, std::size_t w, GridPoint p) {
  const double r = std::clamp(p.row, 0.0, static_cast<double>(h - 1));
  const double c = std::clamp(p.col, 0.0, static_cast<double>(w - 1));
  const std::size_t r0 = static_cast<std::size_t>(std::floor(r));
  const std::size_t c0 = static_cast<std::size_t>(std::floor(c));
  const std::size_t r1 = std::min(r0 + 1, h - 1);
  const std::size_t c1 = std::min(c0 + 1, w - 1);
  const double fr = r - static_cast<double>(r0);
  const double fc = c - static_cast<double>(c0);
  return {{r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1},
          {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc}};
}

}  // namespace

std::vector<double> bilinear_sample_values(const Tensor& grid, std::size_t h, std::size_t w, GridPoint p) {
  if (grid.rows() != h * w || h == 0 || w == 0) throw ShapeError("bilinear_sample: grid shape mismatch");
  if (!std::isfinite(p.row) || !std::isfinite(p.col)) throw NumericDomainError("bilinear_sample: non-finite point");
  const BilinearTaps t = bilinear_taps(h, w, p);
  std::vector<double> out(grid.cols(), 0.0);
  for (int k = 0; k < 4; ++k) {
    if (t.weight[k] == 0.0) continue;
    auto in = grid.row(t.idx[k]);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += t.weight[k] * in[c];
  }
  return out;
}

Var bilinear_sample(const Var& grid, std::size_t h, std::size_t w, std::span<const GridPoint> points) {
  const std::size_t d = grid.cols();
  Tensor out({points.size(), d});
  std::vector<BilinearTaps> taps;
  taps.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto v = bilinear_sample_values(grid.value(), h, w, points[i]);
    std::copy(v.begin(), v.end(), out.row(i).begin());
    taps.push_back(bilinear_taps(h, w, points[i]));
  }
  return make_op(std::move(out), "bilinear_sample", {grid}, [taps = std::move(taps), d](Node& self) {
    Tensor g(self.inputs[0]->value.shape());
    for (std::size_t i = 0; i < taps.size(); ++i) {
      auto go = self.grad.row(i);
      for (int k = 0; k < 4; ++k) {
        if (taps[i].weight[k] == 0.0) continue;
        auto gi = g.row(taps[i].idx[k]);
        for (std::size_t c = 0; c < d; ++c) gi[c] += taps[i].weight[k] * go[c];
      }
    }
    self.inputs[0]->accumulate(g);
  });
}

}  // namespace smpler
