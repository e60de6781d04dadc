#include "cnre/tape.hpp"

#include <cmath>
#include <string>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

Var Tape::push(Matrix value, std::string_view op, BackwardFn fn) {
  require_finite(value, op);
  Node n;
  n.value = std::move(value);
  if (record_) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw InvalidArgument("Tape: invalid Var");
  return nodes_[v.id];
}

Matrix& Tape::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Matrix& dst = grad_ref(v);
  auto out = dst.values();
  const auto in = g.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += in[k];
}

Var Tape::constant(Matrix value) { return push(std::move(value), "constant", nullptr); }

Var Tape::parameter(ParameterSlot& slot) {
  Var v = push(slot.value, slot.name, nullptr);
  nodes_[v.id].slot = &slot;
  return v;
}

Var Tape::parameter(ParameterStore& store, std::string_view name) {
  return parameter(store.slot(name));
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.empty() ? Matrix(n.value.rows(), n.value.cols()) : n.grad;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  require_shape(m.rows() == 1 && m.cols() == 1, "Tape::scalar: value is not 1x1");
  return m(0, 0);
}

Var Tape::add(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require_shape(x.same_shape(y), "add: shapes differ");
  Matrix out = x;
  auto o = out.values();
  const auto yv = y.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] += yv[k];
  return push(std::move(out), "add", [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require_shape(x.same_shape(y), "sub: shapes differ");
  Matrix out = x;
  auto o = out.values();
  const auto yv = y.values();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] -= yv[k];
  return push(std::move(out), "sub", [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    Matrix neg = g;
    for (auto& x : neg.values()) x = -x;
    t.accumulate(b, neg);
  });
}

Var Tape::add_row_bias(Var x, Var bias) {
  const Matrix& m = value(x);
  const Matrix& b = value(bias);
  require_shape(b.rows() == 1 && b.cols() == m.cols(), "add_row_bias: bias must be 1 x cols");
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b(0, c);
  }
  return push(std::move(out), "add_row_bias", [x, bias](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    Matrix gb(1, g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
    t.accumulate(bias, gb);
  });
}

Var Tape::scale(Var x, double factor) {
  Matrix out = value(x);
  for (auto& v : out.values()) v *= factor;
  return push(std::move(out), "scale", [x, factor](Tape& t, const Matrix& g) {
    Matrix gx = g;
    for (auto& v : gx.values()) v *= factor;
    t.accumulate(x, gx);
  });
}

Var Tape::div_scalar(Var x, Var s, double eps) {
  const Matrix& sv = value(s);
  require_shape(sv.rows() == 1 && sv.cols() == 1, "div_scalar: divisor must be 1x1");
  const double denom = sv(0, 0) + eps;
  Matrix out = value(x);
  for (auto& v : out.values()) v /= denom;
  return push(std::move(out), "div_scalar", [x, s, denom](Tape& t, const Matrix& g) {
    Matrix gx = g;
    for (auto& v : gx.values()) v /= denom;
    const auto xv = t.value(x).values();
    const auto gv = g.values();
    double acc = 0.0;
    for (std::size_t k = 0; k < gv.size(); ++k) acc += gv[k] * xv[k];
    t.accumulate(x, gx);
    t.accumulate(s, Matrix(1, 1, -acc / (denom * denom)));
  });
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = kernels::matmul(value(a), value(b));
  return push(std::move(out), "matmul", [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, kernels::matmul_nt(g, t.value(b)));
    t.accumulate(b, kernels::matmul_tn(t.value(a), g));
  });
}

Var Tape::matmul_tn(Var a, Var b) {
  Matrix out = kernels::matmul_tn(value(a), value(b));
  return push(std::move(out), "matmul_tn", [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, kernels::matmul_nt(t.value(b), g));
    t.accumulate(b, kernels::matmul(t.value(a), g));
  });
}

Var Tape::spmm(const SparseMatrix& s, const SparseMatrix& s_transpose, Var d) {
  require_shape(s_transpose.rows() == s.cols() && s_transpose.cols() == s.rows(),
                "spmm: transpose operand has wrong shape");
  Matrix out = kernels::spmm(s, value(d));
  const SparseMatrix* st = &s_transpose;
  return push(std::move(out), "spmm", [d, st](Tape& t, const Matrix& g) {
    t.accumulate(d, kernels::spmm(*st, g));
  });
}

Var Tape::relu(Var x) {
  Matrix out = value(x);
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), "relu", [x](Tape& t, const Matrix& g) {
    const auto in = t.value(x).values();
    Matrix gx = g;
    auto o = gx.values();
    for (std::size_t k = 0; k < o.size(); ++k) {
      if (!(in[k] > 0.0)) o[k] = 0.0;
    }
    t.accumulate(x, gx);
  });
}

Var Tape::sigmoid(Var x) {
  Matrix out = value(x);
  for (auto& v : out.values()) v = stable_sigmoid(v);
  const Var y{static_cast<std::uint32_t>(nodes_.size())};
  return push(std::move(out), "sigmoid", [x, y](Tape& t, const Matrix& g) {
    const auto s = t.value(y).values();
    Matrix gx = g;
    auto o = gx.values();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] *= s[k] * (1.0 - s[k]);
    t.accumulate(x, gx);
  });
}

Var Tape::log_sigmoid(Var x) {
  Matrix out = value(x);
  for (auto& v : out.values()) v = stable_log_sigmoid(v);
  return push(std::move(out), "log_sigmoid", [x](Tape& t, const Matrix& g) {
    const auto in = t.value(x).values();
    Matrix gx = g;
    auto o = gx.values();
    // d/dx log σ(x) = σ(-x)
    for (std::size_t k = 0; k < o.size(); ++k) o[k] *= stable_sigmoid(-in[k]);
    t.accumulate(x, gx);
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  require_shape(!parts.empty(), "concat_cols: no operands");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  for (const Var p : parts) {
    require_shape(value(p).rows() == rows, "concat_cols: row counts differ");
    cols += value(p).cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var p : parts) {
    const Matrix& m = value(p);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, offset + c) = m(r, c);
    }
    offset += m.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), "concat_cols", [inputs](Tape& t, const Matrix& g) {
    std::size_t off = 0;
    for (const Var p : inputs) {
      const std::size_t w = t.value(p).cols();
      Matrix gp(g.rows(), w);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < w; ++c) gp(r, c) = g(r, off + c);
      }
      t.accumulate(p, gp);
      off += w;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  require_shape(!parts.empty(), "concat_rows: no operands");
  const std::size_t cols = value(parts[0]).cols();
  std::vector<double> data;
  std::size_t rows = 0;
  for (const Var p : parts) {
    const Matrix& m = value(p);
    require_shape(m.cols() == cols, "concat_rows: column counts differ");
    data.insert(data.end(), m.values().begin(), m.values().end());
    rows += m.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(Matrix(rows, cols, std::move(data)), "concat_rows",
              [inputs](Tape& t, const Matrix& g) {
                std::size_t off = 0;
                for (const Var p : inputs) {
                  const std::size_t n = t.value(p).rows();
                  const auto begin = g.values().begin() + static_cast<std::ptrdiff_t>(off * g.cols());
                  t.accumulate(p, Matrix(n, g.cols(),
                                         std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(n * g.cols()))));
                  off += n;
                }
              });
}

Var Tape::gather_rows(Var x, std::vector<std::uint32_t> rows) {
  const Matrix& m = value(x);
  Matrix out(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require_shape(rows[r] < m.rows(), "gather_rows: index out of range");
    const auto src = m.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return push(std::move(out), "gather_rows", [x, rows = std::move(rows)](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_ref(x);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto dst = gx.row(rows[r]);
      const auto src = g.row(r);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var Tape::gather_mean_rows(Var x, std::vector<std::vector<std::uint32_t>> groups) {
  const Matrix& m = value(x);
  Matrix out(groups.size(), m.cols());
  for (std::size_t r = 0; r < groups.size(); ++r) {
    if (groups[r].empty()) continue;
    auto dst = out.row(r);
    for (const auto id : groups[r]) {
      require_shape(id < m.rows(), "gather_mean_rows: index out of range");
      const auto src = m.row(id);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(groups[r].size());
    for (auto& v : dst) v *= inv;
  }
  return push(std::move(out), "gather_mean_rows",
              [x, groups = std::move(groups)](Tape& t, const Matrix& g) {
                Matrix& gx = t.grad_ref(x);
                for (std::size_t r = 0; r < groups.size(); ++r) {
                  if (groups[r].empty()) continue;
                  const double inv = 1.0 / static_cast<double>(groups[r].size());
                  const auto src = g.row(r);
                  for (const auto id : groups[r]) {
                    auto dst = gx.row(id);
                    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += inv * src[c];
                  }
                }
              });
}

Var Tape::rowwise_dot(Var a, Var b) {
  const Matrix& x = value(a);
  const Matrix& y = value(b);
  require_shape(x.same_shape(y), "rowwise_dot: shapes differ");
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) out(r, 0) = kernels::dot(x.row(r), y.row(r));
  return push(std::move(out), "rowwise_dot", [a, b](Tape& t, const Matrix& g) {
    const Matrix& xa = t.value(a);
    const Matrix& xb = t.value(b);
    Matrix ga(xa.rows(), xa.cols());
    Matrix gb(xb.rows(), xb.cols());
    for (std::size_t r = 0; r < xa.rows(); ++r) {
      for (std::size_t c = 0; c < xa.cols(); ++c) {
        ga(r, c) = g(r, 0) * xb(r, c);
        gb(r, c) = g(r, 0) * xa(r, c);
      }
    }
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

Var Tape::row_project(Var col, Var sem, double eps) {
  Matrix out = kernels::row_project(value(col), value(sem), eps);
  return push(std::move(out), "row_project", [col, sem, eps](Tape& t, const Matrix& g) {
    // Per row, with a = col, s = sem, n = a·a + eps, c = (a·s)/n, y = c·a:
    //   dL/da = c·g + (g·a)·(s − 2c·a)/n,   dL/ds = (g·a)·a/n
    const Matrix& a = t.value(col);
    const Matrix& s = t.value(sem);
    Matrix ga(a.rows(), a.cols());
    Matrix gs(s.rows(), s.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const auto ar = a.row(r);
      const auto sr = s.row(r);
      const auto gr = g.row(r);
      const double n = kernels::dot(ar, ar) + eps;
      if (!(n > 0.0)) continue;
      const double c = kernels::dot(ar, sr) / n;
      const double ga_dot = kernels::dot(gr, ar);
      for (std::size_t k = 0; k < ar.size(); ++k) {
        ga(r, k) = c * gr[k] + ga_dot * (sr[k] - 2.0 * c * ar[k]) / n;
        gs(r, k) = ga_dot * ar[k] / n;
      }
    }
    t.accumulate(col, ga);
    t.accumulate(sem, gs);
  });
}

Var Tape::sum(Var x) {
  double acc = 0.0;
  for (const double v : value(x).values()) acc += v;
  return push(Matrix(1, 1, acc), "sum", [x](Tape& t, const Matrix& g) {
    const Matrix& m = t.value(x);
    t.accumulate(x, Matrix(m.rows(), m.cols(), g(0, 0)));
  });
}

Var Tape::l2_norm_sq(Var x) {
  double acc = 0.0;
  for (const double v : value(x).values()) acc += v * v;
  return push(Matrix(1, 1, acc), "l2_norm_sq", [x](Tape& t, const Matrix& g) {
    Matrix gx = t.value(x);
    for (auto& v : gx.values()) v *= 2.0 * g(0, 0);
    t.accumulate(x, gx);
  });
}

void Tape::backward(Var root) {
  if (!record_) throw InvalidArgument("Tape::backward on a non-recording tape");
  const Matrix& r = value(root);
  require_shape(r.rows() == 1 && r.cols() == 1, "Tape::backward: root must be 1x1");
  for (auto& n : nodes_) n.grad = Matrix();
  grad_ref(root)(0, 0) = 1.0;
  for (std::size_t k = root.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // The closure only touches grads of earlier nodes, so this reference
      // stays valid.
      n.backward(*this, n.grad);
    }
    if (n.slot != nullptr) {
      auto dst = n.slot->grad.values();
      const auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

}  // namespace cnre
