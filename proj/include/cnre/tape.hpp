#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "cnre/matrix.hpp"
#include "cnre/params.hpp"

namespace cnre {

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::uint32_t>::max(); }
  friend bool operator==(Var, Var) = default;
};

/// Reverse-mode gradient tape over dense matrices.
///
/// Every op appends a node holding its forward value and, when recording, a
/// closure that pushes the node's output gradient into its inputs. backward()
/// walks nodes in exact reverse creation order; gradients from multiple uses
/// of one value add up. Parameter leaves forward their final gradient into the
/// owning ParameterSlot::grad (additively, so several tapes can accumulate).
///
/// Every op output is checked for NaN/Inf and throws NumericError naming the
/// op. A tape is single-threaded; independent tapes may run concurrently
/// against a store as long as nobody writes parameter values meanwhile.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to `slot`. The slot must outlive the tape.
  Var parameter(ParameterSlot& slot);
  Var parameter(ParameterStore& store, std::string_view name);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() root w.r.t. `v` (zeros if unreached).
  Matrix grad(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// x + bias, with bias (1×c) broadcast over every row of x.
  Var add_row_bias(Var x, Var bias);
  Var scale(Var x, double factor);
  /// x / (s + eps) for a 1×1 s.
  Var div_scalar(Var x, Var s, double eps);
  Var matmul(Var a, Var b);
  /// aᵀ · b
  Var matmul_tn(Var a, Var b);
  /// s · d for a constant sparse `s`; `s_transpose` must equal sᵀ. Both
  /// must outlive the tape.
  Var spmm(const SparseMatrix& s, const SparseMatrix& s_transpose, Var d);
  /// ReLU with subgradient 0 at x = 0.
  Var relu(Var x);
  Var sigmoid(Var x);
  /// Numerically stable log σ(x).
  Var log_sigmoid(Var x);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var gather_rows(Var x, std::vector<std::uint32_t> rows);
  /// Row r of the output is the mean of x's rows listed in groups[r]; an
  /// empty group yields a zero row.
  Var gather_mean_rows(Var x, std::vector<std::vector<std::uint32_t>> groups);
  /// n×1 column of per-row dot products.
  Var rowwise_dot(Var a, Var b);
  /// Per row: ((col·sem)/(‖col‖²+eps))·col.
  Var row_project(Var col, Var sem, double eps);
  Var sum(Var x);
  Var l2_norm_sq(Var x);

  /// Back-propagates from a 1×1 `root`.
  void backward(Var root);

 private:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    ParameterSlot* slot = nullptr;
  };

  Var push(Matrix value, std::string_view op, BackwardFn fn);
  const Node& node(Var v) const;
  Matrix& grad_ref(Var v);
  void accumulate(Var v, const Matrix& g);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace cnre
