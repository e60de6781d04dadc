#include "cnre/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cnre/error.hpp"

namespace cnre {
namespace {

int threads_from_env() {
  const char* env = std::getenv("CNRE_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{threads_from_env()};
  return n;
}

// Shape checks shared by both variants.
void check_spmm(const SparseMatrix& s, const Matrix& d) {
  require_shape(s.cols() == d.rows(), "spmm: sparse cols != dense rows");
}
void check_matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul: inner dimensions differ");
}
void check_matmul_tn(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn: row counts differ");
}
void check_matmul_nt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt: column counts differ");
}
void check_project(const Matrix& col, const Matrix& sem, double eps) {
  require_shape(col.same_shape(sem), "row_project: shapes differ");
  if (!(eps >= 0.0)) throw InvalidArgument("row_project: eps must be >= 0");
}

// Row kernels. Both the serial and the OpenMP loops call these, which is
// what keeps the two variants bit-identical.
inline void spmm_row(const SparseMatrix& s, const Matrix& d, Matrix& out, std::size_t r) {
  auto dst = out.row(r);
  const auto idx = s.row_indices(r);
  const auto val = s.row_values(r);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto src = d.row(idx[k]);
    const double w = val[k];
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
  }
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t r) {
  auto dst = out.row(r);
  const auto lhs = a.row(r);
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    const double w = lhs[k];
    if (w == 0.0) continue;
    const auto src = b.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
  }
}

// Output row r of aᵀb: Σ_k a(k, r) · b(k, :).
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t r) {
  auto dst = out.row(r);
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double w = a(k, r);
    if (w == 0.0) continue;
    const auto src = b.row(k);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * src[c];
  }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t r) {
  const auto lhs = a.row(r);
  for (std::size_t c = 0; c < b.rows(); ++c) out(r, c) = kernels::dot(lhs, b.row(c));
}

inline void project_row(const Matrix& col, const Matrix& sem, double eps, Matrix& out,
                        std::size_t r) {
  const auto a = col.row(r);
  const double coef = kernels::dot(a, sem.row(r)) / (kernels::dot(a, a) + eps);
  auto dst = out.row(r);
  // A zero row with eps == 0 gives 0/0; its projection is zero.
  if (!std::isfinite(coef)) return;
  for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = coef * a[c];
}

inline double sq_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] - b[c];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) { thread_setting().store(n >= 1 ? n : 1); }

namespace kernels {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) acc += a[c] * b[c];
  return acc;
}

namespace serial {

Matrix spmm(const SparseMatrix& s, const Matrix& d) {
  check_spmm(s, d);
  Matrix out(s.rows(), d.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) spmm_row(s, d, out, r);
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b);
  Matrix out(a.rows(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) matmul_row(a, b, out, r);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  check_matmul_tn(a, b);
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.cols(); ++r) matmul_tn_row(a, b, out, r);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_matmul_nt(a, b);
  Matrix out(a.rows(), b.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) matmul_nt_row(a, b, out, r);
  return out;
}

Matrix row_project(const Matrix& col, const Matrix& sem, double eps) {
  check_project(col, sem, eps);
  Matrix out(col.rows(), col.cols());
  for (std::size_t r = 0; r < col.rows(); ++r) project_row(col, sem, eps, out, r);
  return out;
}

std::vector<double> squared_distances(const Matrix& space, std::span<const double> query) {
  require_shape(space.cols() == query.size(), "squared_distances: width mismatch");
  std::vector<double> out(space.rows());
  for (std::size_t r = 0; r < space.rows(); ++r) out[r] = sq_distance(space.row(r), query);
  return out;
}

}  // namespace serial

namespace parallel {

// Loop indices are signed for OpenMP 2.x compatibility.
#define CNRE_ROW_LOOP(count, threads, body)                                  \
  do {                                                                       \
    const auto n_rows_ = static_cast<std::ptrdiff_t>(count);                 \
    _Pragma("omp parallel for schedule(static) num_threads(threads)")        \
    for (std::ptrdiff_t r_ = 0; r_ < n_rows_; ++r_) {                        \
      const auto r = static_cast<std::size_t>(r_);                           \
      body;                                                                  \
    }                                                                        \
  } while (0)

Matrix spmm(const SparseMatrix& s, const Matrix& d, int threads) {
  check_spmm(s, d);
  Matrix out(s.rows(), d.cols());
  CNRE_ROW_LOOP(s.rows(), threads, spmm_row(s, d, out, r));
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b, int threads) {
  check_matmul(a, b);
  Matrix out(a.rows(), b.cols());
  CNRE_ROW_LOOP(a.rows(), threads, matmul_row(a, b, out, r));
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b, int threads) {
  check_matmul_tn(a, b);
  Matrix out(a.cols(), b.cols());
  CNRE_ROW_LOOP(a.cols(), threads, matmul_tn_row(a, b, out, r));
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b, int threads) {
  check_matmul_nt(a, b);
  Matrix out(a.rows(), b.rows());
  CNRE_ROW_LOOP(a.rows(), threads, matmul_nt_row(a, b, out, r));
  return out;
}

Matrix row_project(const Matrix& col, const Matrix& sem, double eps, int threads) {
  check_project(col, sem, eps);
  Matrix out(col.rows(), col.cols());
  CNRE_ROW_LOOP(col.rows(), threads, project_row(col, sem, eps, out, r));
  return out;
}

std::vector<double> squared_distances(const Matrix& space, std::span<const double> query,
                                      int threads) {
  require_shape(space.cols() == query.size(), "squared_distances: width mismatch");
  std::vector<double> out(space.rows());
  CNRE_ROW_LOOP(space.rows(), threads, out[r] = sq_distance(space.row(r), query));
  return out;
}

#undef CNRE_ROW_LOOP

}  // namespace parallel

Matrix spmm(const SparseMatrix& s, const Matrix& d) {
  const int t = num_threads();
  return t > 1 ? parallel::spmm(s, d, t) : serial::spmm(s, d);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  const int t = num_threads();
  return t > 1 ? parallel::matmul(a, b, t) : serial::matmul(a, b);
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  const int t = num_threads();
  return t > 1 ? parallel::matmul_tn(a, b, t) : serial::matmul_tn(a, b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  const int t = num_threads();
  return t > 1 ? parallel::matmul_nt(a, b, t) : serial::matmul_nt(a, b);
}

Matrix row_project(const Matrix& col, const Matrix& sem, double eps) {
  const int t = num_threads();
  return t > 1 ? parallel::row_project(col, sem, eps, t) : serial::row_project(col, sem, eps);
}

std::vector<double> squared_distances(const Matrix& space, std::span<const double> query) {
  const int t = num_threads();
  return t > 1 ? parallel::squared_distances(space, query, t)
               : serial::squared_distances(space, query);
}

}  // namespace kernels
}  // namespace cnre
