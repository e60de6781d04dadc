#pragma once

// Dense/sparse numeric kernels used by the autodiff tape and the model.
//
// Each kernel exists twice: a plain serial loop (`serial::`) that serves as
// the reference for tests, and an OpenMP version (`parallel::`) that splits
// work over output rows. Rows are independent and every row's reduction runs
// in the same order in both versions, so results are bit-identical regardless
// of thread count. The unqualified functions dispatch on `num_threads()`.

#include <cstddef>
#include <span>
#include <vector>

#include "cnre/matrix.hpp"

namespace cnre {

/// Worker count for parallel kernels. Initialized from CNRE_THREADS (default 1).
int num_threads();
void set_num_threads(int n);

namespace kernels {

namespace serial {
Matrix spmm(const SparseMatrix& s, const Matrix& d);
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ · b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// Row-wise projection of `sem` onto `col`: ((col·sem)/(‖col‖²+eps))·col.
Matrix row_project(const Matrix& col, const Matrix& sem, double eps);
/// Squared Euclidean distance from `query` to every row of `space`.
std::vector<double> squared_distances(const Matrix& space, std::span<const double> query);
}  // namespace serial

namespace parallel {
Matrix spmm(const SparseMatrix& s, const Matrix& d, int threads);
Matrix matmul(const Matrix& a, const Matrix& b, int threads);
Matrix matmul_tn(const Matrix& a, const Matrix& b, int threads);
Matrix matmul_nt(const Matrix& a, const Matrix& b, int threads);
Matrix row_project(const Matrix& col, const Matrix& sem, double eps, int threads);
std::vector<double> squared_distances(const Matrix& space, std::span<const double> query,
                                      int threads);
}  // namespace parallel

Matrix spmm(const SparseMatrix& s, const Matrix& d);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix row_project(const Matrix& col, const Matrix& sem, double eps);
std::vector<double> squared_distances(const Matrix& space, std::span<const double> query);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace kernels
}  // namespace cnre
