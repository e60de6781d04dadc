// Serial reference vs OpenMP kernels. Thread count is the second range arg.

#include <benchmark/benchmark.h>

#include <random>

#include "cnre/kernels.hpp"
#include "cnre/retrieval.hpp"

using namespace cnre;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

// Bipartite-graph shaped: ~`per_row` nonzeros per row.
SparseMatrix random_sparse(std::size_t rows, std::size_t cols, std::size_t per_row, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(cols - 1));
  std::vector<Triplet> t;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < per_row; ++k) t.push_back({r, pick(rng), 0.1});
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

void BM_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const SparseMatrix s = random_sparse(n, n, 20, 1);
  const Matrix d = random_matrix(n, 64, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(threads == 0 ? kernels::serial::spmm(s, d) : kernels::parallel::spmm(s, d, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.nnz()) * 64);
}

void BM_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const Matrix a = random_matrix(n, 64, 3), b = random_matrix(64, 64, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(threads == 0 ? kernels::serial::matmul(a, b) : kernels::parallel::matmul(a, b, threads));
  }
}

void BM_matmul_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const Matrix h = random_matrix(n, 16, 5), e = random_matrix(n, 64, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(threads == 0 ? kernels::serial::matmul_tn(h, e)
                                          : kernels::parallel::matmul_tn(h, e, threads));
  }
}

void BM_row_project(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const Matrix c = random_matrix(n, 64, 7), s = random_matrix(n, 64, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(threads == 0 ? kernels::serial::row_project(c, s, 1e-8)
                                          : kernels::parallel::row_project(c, s, 1e-8, threads));
  }
}

void BM_squared_distances(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int threads = static_cast<int>(state.range(1));
  const Matrix space = random_matrix(n, 64, 9);
  const Matrix q = random_matrix(1, 64, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(threads == 0 ? kernels::serial::squared_distances(space, q.row(0))
                                          : kernels::parallel::squared_distances(space, q.row(0), threads));
  }
}

void BM_index_query(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto mode = state.range(1) == 0 ? IndexMode::Exact : IndexMode::Approximate;
  const Matrix space = random_matrix(n, 32, 11);
  const NNIndex index(space, mode);
  const Matrix q = random_matrix(64, 32, 12);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(q.row(k++ % 64), 10));
  }
}

// threads 0 = serial reference
#define THREAD_SWEEP(fn, n) BENCHMARK(fn)->ArgsProduct({{n}, {0, 1, 2, 4}})->Unit(benchmark::kMicrosecond)

}  // namespace

THREAD_SWEEP(BM_spmm, 20000);
THREAD_SWEEP(BM_matmul, 20000);
THREAD_SWEEP(BM_matmul_tn, 20000);
THREAD_SWEEP(BM_row_project, 50000);
THREAD_SWEEP(BM_squared_distances, 50000);
BENCHMARK(BM_index_query)->ArgsProduct({{5000, 50000}, {0, 1}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
