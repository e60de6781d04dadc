#include "cnre/propagation.hpp"

#include <cmath>
#include <string>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {

namespace {
constexpr double kTraceEps = 1e-12;
}  // namespace

NormalizedAdjacency build_normalized_adjacency(const EdgeSet& edges, std::size_t num_users,
                                               std::size_t num_items) {
  std::vector<std::size_t> item_degree(num_items, 0);
  for (const auto& e : edges.edges()) {
    if (e.user >= num_users || e.item >= num_items) {
      throw InvalidArgument("build_normalized_adjacency: edge out of range");
    }
    ++item_degree[e.item];
  }
  std::vector<Triplet> t;
  t.reserve(edges.size());
  for (const auto& e : edges.edges()) {
    const double du = static_cast<double>(edges.degree(e.user));
    const double di = static_cast<double>(item_degree[e.item]);
    t.push_back({e.user, e.item, 1.0 / std::sqrt(du * di)});
  }
  NormalizedAdjacency adj;
  adj.user_to_item = SparseMatrix::from_triplets(num_users, num_items, std::move(t));
  adj.item_to_user = adj.user_to_item.transpose();
  return adj;
}

EdgeSet union_edges(const InteractionDataset& data) {
  std::vector<Edge> all;
  all.reserve(data.total_edges());
  for (const auto& e : data.edges) all.insert(all.end(), e.edges().begin(), e.edges().end());
  return EdgeSet(data.num_users(), data.num_items(), std::move(all));
}

GraphSet GraphSet::from_dataset(const InteractionDataset& data) {
  GraphSet g;
  g.num_users = data.num_users();
  g.num_items = data.num_items();
  g.unified = build_normalized_adjacency(union_edges(data), g.num_users, g.num_items);
  for (const auto& e : data.edges) {
    g.behaviors.push_back(build_normalized_adjacency(e, g.num_users, g.num_items));
  }
  return g;
}

namespace {

void add_into(Matrix& acc, const Matrix& x) {
  auto a = acc.values();
  const auto b = x.values();
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
}

}  // namespace

EmbeddingPair lightgcn_propagate(const NormalizedAdjacency& adj, const Matrix& e0_user,
                                 const Matrix& e0_item, std::size_t layers) {
  require_shape(e0_user.rows() == adj.user_to_item.rows() &&
                    e0_item.rows() == adj.item_to_user.rows() && e0_user.cols() == e0_item.cols(),
                "lightgcn_propagate: embedding shapes do not match the graph");
  EmbeddingPair sum{e0_user, e0_item};
  Matrix cur_u = e0_user;
  Matrix cur_i = e0_item;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix next_u = kernels::spmm(adj.user_to_item, cur_i);
    Matrix next_i = kernels::spmm(adj.item_to_user, cur_u);
    add_into(sum.user, next_u);
    add_into(sum.item, next_i);
    cur_u = std::move(next_u);
    cur_i = std::move(next_i);
  }
  return sum;
}

Matrix hypergraph_incidence(const Matrix& e_col, const Matrix& w_hyp) {
  require_shape(e_col.cols() == w_hyp.rows(), "hypergraph_incidence: W_hyp must be d x K");
  return kernels::matmul(e_col, w_hyp);
}

Matrix hypergraph_convolve(const Matrix& h, const Matrix& e_col, HypergraphScale scale) {
  require_shape(h.rows() == e_col.rows(), "hypergraph_convolve: H rows != e_col rows");
  Matrix out = kernels::matmul(h, kernels::matmul_tn(h, e_col));
  double inv = 1.0;
  if (scale == HypergraphScale::Mean && h.rows() > 0) inv = 1.0 / static_cast<double>(h.rows());
  if (scale == HypergraphScale::Trace) {
    double fro = 0.0;
    for (const double v : h.values()) fro += v * v;
    inv = 1.0 / (fro + kTraceEps);
  }
  if (inv != 1.0) {
    for (auto& v : out.values()) v *= inv;
  }
  return out;
}

Matrix adaptive_project(const Matrix& e_col, const Matrix& e_sem, double eps) {
  return kernels::row_project(e_col, e_sem, eps);
}

Matrix aggregate_behavior(const Matrix& e_prev, const Matrix& e_col, const Matrix& e_hat_sem) {
  require_shape(e_prev.same_shape(e_col) && e_col.same_shape(e_hat_sem),
                "aggregate_behavior: shapes differ");
  Matrix out = e_prev;
  add_into(out, e_col);
  add_into(out, e_hat_sem);
  return out;
}

VarPair lightgcn_propagate(Tape& tape, const NormalizedAdjacency& adj, Var e0_user, Var e0_item,
                           std::size_t layers) {
  VarPair sum{e0_user, e0_item};
  Var cur_u = e0_user;
  Var cur_i = e0_item;
  for (std::size_t l = 0; l < layers; ++l) {
    const Var next_u = tape.spmm(adj.user_to_item, adj.item_to_user, cur_i);
    const Var next_i = tape.spmm(adj.item_to_user, adj.user_to_item, cur_u);
    sum.user = tape.add(sum.user, next_u);
    sum.item = tape.add(sum.item, next_i);
    cur_u = next_u;
    cur_i = next_i;
  }
  return sum;
}

Var hypergraph_convolve(Tape& tape, Var h, Var e_col, HypergraphScale scale) {
  const Var out = tape.matmul(h, tape.matmul_tn(h, e_col));
  if (scale == HypergraphScale::Mean) {
    const auto rows = tape.value(h).rows();
    return tape.scale(out, rows > 0 ? 1.0 / static_cast<double>(rows) : 1.0);
  }
  if (scale == HypergraphScale::Trace) return tape.div_scalar(out, tape.l2_norm_sq(h), kTraceEps);
  return out;
}

std::string user_embedding_slot() { return "embedding.user"; }
std::string item_embedding_slot() { return "embedding.item"; }
std::string hyper_user_slot(std::size_t behavior) {
  return "hyper.user." + std::to_string(behavior);
}
std::string hyper_item_slot(std::size_t behavior) {
  return "hyper.item." + std::to_string(behavior);
}

CascadeVars cascade_forward(Tape& tape, const GraphSet& graphs, ParameterStore& store,
                            const ModelConfig& config) {
  const std::size_t n_behaviors = graphs.behaviors.size();
  if (config.layer_counts.size() != n_behaviors) {
    throw InvalidArgument("cascade_forward: need one layer count per behavior");
  }
  const Var e0_u = tape.parameter(store, user_embedding_slot());
  const Var e0_i = tape.parameter(store, item_embedding_slot());
  require_shape(tape.value(e0_u).rows() == graphs.num_users &&
                    tape.value(e0_i).rows() == graphs.num_items,
                "cascade_forward: embedding tables do not match the graph");

  CascadeVars out;
  const Ablation& ab = config.ablation;

  if (!ab.hpp) {
    // Parallel encoder: every behavior propagates the base embeddings on its
    // own graph, with no intrinsic seed, cascade, or semantic branch.
    out.intrinsic = {e0_u, e0_i};
    for (std::size_t b = 0; b < n_behaviors; ++b) {
      BehaviorVars bv;
      bv.col = lightgcn_propagate(tape, graphs.behaviors[b], e0_u, e0_i, config.layer_counts[b]);
      bv.sem = bv.col;
      bv.agg = bv.col;
      out.behaviors.push_back(bv);
    }
    return out;
  }

  out.intrinsic = lightgcn_propagate(tape, graphs.unified, e0_u, e0_i, config.layer_counts[0]);
  VarPair prev = out.intrinsic;
  for (std::size_t b = 0; b < n_behaviors; ++b) {
    BehaviorVars bv;
    bv.col = lightgcn_propagate(tape, graphs.behaviors[b], prev.user, prev.item,
                                config.layer_counts[b]);
    if (ab.par) {
      const Var h_u = tape.matmul(bv.col.user, tape.parameter(store, hyper_user_slot(b)));
      const Var h_i = tape.matmul(bv.col.item, tape.parameter(store, hyper_item_slot(b)));
      bv.sem = {hypergraph_convolve(tape, h_u, bv.col.user, config.hypergraph_scale),
                hypergraph_convolve(tape, h_i, bv.col.item, config.hypergraph_scale)};
      bv.hat_sem = ab.prj ? VarPair{tape.row_project(bv.col.user, bv.sem.user, config.projection_eps),
                                    tape.row_project(bv.col.item, bv.sem.item, config.projection_eps)}
                          : bv.sem;
      bv.agg = {tape.add(tape.add(prev.user, bv.col.user), bv.hat_sem.user),
                tape.add(tape.add(prev.item, bv.col.item), bv.hat_sem.item)};
    } else {
      // Without the semantic branch the collaborative space doubles as the
      // semantic retrieval space.
      bv.sem = bv.col;
      bv.agg = {tape.add(prev.user, bv.col.user), tape.add(prev.item, bv.col.item)};
    }
    out.behaviors.push_back(bv);
    prev = bv.agg;
  }
  return out;
}

CascadeState snapshot(const Tape& tape, const CascadeVars& vars,
                      const std::vector<std::size_t>& layer_counts) {
  const auto pair = [&](const VarPair& p) {
    return EmbeddingPair{tape.value(p.user), tape.value(p.item)};
  };
  CascadeState s;
  s.intrinsic = pair(vars.intrinsic);
  s.layer_counts = layer_counts;
  for (const auto& bv : vars.behaviors) {
    BehaviorEmbeddings be;
    be.col = pair(bv.col);
    be.sem = pair(bv.sem);
    if (bv.hat_sem.user.valid()) {
      be.hat_sem = pair(bv.hat_sem);
    } else {
      be.hat_sem = {Matrix(be.col.user.rows(), be.col.user.cols()),
                    Matrix(be.col.item.rows(), be.col.item.cols())};
    }
    be.agg = pair(bv.agg);
    s.behaviors.push_back(std::move(be));
  }
  return s;
}

CascadeState compute_cascade(const GraphSet& graphs, ParameterStore& store,
                             const ModelConfig& config) {
  Tape tape(false);
  const CascadeVars vars = cascade_forward(tape, graphs, store, config);
  return snapshot(tape, vars, config.layer_counts);
}

}  // namespace cnre
