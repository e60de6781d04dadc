#pragma once

#include <cstddef>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/matrix.hpp"
#include "cnre/params.hpp"
#include "cnre/tape.hpp"

namespace cnre {

/// Bipartite adjacency with symmetric weights 1/sqrt(deg(u)·deg(i)).
struct NormalizedAdjacency {
  SparseMatrix user_to_item;  // M×N
  SparseMatrix item_to_user;  // N×M, the transpose
};

NormalizedAdjacency build_normalized_adjacency(const EdgeSet& edges, std::size_t num_users,
                                               std::size_t num_items);

/// Union of every behavior's edges (an interaction present in two behaviors
/// counts once).
EdgeSet union_edges(const InteractionDataset& data);

/// Adjacencies the cascade runs on: the unified graph plus one per behavior.
struct GraphSet {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  NormalizedAdjacency unified;
  std::vector<NormalizedAdjacency> behaviors;

  static GraphSet from_dataset(const InteractionDataset& data);
};

struct EmbeddingPair {
  Matrix user;
  Matrix item;
};

// Forward-only building blocks.

/// Returns Σ_{l=0..L} e^(l), alternating user←item and item←user aggregation.
EmbeddingPair lightgcn_propagate(const NormalizedAdjacency& adj, const Matrix& e0_user,
                                 const Matrix& e0_item, std::size_t layers);
/// H = e_col · W_hyp
Matrix hypergraph_incidence(const Matrix& e_col, const Matrix& w_hyp);
/// e_sem = H (Hᵀ e_col); the M×M affinity is never formed.
Matrix hypergraph_convolve(const Matrix& h, const Matrix& e_col,
                           HypergraphScale scale = HypergraphScale::None);
Matrix adaptive_project(const Matrix& e_col, const Matrix& e_sem, double eps);
Matrix aggregate_behavior(const Matrix& e_prev, const Matrix& e_col, const Matrix& e_hat_sem);

// Differentiable counterparts.

struct VarPair {
  Var user;
  Var item;
};

VarPair lightgcn_propagate(Tape& tape, const NormalizedAdjacency& adj, Var e0_user, Var e0_item,
                           std::size_t layers);
Var hypergraph_convolve(Tape& tape, Var h, Var e_col, HypergraphScale scale);

/// Tape handles of one behavior's embedding bundle.
struct BehaviorVars {
  VarPair col;
  VarPair sem;
  VarPair hat_sem;  // invalid when the semantic branch is disabled
  VarPair agg;
};

struct CascadeVars {
  VarPair intrinsic;
  std::vector<BehaviorVars> behaviors;
};

/// Values of one behavior's embedding bundle.
struct BehaviorEmbeddings {
  EmbeddingPair col;
  EmbeddingPair sem;
  EmbeddingPair hat_sem;
  EmbeddingPair agg;
};

struct CascadeState {
  EmbeddingPair intrinsic;
  std::vector<BehaviorEmbeddings> behaviors;
  std::vector<std::size_t> layer_counts;
};

/// Parameter slot names used by the cascade.
std::string user_embedding_slot();
std::string item_embedding_slot();
std::string hyper_user_slot(std::size_t behavior);
std::string hyper_item_slot(std::size_t behavior);

/// Records the full hierarchical propagation on `tape`: intrinsic propagation
/// on the unified graph seeds behavior 1; each behavior runs collaborative
/// propagation, hypergraph incidence and convolution, projection and
/// aggregation, and its aggregate seeds the next behavior.
CascadeVars cascade_forward(Tape& tape, const GraphSet& graphs, ParameterStore& store,
                            const ModelConfig& config);

CascadeState snapshot(const Tape& tape, const CascadeVars& vars,
                      const std::vector<std::size_t>& layer_counts);

/// Forward-only cascade (no gradient bookkeeping).
CascadeState compute_cascade(const GraphSet& graphs, ParameterStore& store,
                             const ModelConfig& config);

}  // namespace cnre
