#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cnre {

/// Component switches mirroring the ablation variants. `true` keeps the
/// component; every flag is independent.
struct Ablation {
  bool hpp = true;  // hierarchical propagation (off: parallel per-behavior LightGCN)
  bool par = true;  // hypergraph semantic branch
  bool prj = true;  // adaptive projection of semantic embeddings
  bool rea = true;  // reasoning module (off: every pair uses the final-embedding concat)
  bool cnj = true;  // conjunction path for medium chains
  bool dsj = true;  // disjunction path for weak chains

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

enum class HypergraphScale {
  None,  // e_sem = H (Hᵀ e_col)
  Mean,  // same, divided by the number of rows of H
  Trace,  // same, divided by ‖H‖²_F (the affinity H Hᵀ has unit trace)
};

enum class IndexMode { Exact, Approximate };

/// How auxiliary-behavior BPR terms score a pair.
enum class AuxiliaryScoring {
  Direct,    // concat of behavior-b aggregated embeddings through the shared head
  Reasoned,  // run the full dispatcher with behavior b playing the target role
};

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t hyperedges = 32;
  /// GCN depth per behavior in cascade order; the intrinsic graph uses the first.
  std::vector<std::size_t> layer_counts{1, 1, 3};
  double projection_eps = 1e-8;
  HypergraphScale hypergraph_scale = HypergraphScale::Trace;
  double tau = 0.5;
  std::size_t neighbors = 10;  // retrieved per query
  IndexMode index_mode = IndexMode::Exact;
  AuxiliaryScoring auxiliary = AuxiliaryScoring::Direct;
  /// When false, a training pair's own flag for the behavior being scored is
  /// cleared before dispatch, so the chain looks as it would for an unseen pair.
  bool train_label_visible = false;
  Ablation ablation;

  /// Hidden width of the logic operators (2d).
  std::size_t logic_hidden() const noexcept { return 2 * dim; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  double lambda = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 1024;
  std::size_t epochs = 20;
  std::uint64_t seed = 2024;
  /// Retrieval indices are rebuilt every this many epochs.
  std::size_t index_refresh_epochs = 1;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string to_string(HypergraphScale s);
std::string to_string(IndexMode m);
std::string to_string(AuxiliaryScoring a);
HypergraphScale parse_hypergraph_scale(const std::string& s);
IndexMode parse_index_mode(const std::string& s);
AuxiliaryScoring parse_auxiliary_scoring(const std::string& s);

}  // namespace cnre
