#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/params.hpp"
#include "cnre/propagation.hpp"
#include "cnre/reasoning.hpp"
#include "cnre/tape.hpp"

namespace cnre {

/// Creates every trainable slot: embedding tables, per-behavior hyperedge
/// projections, both logic operators and the prediction head. Weights are
/// Xavier-uniform, biases zero. Slots for disabled components are still
/// created so checkpoints always share one layout.
ParameterStore init_parameters(const ModelConfig& config, std::size_t num_users,
                               std::size_t num_items, std::size_t num_behaviors,
                               std::uint64_t seed);

/// σ(w_oᵀ relu(W_h m + b_h) + b_o), stored row-major as m·W_h (2d × d).
struct PredictionHead {
  Matrix w_h;  // 2d × d
  Matrix b_h;  // 1 × d
  Matrix w_o;  // d × 1
  Matrix b_o;  // 1 × 1
};

PredictionHead head_from(const ParameterStore& store);

/// Pre-sigmoid head output.
double prediction_logit(const PredictionHead& head, std::span<const double> mediator);
double predict(const PredictionHead& head, std::span<const double> mediator);

/// Auxiliary-behavior score: the head applied to [e_u^b ‖ e_i^b] built from
/// behavior b's aggregated embeddings.
double auxiliary_task_score(std::uint32_t user, std::uint32_t item, std::size_t behavior,
                            const CascadeState& cascade, const PredictionHead& head);

/// -log σ(pos - neg)
double bpr_loss(double pos_logit, double neg_logit);

/// Σ_b L_b + λ Σ‖Θ‖²
double multi_task_loss(std::span<const double> per_behavior, double lambda,
                       const ParameterStore& store);

/// One pair to score on the tape, with its reasoning decisions already made.
struct PairRequest {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  ReasoningPlan plan;
};

struct LogicVars {
  Var w1, b1, w2, b2;
};

struct HeadVars {
  Var w_h, b_h, w_o, b_o;
};

LogicVars logic_vars(Tape& tape, ParameterStore& store, const std::string& prefix);
HeadVars head_vars(Tape& tape, ParameterStore& store);

/// Mediators for every request, one row each, in request order. Requests are
/// batched by (operator, behavior) so each group costs one matmul chain.
Var tape_mediators(Tape& tape, const CascadeVars& cascade, std::span<const PairRequest> requests,
                   const LogicVars& conjunction, const LogicVars& disjunction);

/// n × 1 logits of the head applied to n × 2d mediators.
Var tape_logits(Tape& tape, Var mediators, const HeadVars& head);

/// Plan used for an auxiliary-behavior training pair.
ReasoningPlan auxiliary_plan(const InteractionDataset& train, std::size_t behavior,
                             std::uint32_t user, std::uint32_t item, const CascadeState& cascade,
                             const RetrievalIndices& indices, const ModelConfig& config);

/// Plan used for a target-behavior pair.
ReasoningPlan target_plan(const InteractionDataset& train, std::uint32_t user, std::uint32_t item,
                          const CascadeState& cascade, const RetrievalIndices& indices,
                          const ModelConfig& config);

struct ScoredPair {
  double score = 0.0;
  /// Pre-sigmoid value; orders pairs exactly like `score` but does not
  /// saturate to 1.0 for confident predictions.
  double logit = 0.0;
  ReasoningTrace trace;
};

/// A trained model ready for inference: frozen cascade, indices and head.
class Model {
 public:
  Model(InteractionDataset train, ParameterStore store, ModelConfig config,
        HnswParams index_params = {});

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// Score of (user, item) reasoning over the observed training chain.
  ScoredPair score(std::uint32_t user, std::uint32_t item) const;
  /// Score with an explicit chain observation (used for counterfactuals).
  ScoredPair score(std::uint32_t user, std::uint32_t item, const ChainObservation& obs) const;

  const InteractionDataset& train() const noexcept { return *train_; }
  const ParameterStore& store() const noexcept { return *store_; }
  const ModelConfig& config() const noexcept { return config_; }
  const CascadeState& cascade() const noexcept { return *cascade_; }
  const RetrievalIndices& indices() const noexcept { return *indices_; }

 private:
  std::unique_ptr<InteractionDataset> train_;
  std::unique_ptr<ParameterStore> store_;
  ModelConfig config_;
  std::unique_ptr<CascadeState> cascade_;
  std::unique_ptr<RetrievalIndices> indices_;
  PredictionHead head_;
  std::unique_ptr<Reasoner> reasoner_;
};

}  // namespace cnre
