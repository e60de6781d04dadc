#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/matrix.hpp"
#include "cnre/params.hpp"
#include "cnre/propagation.hpp"
#include "cnre/retrieval.hpp"

namespace cnre {

/// Preference strength read off a behavior chain. Declaration order is the
/// strength order: Default < Weak < Medium < Strong.
enum class PreferenceStrength { Default, Weak, Medium, Strong };

std::string to_string(PreferenceStrength s);
PreferenceStrength parse_preference_strength(const std::string& s);

/// One flag per behavior: set iff (u, i) is a training edge of that behavior.
struct ChainObservation {
  std::vector<bool> flags;

  std::size_t size() const noexcept { return flags.size(); }
  bool target() const { return flags.back(); }
  std::size_t auxiliary_count() const;
  /// Mask with bit k = flags[k].
  std::uint64_t bits() const;
  static ChainObservation from_bits(std::uint64_t bits, std::size_t n);

  friend bool operator==(const ChainObservation&, const ChainObservation&) = default;
};

ChainObservation observe_chain(const InteractionDataset& train, std::uint32_t user,
                               std::uint32_t item);

/// Target flag set → Strong (complete and skip chains); otherwise two or more
/// auxiliary flags → Medium; exactly one → Weak; none → Default.
PreferenceStrength dispatch(const ChainObservation& obs);

/// Highest-ranked auxiliary behavior whose flag is set, if any.
std::optional<std::size_t> chain_behavior(const ChainObservation& obs);

/// Purchase confidence σ(e_u · e_i).
double confidence_score(std::span<const double> user, std::span<const double> item);

/// Strong-path mediator: [user ‖ item].
Matrix strong_mediator(std::span<const double> user, std::span<const double> item);

/// Two-layer logic operator in row-vector form: relu([u‖i‖s]·W₁ + b₁)·W₂ + b₂.
struct LogicOperator {
  Matrix w1;  // 3d × h
  Matrix b1;  // 1 × h
  Matrix w2;  // h × 2d
  Matrix b2;  // 1 × 2d
};

std::string conjunction_prefix();
std::string disjunction_prefix();
/// Reads "<prefix>.w1/.b1/.w2/.b2" from the store.
LogicOperator logic_operator_from(const ParameterStore& store, const std::string& prefix);

Matrix apply_logic_operator(const LogicOperator& op, std::span<const double> user,
                            std::span<const double> item, std::span<const double> support);

/// Conjunction (medium, sub-τ): operator over [e_u ‖ e_i,col ‖ S_col].
Matrix conjunction_mediator(std::span<const double> user, std::span<const double> item_col,
                            std::span<const double> support_col, const LogicOperator& params);
/// Disjunction (weak): operator over [e_u ‖ e_i,sem ‖ S_sem].
Matrix disjunction_mediator(std::span<const double> user, std::span<const double> item_sem,
                            std::span<const double> support_sem, const LogicOperator& params);

enum class RetrievalSpace { None, Collaborative, Semantic };
enum class MediatorOp { Concat, Conjunction, Disjunction };

std::string to_string(RetrievalSpace s);
std::string to_string(MediatorOp op);

/// The discrete decisions that fix how a pair's mediator is computed.
struct ReasoningPlan {
  PreferenceStrength path = PreferenceStrength::Default;
  std::size_t behavior = 0;  // behavior whose embeddings build the mediator
  std::optional<double> confidence;
  RetrievalSpace space = RetrievalSpace::None;
  std::vector<std::uint32_t> neighbors;
  MediatorOp op = MediatorOp::Concat;
};

/// Nearest-neighbor indices per behavior over item collaborative and semantic
/// spaces of a frozen cascade.
struct RetrievalIndices {
  std::vector<NNIndex> collaborative;
  std::vector<NNIndex> semantic;
};

RetrievalIndices build_retrieval_indices(const CascadeState& cascade, IndexMode mode,
                                         const HnswParams& params = {});

/// Runs dispatch → confidence → retrieval for (user, item). `obs` covers
/// behaviors 0..target, where `target` plays the target role.
ReasoningPlan plan_reasoning(const ChainObservation& obs, std::uint32_t user, std::uint32_t item,
                             const CascadeState& cascade, const RetrievalIndices& indices,
                             const ModelConfig& config);

struct MediatorEmbedding {
  Matrix values;  // 1 × 2d
  PreferenceStrength source_path = PreferenceStrength::Default;
};

/// Complete record of one reasoning pass.
struct ReasoningTrace {
  ChainObservation chain;
  ReasoningPlan plan;
  double tau = 0.5;
  Matrix mediator;
  std::optional<double> score;
};

/// Evaluates a plan into a mediator from cascade values.
Matrix build_mediator(const ReasoningPlan& plan, std::uint32_t user, std::uint32_t item,
                      const CascadeState& cascade, const LogicOperator& conjunction,
                      const LogicOperator& disjunction);

/// Read-only reasoning over a frozen cascade and its indices; safe to share
/// across threads.
class Reasoner {
 public:
  Reasoner(const CascadeState& cascade, const RetrievalIndices& indices,
           LogicOperator conjunction, LogicOperator disjunction, ModelConfig config);

  std::pair<MediatorEmbedding, ReasoningTrace> reason(std::uint32_t user, std::uint32_t item,
                                                      const ChainObservation& obs) const;

  const ModelConfig& config() const noexcept { return config_; }

 private:
  const CascadeState* cascade_;
  const RetrievalIndices* indices_;
  LogicOperator conjunction_;
  LogicOperator disjunction_;
  ModelConfig config_;
};

}  // namespace cnre
