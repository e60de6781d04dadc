#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cnre/checkpoint.hpp"
#include "cnre/config.hpp"
#include "cnre/dataset.hpp"
#include "cnre/model.hpp"
#include "cnre/propagation.hpp"
#include "cnre/tape.hpp"

namespace cnre {

/// A BPR triple whose positive and negative reasoning plans are already fixed.
struct PlannedTriple {
  PairRequest pos;
  PairRequest neg;
};

/// Turns sampled triples into planned ones. Target-behavior pairs go through
/// the reasoning dispatcher; auxiliary pairs use `auxiliary_plan`.
std::vector<PlannedTriple> plan_triples(const InteractionDataset& train,
                                        std::span<const BprTriple> triples,
                                        const CascadeState& cascade,
                                        const RetrievalIndices& indices,
                                        const ModelConfig& config);

struct LossVars {
  Var total;  // Σ BPR + λ Σ‖Θ‖²
  Var bpr;    // Σ BPR over the triples
  Var margin;  // n × 1 pos − neg logits
};

/// Records the full objective for one batch: cascade, mediators, head, BPR
/// over the triples and the L2 term over every slot.
LossVars record_loss(Tape& tape, ParameterStore& store, const GraphSet& graphs,
                     std::span<const PlannedTriple> triples, const ModelConfig& config,
                     double lambda);

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // Σ over batches of the full objective
  double mean_bpr = 0.0;  // BPR per pair over the epoch
  std::vector<double> behavior_bpr;  // BPR per pair, per behavior
  std::size_t pairs = 0;
  double seconds = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // parameters rounded to f32
  std::vector<EpochStats> history;
};

/// Multi-task BPR training with Adam. Writes "<epoch>\t<loss>\t<seconds>" per
/// epoch to `log` when given. Throws NumericError naming the first non-finite
/// tensor and the epoch/batch where it appeared.
TrainResult train(const InteractionDataset& train, const TrainConfig& config,
                  std::ostream* log = nullptr);

/// Rebuilds an inference model around a checkpoint.
Model model_from_checkpoint(const Checkpoint& ckpt, const InteractionDataset& train);

}  // namespace cnre
