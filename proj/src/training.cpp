#include "cnre/training.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <random>

#include "cnre/error.hpp"

namespace cnre {

std::vector<PlannedTriple> plan_triples(const InteractionDataset& train,
                                        std::span<const BprTriple> triples,
                                        const CascadeState& cascade,
                                        const RetrievalIndices& indices,
                                        const ModelConfig& config) {
  const std::size_t target = train.behaviors.target_index();
  std::vector<PlannedTriple> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    const auto plan = [&](std::uint32_t item) {
      return t.behavior == target
                 ? target_plan(train, t.user, item, cascade, indices, config)
                 : auxiliary_plan(train, t.behavior, t.user, item, cascade, indices, config);
    };
    out.push_back({{t.user, t.pos_item, plan(t.pos_item)}, {t.user, t.neg_item, plan(t.neg_item)}});
  }
  return out;
}

LossVars record_loss(Tape& tape, ParameterStore& store, const GraphSet& graphs,
                     std::span<const PlannedTriple> triples, const ModelConfig& config,
                     double lambda) {
  if (triples.empty()) throw InvalidArgument("record_loss: empty batch");
  const CascadeVars cascade = cascade_forward(tape, graphs, store, config);

  const std::size_t n = triples.size();
  std::vector<PairRequest> requests;
  requests.reserve(2 * n);
  for (const auto& t : triples) requests.push_back(t.pos);
  for (const auto& t : triples) requests.push_back(t.neg);

  const Var mediators = tape_mediators(tape, cascade, requests,
                                       logic_vars(tape, store, conjunction_prefix()),
                                       logic_vars(tape, store, disjunction_prefix()));
  const Var logits = tape_logits(tape, mediators, head_vars(tape, store));

  std::vector<std::uint32_t> pos_rows(n);
  std::vector<std::uint32_t> neg_rows(n);
  std::iota(pos_rows.begin(), pos_rows.end(), 0U);
  std::iota(neg_rows.begin(), neg_rows.end(), static_cast<std::uint32_t>(n));
  const Var margin = tape.sub(tape.gather_rows(logits, pos_rows), tape.gather_rows(logits, neg_rows));
  const Var bpr = tape.scale(tape.sum(tape.log_sigmoid(margin)), -1.0);

  Var reg;
  for (auto& slot : store.slots()) {
    const Var sq = tape.l2_norm_sq(tape.parameter(slot));
    reg = reg.valid() ? tape.add(reg, sq) : sq;
  }
  return {tape.add(bpr, tape.scale(reg, lambda)), bpr, margin};
}

TrainResult train(const InteractionDataset& data, const TrainConfig& config, std::ostream* log) {
  const ModelConfig& mc = config.model;
  if (mc.layer_counts.size() != data.num_behaviors()) {
    throw InvalidArgument("train: layer_counts has " + std::to_string(mc.layer_counts.size()) +
                          " entries but the dataset has " + std::to_string(data.num_behaviors()) +
                          " behaviors");
  }
  if (config.batch_size == 0 || config.index_refresh_epochs == 0) {
    throw InvalidArgument("train: batch_size and index_refresh_epochs must be positive");
  }

  ParameterStore store =
      init_parameters(mc, data.num_users(), data.num_items(), data.num_behaviors(), config.seed);
  const GraphSet graphs = GraphSet::from_dataset(data);
  std::mt19937_64 rng(config.seed + 1);
  const AdamConfig adam{config.lr, config.beta1, config.beta2, config.adam_eps};

  TrainResult result;
  CascadeState frozen;
  RetrievalIndices indices;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if ((epoch - 1) % config.index_refresh_epochs == 0) {
      frozen = compute_cascade(graphs, store, mc);
      indices = build_retrieval_indices(frozen, mc.index_mode);
    }

    std::vector<BprTriple> triples;
    for (std::size_t b = 0; b < data.num_behaviors(); ++b) {
      const std::size_t count = data.edges[b].edges().size();
      if (count == 0) continue;
      auto part = sample_bpr_triples(data, b, count, rng);
      triples.insert(triples.end(), part.begin(), part.end());
    }
    std::shuffle(triples.begin(), triples.end(), rng);

    EpochStats stats;
    stats.epoch = epoch;
    double bpr_sum = 0.0;
    std::vector<double> per_behavior(data.num_behaviors(), 0.0);
    std::vector<std::size_t> per_behavior_pairs(data.num_behaviors(), 0);
    for (std::size_t start = 0, batch = 0; start < triples.size();
         start += config.batch_size, ++batch) {
      const std::size_t stop = std::min(triples.size(), start + config.batch_size);
      const std::span<const BprTriple> slice(triples.data() + start, stop - start);
      try {
        // Confidences come from the current parameters; neighbor retrieval
        // uses the indices built at the last refresh.
        const CascadeState current = compute_cascade(graphs, store, mc);
        const auto planned = plan_triples(data, slice, current, indices, mc);
        Tape tape;
        const LossVars loss = record_loss(tape, store, graphs, planned, mc, config.lambda);
        tape.backward(loss.total);
        stats.loss += tape.scalar(loss.total);
        bpr_sum += tape.scalar(loss.bpr);
        const Matrix& margin = tape.value(loss.margin);
        for (std::size_t k = 0; k < slice.size(); ++k) {
          per_behavior[slice[k].behavior] += bpr_loss(margin(k, 0), 0.0);
          ++per_behavior_pairs[slice[k].behavior];
        }
        adam_step(store, adam);
      } catch (const NumericError& e) {
        throw NumericError("training aborted at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch) + ": " + e.what());
      }
    }
    stats.pairs = triples.size();
    stats.mean_bpr = triples.empty() ? 0.0 : bpr_sum / static_cast<double>(triples.size());
    for (std::size_t b = 0; b < per_behavior.size(); ++b) {
      stats.behavior_bpr.push_back(per_behavior_pairs[b] == 0
                                       ? 0.0
                                       : per_behavior[b] / static_cast<double>(per_behavior_pairs[b]));
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log != nullptr) *log << epoch << '\t' << stats.loss << '\t' << stats.seconds << '\n';
    result.history.push_back(stats);
  }

  round_to_f32(store);
  result.checkpoint.config = config;
  result.checkpoint.behaviors = data.behaviors.names;
  result.checkpoint.num_users = data.num_users();
  result.checkpoint.num_items = data.num_items();
  result.checkpoint.store = std::move(store);
  return result;
}

Model model_from_checkpoint(const Checkpoint& ckpt, const InteractionDataset& train) {
  check_compatible(ckpt, train);
  const auto expected = init_parameters(ckpt.config.model, ckpt.num_users, ckpt.num_items,
                                        ckpt.behaviors.size(), 0);
  const auto& want = expected.slots();
  const auto& got = ckpt.store.slots();
  bool same = want.size() == got.size();
  for (std::size_t k = 0; same && k < want.size(); ++k) {
    same = want[k].name == got[k].name && want[k].value.rows() == got[k].value.rows() &&
           want[k].value.cols() == got[k].value.cols();
  }
  if (!same) {
    throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                          "checkpoint parameters do not match the layout of its model config");
  }
  return Model(train, ckpt.store, ckpt.config.model);
}

}  // namespace cnre
