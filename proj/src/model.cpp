#include "cnre/model.hpp"

#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {

namespace {

void add_logic_operator(ParameterStore& store, const std::string& prefix, std::size_t d,
                        std::size_t hidden, std::mt19937_64& rng) {
  store.add(prefix + ".w1", xavier_uniform(3 * d, hidden, rng));
  store.add(prefix + ".b1", Matrix(1, hidden));
  store.add(prefix + ".w2", xavier_uniform(hidden, 2 * d, rng));
  store.add(prefix + ".b2", Matrix(1, 2 * d));
}

}  // namespace

ParameterStore init_parameters(const ModelConfig& config, std::size_t num_users,
                               std::size_t num_items, std::size_t num_behaviors,
                               std::uint64_t seed) {
  if (config.dim == 0 || config.hyperedges == 0) {
    throw InvalidArgument("init_parameters: dim and hyperedges must be positive");
  }
  std::mt19937_64 rng(seed);
  const std::size_t d = config.dim;
  ParameterStore store;
  store.add(user_embedding_slot(), xavier_uniform(num_users, d, rng));
  store.add(item_embedding_slot(), xavier_uniform(num_items, d, rng));
  for (std::size_t b = 0; b < num_behaviors; ++b) {
    store.add(hyper_user_slot(b), xavier_uniform(d, config.hyperedges, rng));
    store.add(hyper_item_slot(b), xavier_uniform(d, config.hyperedges, rng));
  }
  add_logic_operator(store, conjunction_prefix(), d, config.logic_hidden(), rng);
  add_logic_operator(store, disjunction_prefix(), d, config.logic_hidden(), rng);
  store.add("head.w_h", xavier_uniform(2 * d, d, rng));
  store.add("head.b_h", Matrix(1, d));
  store.add("head.w_o", xavier_uniform(d, 1, rng));
  store.add("head.b_o", Matrix(1, 1));
  return store;
}

PredictionHead head_from(const ParameterStore& store) {
  return {store.slot("head.w_h").value, store.slot("head.b_h").value,
          store.slot("head.w_o").value, store.slot("head.b_o").value};
}

double prediction_logit(const PredictionHead& head, std::span<const double> mediator) {
  require_shape(mediator.size() == head.w_h.rows(), "prediction head: mediator width != 2d");
  double out = head.b_o(0, 0);
  for (std::size_t c = 0; c < head.w_h.cols(); ++c) {
    double z = head.b_h(0, c);
    for (std::size_t r = 0; r < mediator.size(); ++r) z += mediator[r] * head.w_h(r, c);
    if (z > 0.0) out += z * head.w_o(c, 0);
  }
  return out;
}

double predict(const PredictionHead& head, std::span<const double> mediator) {
  const double x = prediction_logit(head, mediator);
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double auxiliary_task_score(std::uint32_t user, std::uint32_t item, std::size_t behavior,
                            const CascadeState& cascade, const PredictionHead& head) {
  const auto& agg = cascade.behaviors.at(behavior).agg;
  return predict(head, strong_mediator(agg.user.row(user), agg.item.row(item)).row(0));
}

double bpr_loss(double pos_logit, double neg_logit) {
  const double x = pos_logit - neg_logit;
  // -log σ(x) = log(1 + e^{-x})
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double multi_task_loss(std::span<const double> per_behavior, double lambda,
                       const ParameterStore& store) {
  double loss = 0.0;
  for (const double l : per_behavior) loss += l;
  double reg = 0.0;
  for (const auto& s : store.slots()) {
    for (const double v : s.value.values()) reg += v * v;
  }
  return loss + lambda * reg;
}

LogicVars logic_vars(Tape& tape, ParameterStore& store, const std::string& prefix) {
  return {tape.parameter(store, prefix + ".w1"), tape.parameter(store, prefix + ".b1"),
          tape.parameter(store, prefix + ".w2"), tape.parameter(store, prefix + ".b2")};
}

HeadVars head_vars(Tape& tape, ParameterStore& store) {
  return {tape.parameter(store, "head.w_h"), tape.parameter(store, "head.b_h"),
          tape.parameter(store, "head.w_o"), tape.parameter(store, "head.b_o")};
}

namespace {

Var apply_logic(Tape& tape, const LogicVars& op, Var input) {
  const Var hidden = tape.relu(tape.add_row_bias(tape.matmul(input, op.w1), op.b1));
  return tape.add_row_bias(tape.matmul(hidden, op.w2), op.b2);
}

}  // namespace

Var tape_mediators(Tape& tape, const CascadeVars& cascade, std::span<const PairRequest> requests,
                   const LogicVars& conjunction, const LogicVars& disjunction) {
  if (requests.empty()) throw InvalidArgument("tape_mediators: no requests");
  std::map<std::pair<MediatorOp, std::size_t>, std::vector<std::uint32_t>> groups;
  for (std::uint32_t k = 0; k < requests.size(); ++k) {
    const auto& p = requests[k].plan;
    if (p.behavior >= cascade.behaviors.size()) {
      throw InvalidArgument("tape_mediators: plan behavior out of range");
    }
    groups[{p.op, p.behavior}].push_back(k);
  }

  std::vector<Var> parts;
  std::vector<std::uint32_t> position(requests.size());
  std::uint32_t offset = 0;
  for (const auto& [key, members] : groups) {
    const auto& [op, b] = key;
    const BehaviorVars& bv = cascade.behaviors[b];
    std::vector<std::uint32_t> users;
    std::vector<std::uint32_t> items;
    std::vector<std::vector<std::uint32_t>> support;
    for (const auto k : members) {
      users.push_back(requests[k].user);
      items.push_back(requests[k].item);
      support.push_back(requests[k].plan.neighbors);
      position[k] = offset++;
    }
    const Var u = tape.gather_rows(bv.agg.user, users);
    Var m;
    switch (op) {
      case MediatorOp::Concat: {
        const Var parts2[] = {u, tape.gather_rows(bv.agg.item, items)};
        m = tape.concat_cols(parts2);
        break;
      }
      case MediatorOp::Conjunction:
      case MediatorOp::Disjunction: {
        const Var space = op == MediatorOp::Conjunction ? bv.col.item : bv.sem.item;
        const Var parts3[] = {u, tape.gather_rows(space, items),
                              tape.gather_mean_rows(space, std::move(support))};
        m = apply_logic(tape, op == MediatorOp::Conjunction ? conjunction : disjunction,
                        tape.concat_cols(parts3));
        break;
      }
    }
    parts.push_back(m);
  }
  const Var stacked = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
  return tape.gather_rows(stacked, std::move(position));
}

Var tape_logits(Tape& tape, Var mediators, const HeadVars& head) {
  const Var hidden = tape.relu(tape.add_row_bias(tape.matmul(mediators, head.w_h), head.b_h));
  return tape.add_row_bias(tape.matmul(hidden, head.w_o), head.b_o);
}

ReasoningPlan auxiliary_plan(const InteractionDataset& train, std::size_t behavior,
                             std::uint32_t user, std::uint32_t item, const CascadeState& cascade,
                             const RetrievalIndices& indices, const ModelConfig& config) {
  if (config.auxiliary == AuxiliaryScoring::Direct || !config.ablation.rea) {
    ReasoningPlan plan;
    plan.behavior = behavior;
    return plan;
  }
  ChainObservation obs = observe_chain(train, user, item);
  obs.flags.resize(behavior + 1);
  if (!config.train_label_visible) obs.flags.back() = false;
  return plan_reasoning(obs, user, item, cascade, indices, config);
}

ReasoningPlan target_plan(const InteractionDataset& train, std::uint32_t user, std::uint32_t item,
                          const CascadeState& cascade, const RetrievalIndices& indices,
                          const ModelConfig& config) {
  ChainObservation obs = observe_chain(train, user, item);
  if (!config.train_label_visible) obs.flags.back() = false;
  return plan_reasoning(obs, user, item, cascade, indices, config);
}

Model::Model(InteractionDataset train, ParameterStore store, ModelConfig config,
             HnswParams index_params)
    : train_(std::make_unique<InteractionDataset>(std::move(train))),
      store_(std::make_unique<ParameterStore>(std::move(store))),
      config_(std::move(config)) {
  const GraphSet graphs = GraphSet::from_dataset(*train_);
  cascade_ = std::make_unique<CascadeState>(compute_cascade(graphs, *store_, config_));
  indices_ = std::make_unique<RetrievalIndices>(
      build_retrieval_indices(*cascade_, config_.index_mode, index_params));
  head_ = head_from(*store_);
  reasoner_ = std::make_unique<Reasoner>(*cascade_, *indices_,
                                         logic_operator_from(*store_, conjunction_prefix()),
                                         logic_operator_from(*store_, disjunction_prefix()),
                                         config_);
}

ScoredPair Model::score(std::uint32_t user, std::uint32_t item) const {
  return score(user, item, observe_chain(*train_, user, item));
}

ScoredPair Model::score(std::uint32_t user, std::uint32_t item,
                        const ChainObservation& obs) const {
  if (obs.size() != train_->num_behaviors()) {
    throw InvalidArgument("Model::score: observation length != number of behaviors");
  }
  auto [mediator, trace] = reasoner_->reason(user, item, obs);
  ScoredPair out;
  out.logit = prediction_logit(head_, mediator.values.row(0));
  out.score = out.logit >= 0.0 ? 1.0 / (1.0 + std::exp(-out.logit))
                               : std::exp(out.logit) / (1.0 + std::exp(out.logit));
  trace.score = out.score;
  out.trace = std::move(trace);
  return out;
}

}  // namespace cnre
