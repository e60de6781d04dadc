#include "cnre/reasoning.hpp"

#include <cmath>

#include "cnre/error.hpp"
#include "cnre/kernels.hpp"

namespace cnre {

std::string to_string(PreferenceStrength s) {
  switch (s) {
    case PreferenceStrength::Strong: return "Strong";
    case PreferenceStrength::Medium: return "Medium";
    case PreferenceStrength::Weak: return "Weak";
    case PreferenceStrength::Default: return "Default";
  }
  return "Default";
}

PreferenceStrength parse_preference_strength(const std::string& s) {
  if (s == "Strong") return PreferenceStrength::Strong;
  if (s == "Medium") return PreferenceStrength::Medium;
  if (s == "Weak") return PreferenceStrength::Weak;
  if (s == "Default") return PreferenceStrength::Default;
  throw ParseError("unknown preference strength '" + s + "'");
}

std::string to_string(RetrievalSpace s) {
  switch (s) {
    case RetrievalSpace::Collaborative: return "collaborative";
    case RetrievalSpace::Semantic: return "semantic";
    case RetrievalSpace::None: return "none";
  }
  return "none";
}

std::string to_string(MediatorOp op) {
  switch (op) {
    case MediatorOp::Conjunction: return "conjunction";
    case MediatorOp::Disjunction: return "disjunction";
    case MediatorOp::Concat: return "concat";
  }
  return "concat";
}

std::size_t ChainObservation::auxiliary_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k + 1 < flags.size(); ++k) n += flags[k] ? 1 : 0;
  return n;
}

std::uint64_t ChainObservation::bits() const {
  std::uint64_t b = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k]) b |= std::uint64_t{1} << k;
  }
  return b;
}

ChainObservation ChainObservation::from_bits(std::uint64_t bits, std::size_t n) {
  ChainObservation obs;
  obs.flags.resize(n);
  for (std::size_t k = 0; k < n; ++k) obs.flags[k] = (bits >> k) & 1U;
  return obs;
}

ChainObservation observe_chain(const InteractionDataset& train, std::uint32_t user,
                               std::uint32_t item) {
  if (user >= train.num_users() || item >= train.num_items()) {
    throw InvalidArgument("observe_chain: index out of range");
  }
  ChainObservation obs;
  obs.flags.reserve(train.num_behaviors());
  for (const auto& e : train.edges) obs.flags.push_back(e.contains(user, item));
  return obs;
}

PreferenceStrength dispatch(const ChainObservation& obs) {
  if (obs.flags.empty()) throw InvalidArgument("dispatch: empty observation");
  if (obs.target()) return PreferenceStrength::Strong;
  switch (obs.auxiliary_count()) {
    case 0: return PreferenceStrength::Default;
    case 1: return PreferenceStrength::Weak;
    default: return PreferenceStrength::Medium;
  }
}

std::optional<std::size_t> chain_behavior(const ChainObservation& obs) {
  for (std::size_t k = obs.size() - 1; k-- > 0;) {
    if (obs.flags[k]) return k;
  }
  return std::nullopt;
}

double confidence_score(std::span<const double> user, std::span<const double> item) {
  require_shape(user.size() == item.size(), "confidence_score: widths differ");
  const double x = kernels::dot(user, item);
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Matrix strong_mediator(std::span<const double> user, std::span<const double> item) {
  Matrix m(1, user.size() + item.size());
  std::copy(user.begin(), user.end(), m.values().begin());
  std::copy(item.begin(), item.end(), m.values().begin() + static_cast<std::ptrdiff_t>(user.size()));
  return m;
}

std::string conjunction_prefix() { return "conj"; }
std::string disjunction_prefix() { return "disj"; }

LogicOperator logic_operator_from(const ParameterStore& store, const std::string& prefix) {
  return {store.slot(prefix + ".w1").value, store.slot(prefix + ".b1").value,
          store.slot(prefix + ".w2").value, store.slot(prefix + ".b2").value};
}

Matrix apply_logic_operator(const LogicOperator& op, std::span<const double> user,
                            std::span<const double> item, std::span<const double> support) {
  const std::size_t in = user.size() + item.size() + support.size();
  require_shape(op.w1.rows() == in, "logic operator: W1 rows != 3d");
  require_shape(op.b1.rows() == 1 && op.b1.cols() == op.w1.cols(), "logic operator: b1 shape");
  require_shape(op.w2.rows() == op.w1.cols(), "logic operator: W2 rows != hidden width");
  require_shape(op.b2.rows() == 1 && op.b2.cols() == op.w2.cols(), "logic operator: b2 shape");

  Matrix x(1, in);
  auto xv = x.values();
  std::copy(user.begin(), user.end(), xv.begin());
  std::copy(item.begin(), item.end(), xv.begin() + static_cast<std::ptrdiff_t>(user.size()));
  std::copy(support.begin(), support.end(),
            xv.begin() + static_cast<std::ptrdiff_t>(user.size() + item.size()));

  Matrix hidden = kernels::serial::matmul(x, op.w1);
  for (std::size_t c = 0; c < hidden.cols(); ++c) {
    const double v = hidden(0, c) + op.b1(0, c);
    hidden(0, c) = v > 0.0 ? v : 0.0;
  }
  Matrix out = kernels::serial::matmul(hidden, op.w2);
  for (std::size_t c = 0; c < out.cols(); ++c) out(0, c) += op.b2(0, c);
  require_finite(out, "logic operator");
  return out;
}

Matrix conjunction_mediator(std::span<const double> user, std::span<const double> item_col,
                            std::span<const double> support_col, const LogicOperator& params) {
  return apply_logic_operator(params, user, item_col, support_col);
}

Matrix disjunction_mediator(std::span<const double> user, std::span<const double> item_sem,
                            std::span<const double> support_sem, const LogicOperator& params) {
  return apply_logic_operator(params, user, item_sem, support_sem);
}

RetrievalIndices build_retrieval_indices(const CascadeState& cascade, IndexMode mode,
                                         const HnswParams& params) {
  RetrievalIndices idx;
  for (const auto& b : cascade.behaviors) {
    idx.collaborative.emplace_back(b.col.item, mode, params);
    idx.semantic.emplace_back(b.sem.item, mode, params);
  }
  return idx;
}

ReasoningPlan plan_reasoning(const ChainObservation& obs, std::uint32_t user, std::uint32_t item,
                             const CascadeState& cascade, const RetrievalIndices& indices,
                             const ModelConfig& config) {
  if (obs.size() == 0 || obs.size() > cascade.behaviors.size()) {
    throw InvalidArgument("plan_reasoning: observation length does not fit the cascade");
  }
  const std::size_t target = obs.size() - 1;
  const Ablation& ab = config.ablation;

  ReasoningPlan plan;
  plan.behavior = target;
  if (!ab.rea) return plan;  // Default path, concat of the final cascaded embeddings

  plan.path = dispatch(obs);
  switch (plan.path) {
    case PreferenceStrength::Strong:
    case PreferenceStrength::Default:
      break;
    case PreferenceStrength::Medium: {
      const std::size_t b = *chain_behavior(obs);
      plan.behavior = b;
      const auto& emb = cascade.behaviors[b].agg;
      plan.confidence = confidence_score(emb.user.row(user), emb.item.row(item));
      if (*plan.confidence < config.tau && ab.cnj) {
        plan.space = RetrievalSpace::Collaborative;
        plan.neighbors = indices.collaborative.at(b).query_item(item, config.neighbors).ids;
        plan.op = MediatorOp::Conjunction;
      }
      break;
    }
    case PreferenceStrength::Weak: {
      const std::size_t b = *chain_behavior(obs);
      plan.behavior = b;
      if (ab.dsj) {
        plan.space = RetrievalSpace::Semantic;
        plan.neighbors = indices.semantic.at(b).query_item(item, config.neighbors).ids;
        plan.op = MediatorOp::Disjunction;
      }
      break;
    }
  }
  return plan;
}

namespace {

Matrix mean_rows(const Matrix& space, const std::vector<std::uint32_t>& ids) {
  Matrix out(1, space.cols());
  if (ids.empty()) return out;
  auto dst = out.row(0);
  for (const auto id : ids) {
    const auto src = space.row(id);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : dst) v *= inv;
  return out;
}

}  // namespace

Matrix build_mediator(const ReasoningPlan& plan, std::uint32_t user, std::uint32_t item,
                      const CascadeState& cascade, const LogicOperator& conjunction,
                      const LogicOperator& disjunction) {
  const BehaviorEmbeddings& b = cascade.behaviors.at(plan.behavior);
  switch (plan.op) {
    case MediatorOp::Concat:
      return strong_mediator(b.agg.user.row(user), b.agg.item.row(item));
    case MediatorOp::Conjunction: {
      const Matrix support = mean_rows(b.col.item, plan.neighbors);
      return conjunction_mediator(b.agg.user.row(user), b.col.item.row(item), support.row(0),
                                  conjunction);
    }
    case MediatorOp::Disjunction: {
      const Matrix support = mean_rows(b.sem.item, plan.neighbors);
      return disjunction_mediator(b.agg.user.row(user), b.sem.item.row(item), support.row(0),
                                  disjunction);
    }
  }
  throw InvalidArgument("build_mediator: unknown operator");
}

Reasoner::Reasoner(const CascadeState& cascade, const RetrievalIndices& indices,
                   LogicOperator conjunction, LogicOperator disjunction, ModelConfig config)
    : cascade_(&cascade),
      indices_(&indices),
      conjunction_(std::move(conjunction)),
      disjunction_(std::move(disjunction)),
      config_(std::move(config)) {}

std::pair<MediatorEmbedding, ReasoningTrace> Reasoner::reason(std::uint32_t user,
                                                              std::uint32_t item,
                                                              const ChainObservation& obs) const {
  ReasoningTrace trace;
  trace.chain = obs;
  trace.tau = config_.tau;
  trace.plan = plan_reasoning(obs, user, item, *cascade_, *indices_, config_);
  trace.mediator = build_mediator(trace.plan, user, item, *cascade_, conjunction_, disjunction_);
  MediatorEmbedding m{trace.mediator, trace.plan.path};
  return {std::move(m), std::move(trace)};
}

}  // namespace cnre
