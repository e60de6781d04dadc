#include "cnre/explain.hpp"

#include <algorithm>

#include <json.hpp>

#include "cnre/error.hpp"

namespace cnre {

using nlohmann::json;

std::string path_label(const ReasoningPlan& plan) {
  switch (plan.path) {
    case PreferenceStrength::Strong: return "Strong; Direct";
    case PreferenceStrength::Medium:
      return plan.op == MediatorOp::Conjunction ? "Medium; Conjunction" : "Medium; Direct";
    case PreferenceStrength::Weak:
      return plan.op == MediatorOp::Disjunction ? "Weak; Disjunction" : "Weak; Direct";
    case PreferenceStrength::Default: return "Default";
  }
  return "Default";
}

namespace {

std::uint32_t lookup(const IdMap& map, const std::string& raw, const char* what) {
  const auto id = map.find(raw);
  if (!id) throw InvalidArgument(std::string("unknown ") + what + " id '" + raw + "'");
  return *id;
}

ExplanationStep make_step(std::string kind, const std::string& behavior) {
  ExplanationStep s;
  s.kind = std::move(kind);
  s.behavior = behavior;
  return s;
}

}  // namespace

ExplanationRecord explain(const Model& model, std::uint32_t user, std::uint32_t item,
                          const ChainObservation& obs) {
  const InteractionDataset& train = model.train();
  const ScoredPair s = model.score(user, item, obs);
  const ReasoningPlan& plan = s.trace.plan;
  const std::string& behavior = train.behaviors.names.at(plan.behavior);

  ExplanationRecord r;
  r.user = train.users.decode(user);
  r.item = train.items.decode(item);
  for (std::size_t b = 0; b < obs.size(); ++b) r.chain.emplace_back(train.behaviors.names[b], obs.flags[b]);
  r.path = path_label(plan);
  if (plan.confidence) {
    ExplanationStep step = make_step("confidence", behavior);
    step.value = *plan.confidence;
    step.threshold = s.trace.tau;
    r.steps.push_back(std::move(step));
  }
  if (plan.space != RetrievalSpace::None) {
    ExplanationStep step = make_step("retrieve", behavior);
    step.space = to_string(plan.space);
    for (const auto id : plan.neighbors) step.neighbors.push_back(train.items.decode(id));
    r.steps.push_back(std::move(step));
  }
  ExplanationStep op = make_step("operator", behavior);
  op.op = to_string(plan.op);
  r.steps.push_back(std::move(op));
  r.score = s.score;
  return r;
}

ExplanationRecord explain(const Model& model, const std::string& user, const std::string& item) {
  const auto u = lookup(model.train().users, user, "user");
  const auto i = lookup(model.train().items, item, "item");
  return explain(model, u, i, observe_chain(model.train(), u, i));
}

namespace {

json step_json(const ExplanationStep& s) {
  json j = {{"kind", s.kind}, {"behavior", s.behavior}};
  if (s.value) j["value"] = *s.value;
  if (s.threshold) j["threshold"] = *s.threshold;
  if (s.space) j["space"] = *s.space;
  if (s.kind == "retrieve") j["neighbors"] = s.neighbors;
  if (s.op) j["op"] = *s.op;
  return j;
}

json record_json(const ExplanationRecord& r) {
  json chain = json::array();
  for (const auto& [name, flag] : r.chain) chain.push_back({{"behavior", name}, {"observed", flag}});
  json steps = json::array();
  for (const auto& s : r.steps) steps.push_back(step_json(s));
  return {{"user", r.user}, {"item", r.item}, {"chain", chain},
          {"path", r.path}, {"steps", steps}, {"score", r.score}};
}

}  // namespace

std::string to_json_line(const ExplanationRecord& record) { return record_json(record).dump(); }

ExplanationRecord parse_explanation(const std::string& line) {
  try {
    const json j = json::parse(line);
    ExplanationRecord r;
    r.user = j.at("user").get<std::string>();
    r.item = j.at("item").get<std::string>();
    for (const auto& c : j.at("chain")) {
      r.chain.emplace_back(c.at("behavior").get<std::string>(), c.at("observed").get<bool>());
    }
    r.path = j.at("path").get<std::string>();
    for (const auto& sj : j.at("steps")) {
      ExplanationStep s;
      s.kind = sj.at("kind").get<std::string>();
      s.behavior = sj.at("behavior").get<std::string>();
      if (sj.contains("value")) s.value = sj.at("value").get<double>();
      if (sj.contains("threshold")) s.threshold = sj.at("threshold").get<double>();
      if (sj.contains("space")) s.space = sj.at("space").get<std::string>();
      if (sj.contains("neighbors")) s.neighbors = sj.at("neighbors").get<std::vector<std::string>>();
      if (sj.contains("op")) s.op = sj.at("op").get<std::string>();
      r.steps.push_back(std::move(s));
    }
    r.score = j.at("score").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed explanation record: ") + e.what());
  }
}

ChainObservation apply_edit(const ChainObservation& obs, const BehaviorSpec& behaviors,
                            const CounterfactualEdit& edit) {
  const auto b = behaviors.find(edit.behavior);
  if (!b) throw InvalidArgument("counterfactual: unknown behavior '" + edit.behavior + "'");
  if (obs.size() != behaviors.size()) {
    throw InvalidArgument("counterfactual: observation length != number of behaviors");
  }
  ChainObservation out = obs;
  const bool present = obs.flags[*b];
  if (edit.kind == CounterfactualEdit::Kind::Drop) {
    if (!present) throw InvalidArgument("counterfactual: cannot drop absent behavior '" + edit.behavior + "'");
    out.flags[*b] = false;
  } else {
    if (present) throw InvalidArgument("counterfactual: cannot add present behavior '" + edit.behavior + "'");
    out.flags[*b] = true;
  }
  return out;
}

namespace {

std::vector<std::string> neighbors_of(const ExplanationRecord& r) {
  for (const auto& s : r.steps) {
    if (s.kind == "retrieve") return s.neighbors;
  }
  return {};
}

std::vector<std::string> missing_from(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
  std::vector<std::string> out;
  for (const auto& x : a) {
    if (std::find(b.begin(), b.end(), x) == b.end()) out.push_back(x);
  }
  return out;
}

}  // namespace

CounterfactualResult counterfactual(const Model& model, const std::string& user,
                                    const std::string& item, const CounterfactualEdit& edit) {
  const InteractionDataset& train = model.train();
  const auto u = lookup(train.users, user, "user");
  const auto i = lookup(train.items, item, "item");
  const ChainObservation base_obs = observe_chain(train, u, i);
  const ChainObservation edited_obs = apply_edit(base_obs, train.behaviors, edit);

  CounterfactualResult r;
  r.base = explain(model, u, i, base_obs);
  r.edited = explain(model, u, i, edited_obs);
  const auto from = dispatch(base_obs);
  const auto to = dispatch(edited_obs);
  r.transition = to > from ? "upgrade" : to < from ? "downgrade" : "unchanged";
  const auto before = neighbors_of(r.base);
  const auto after = neighbors_of(r.edited);
  r.neighbors_added = missing_from(after, before);
  r.neighbors_removed = missing_from(before, after);
  r.score_delta = r.edited.score - r.base.score;
  return r;
}

std::string to_json_line(const CounterfactualResult& r) {
  const json j = {{"base", record_json(r.base)},
                  {"edited", record_json(r.edited)},
                  {"transition", r.transition},
                  {"neighbors_added", r.neighbors_added},
                  {"neighbors_removed", r.neighbors_removed},
                  {"score_delta", r.score_delta}};
  return j.dump();
}

}  // namespace cnre
