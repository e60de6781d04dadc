#include "cnre/config.hpp"

#include "cnre/error.hpp"
#include "json_config.hpp"

namespace cnre {

std::string to_string(HypergraphScale s) {
  switch (s) {
    case HypergraphScale::Mean: return "mean";
    case HypergraphScale::Trace: return "trace";
    case HypergraphScale::None: return "none";
  }
  return "none";
}
std::string to_string(IndexMode m) { return m == IndexMode::Approximate ? "approximate" : "exact"; }
std::string to_string(AuxiliaryScoring a) {
  return a == AuxiliaryScoring::Reasoned ? "reasoned" : "direct";
}

HypergraphScale parse_hypergraph_scale(const std::string& s) {
  if (s == "none") return HypergraphScale::None;
  if (s == "mean") return HypergraphScale::Mean;
  if (s == "trace") return HypergraphScale::Trace;
  throw ParseError("hypergraph_scale must be \"none\", \"mean\" or \"trace\", got \"" + s + "\"");
}

IndexMode parse_index_mode(const std::string& s) {
  if (s == "exact") return IndexMode::Exact;
  if (s == "approximate") return IndexMode::Approximate;
  throw ParseError("index_mode must be \"exact\" or \"approximate\", got \"" + s + "\"");
}

AuxiliaryScoring parse_auxiliary_scoring(const std::string& s) {
  if (s == "direct") return AuxiliaryScoring::Direct;
  if (s == "reasoned") return AuxiliaryScoring::Reasoned;
  throw ParseError("auxiliary_scoring must be \"direct\" or \"reasoned\", got \"" + s + "\"");
}

namespace detail {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) throw ParseError(where + ": unknown key \"" + key + "\"");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const Ablation& a) {
  return {{"hpp", a.hpp}, {"par", a.par}, {"prj", a.prj},
          {"rea", a.rea}, {"cnj", a.cnj}, {"dsj", a.dsj}};
}

Ablation ablation_from_json(const json& j) {
  reject_unknown_keys(j, {"hpp", "par", "prj", "rea", "cnj", "dsj"}, "ablation");
  Ablation a;
  read(j, "hpp", a.hpp, "ablation");
  read(j, "par", a.par, "ablation");
  read(j, "prj", a.prj, "ablation");
  read(j, "rea", a.rea, "ablation");
  read(j, "cnj", a.cnj, "ablation");
  read(j, "dsj", a.dsj, "ablation");
  return a;
}

json to_json(const ModelConfig& m) {
  return {{"dim", m.dim},
          {"hyperedges", m.hyperedges},
          {"layer_counts", m.layer_counts},
          {"projection_eps", m.projection_eps},
          {"hypergraph_scale", to_string(m.hypergraph_scale)},
          {"tau", m.tau},
          {"neighbors", m.neighbors},
          {"index_mode", to_string(m.index_mode)},
          {"auxiliary_scoring", to_string(m.auxiliary)},
          {"train_label_visible", m.train_label_visible},
          {"ablation", to_json(m.ablation)}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig m) {
  const std::string where = "model";
  reject_unknown_keys(j,
                      {"dim", "hyperedges", "layer_counts", "projection_eps", "hypergraph_scale",
                       "tau", "neighbors", "index_mode", "auxiliary_scoring", "train_label_visible",
                       "ablation"},
                      where);
  read(j, "dim", m.dim, where);
  read(j, "hyperedges", m.hyperedges, where);
  read(j, "layer_counts", m.layer_counts, where);
  read(j, "projection_eps", m.projection_eps, where);
  read(j, "tau", m.tau, where);
  read(j, "neighbors", m.neighbors, where);
  std::string s;
  if (j.contains("hypergraph_scale")) {
    read(j, "hypergraph_scale", s, where);
    m.hypergraph_scale = parse_hypergraph_scale(s);
  }
  if (j.contains("index_mode")) {
    read(j, "index_mode", s, where);
    m.index_mode = parse_index_mode(s);
  }
  if (j.contains("auxiliary_scoring")) {
    read(j, "auxiliary_scoring", s, where);
    m.auxiliary = parse_auxiliary_scoring(s);
  }
  read(j, "train_label_visible", m.train_label_visible, where);
  if (j.contains("ablation")) m.ablation = ablation_from_json(j.at("ablation"));
  if (m.dim == 0 || m.hyperedges == 0 || m.neighbors == 0) {
    throw ParseError("model: dim, hyperedges and neighbors must be positive");
  }
  if (!(m.projection_eps > 0.0)) throw ParseError("model: projection_eps must be > 0");
  return m;
}

json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"lambda", t.lambda},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"seed", t.seed},
          {"index_refresh_epochs", t.index_refresh_epochs}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig t) {
  const std::string where = "train";
  reject_unknown_keys(j,
                      {"lr", "lambda", "beta1", "beta2", "adam_eps", "batch_size", "epochs",
                       "seed", "index_refresh_epochs"},
                      where);
  read(j, "lr", t.lr, where);
  read(j, "lambda", t.lambda, where);
  read(j, "beta1", t.beta1, where);
  read(j, "beta2", t.beta2, where);
  read(j, "adam_eps", t.adam_eps, where);
  read(j, "batch_size", t.batch_size, where);
  read(j, "epochs", t.epochs, where);
  read(j, "seed", t.seed, where);
  read(j, "index_refresh_epochs", t.index_refresh_epochs, where);
  if (!(t.lr > 0.0) || t.lambda < 0.0 || t.batch_size == 0 || t.index_refresh_epochs == 0) {
    throw ParseError("train: lr, batch_size, index_refresh_epochs must be positive; lambda >= 0");
  }
  return t;
}

}  // namespace detail
}  // namespace cnre
