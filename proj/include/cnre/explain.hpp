#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnre/model.hpp"
#include "cnre/reasoning.hpp"

namespace cnre {

/// One executed reasoning step. Which fields are set depends on `kind`:
///   "confidence": behavior, value, threshold
///   "retrieve":   behavior, space, neighbors (raw item ids, nearest first)
///   "operator":   behavior, op
struct ExplanationStep {
  std::string kind;
  std::string behavior;
  std::optional<double> value;
  std::optional<double> threshold;
  std::optional<std::string> space;
  std::vector<std::string> neighbors;
  std::optional<std::string> op;

  friend bool operator==(const ExplanationStep&, const ExplanationStep&) = default;
};

struct ExplanationRecord {
  std::string user;
  std::string item;
  std::vector<std::pair<std::string, bool>> chain;  // (behavior, observed) in cascade order
  std::string path;                                 // e.g. "Medium; Conjunction"
  std::vector<ExplanationStep> steps;               // execution order
  double score = 0.0;

  friend bool operator==(const ExplanationRecord&, const ExplanationRecord&) = default;
};

/// "Strong; Direct", "Medium; Conjunction", "Medium; Direct", "Weak; Disjunction",
/// "Weak; Direct" or "Default".
std::string path_label(const ReasoningPlan& plan);

/// Runs reasoning once for a pair given by raw ids. Throws InvalidArgument on
/// an unknown id.
ExplanationRecord explain(const Model& model, const std::string& user, const std::string& item);
/// Same with dense indices and an explicit chain observation.
ExplanationRecord explain(const Model& model, std::uint32_t user, std::uint32_t item,
                          const ChainObservation& obs);

std::string to_json_line(const ExplanationRecord& record);
ExplanationRecord parse_explanation(const std::string& line);

struct CounterfactualEdit {
  enum class Kind { Drop, Add };
  Kind kind = Kind::Drop;
  std::string behavior;
};

/// Flips one flag. Throws InvalidArgument for an unknown behavior, dropping an
/// absent flag or adding a present one.
ChainObservation apply_edit(const ChainObservation& obs, const BehaviorSpec& behaviors,
                            const CounterfactualEdit& edit);

struct CounterfactualResult {
  ExplanationRecord base;
  ExplanationRecord edited;
  std::string transition;  // "upgrade", "downgrade" or "unchanged"
  std::vector<std::string> neighbors_added;
  std::vector<std::string> neighbors_removed;
  double score_delta = 0.0;  // edited − base
};

/// Re-runs reasoning on the edited chain; the model is not modified.
CounterfactualResult counterfactual(const Model& model, const std::string& user,
                                    const std::string& item, const CounterfactualEdit& edit);

std::string to_json_line(const CounterfactualResult& result);

}  // namespace cnre
