#include "cnre/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cnre/error.hpp"
#include "json_config.hpp"

namespace cnre {

using detail::json;

namespace {

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

SweepSpec parse_sweep(const json& j) {
  detail::reject_unknown_keys(j, {"layer_grid", "drop_fractions", "user_fraction", "seed"}, "sweep");
  SweepSpec s;
  if (j.contains("layer_grid")) s.layer_grid = get<std::vector<std::vector<std::size_t>>>(j, "layer_grid", "sweep");
  if (j.contains("drop_fractions")) s.drop_fractions = get<std::vector<double>>(j, "drop_fractions", "sweep");
  if (j.contains("user_fraction")) s.user_fraction = get<double>(j, "user_fraction", "sweep");
  if (j.contains("seed")) s.seed = get<std::uint64_t>(j, "seed", "sweep");
  for (const double f : s.drop_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ParseError("sweep.drop_fractions: values must lie in [0, 1]");
  }
  if (!(s.user_fraction >= 0.0 && s.user_fraction <= 1.0)) {
    throw ParseError("sweep.user_fraction must lie in [0, 1]");
  }
  return s;
}

}  // namespace

RunManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  detail::reject_unknown_keys(
      j, {"behaviors", "order", "model", "train", "split_seed", "ks", "out", "sweep"}, "manifest");

  RunManifest m;
  if (!j.contains("behaviors") || !j.at("behaviors").is_array() || j.at("behaviors").empty()) {
    throw ParseError("manifest.behaviors: expected a non-empty list");
  }
  for (const auto& b : j.at("behaviors")) {
    detail::reject_unknown_keys(b, {"name", "path"}, "manifest.behaviors[]");
    BehaviorFile f{get<std::string>(b, "name", "behaviors[]"),
                   get<std::string>(b, "path", "behaviors[]")};
    if (f.path.is_relative()) f.path = base_dir / f.path;
    if (!std::filesystem::is_regular_file(f.path)) {
      throw ParseError("manifest: data file for behavior '" + f.name + "' not found: " + f.path.string());
    }
    m.behaviors.push_back(std::move(f));
  }

  if (j.contains("order")) {
    const json& o = j.at("order");
    if (o.is_string()) {
      m.order = o.get<std::string>();
      if (m.order != "auto" && m.order != "spec") {
        throw ParseError("manifest.order must be \"auto\", \"spec\" or a list of behavior names");
      }
    } else {
      m.order = "list";
      m.order_list = get<std::vector<std::string>>(j, "order", "manifest");
      std::vector<std::string> listed;
      for (const auto& b : m.behaviors) listed.push_back(b.name);
      std::vector<std::string> a = m.order_list;
      std::sort(a.begin(), a.end());
      std::sort(listed.begin(), listed.end());
      if (a != listed) throw ParseError("manifest.order must list every behavior exactly once");
    }
  }
  if (j.contains("train")) m.train = detail::train_config_from_json(j.at("train"), m.train);
  if (j.contains("model")) m.train.model = detail::model_config_from_json(j.at("model"), m.train.model);
  if (j.contains("split_seed")) m.split_seed = get<std::uint64_t>(j, "split_seed", "manifest");
  if (j.contains("ks")) m.ks = get<std::vector<std::size_t>>(j, "ks", "manifest");
  if (m.ks.empty() || std::find(m.ks.begin(), m.ks.end(), 0U) != m.ks.end()) {
    throw ParseError("manifest.ks: expected positive cutoffs");
  }
  if (j.contains("out")) {
    m.out = get<std::string>(j, "out", "manifest");
    if (m.out.is_relative()) m.out = base_dir / m.out;
  } else {
    m.out = base_dir / m.out;
  }
  if (j.contains("sweep")) m.sweep = parse_sweep(j.at("sweep"));
  if (m.train.model.layer_counts.size() != m.behaviors.size()) {
    throw ParseError("model.layer_counts needs one entry per behavior (" +
                     std::to_string(m.behaviors.size()) + ")");
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path());
}

std::string to_json(const RunManifest& m) {
  json behaviors = json::array();
  for (const auto& b : m.behaviors) behaviors.push_back({{"name", b.name}, {"path", b.path.string()}});
  json j = {{"behaviors", behaviors},
            {"model", detail::to_json(m.train.model)},
            {"train", detail::to_json(m.train)},
            {"split_seed", m.split_seed},
            {"ks", m.ks},
            {"out", m.out.string()},
            {"sweep",
             {{"layer_grid", m.sweep.layer_grid},
              {"drop_fractions", m.sweep.drop_fractions},
              {"user_fraction", m.sweep.user_fraction},
              {"seed", m.sweep.seed}}}};
  if (m.order == "list") {
    j["order"] = m.order_list;
  } else {
    j["order"] = m.order;
  }
  return j.dump(2);
}

InteractionDataset load_run_dataset(const RunManifest& m) {
  BehaviorSpec spec;
  std::vector<std::filesystem::path> files;
  for (const auto& b : m.behaviors) {
    spec.names.push_back(b.name);
    files.push_back(b.path);
  }
  InteractionDataset data = load_dataset(files, spec);
  if (m.order == "auto") return data.reordered(compute_conversion_order(data));
  if (m.order == "list") {
    std::vector<std::size_t> order;
    for (const auto& name : m.order_list) order.push_back(*data.behaviors.find(name));
    return data.reordered(order);
  }
  return data;
}

}  // namespace cnre
