#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "cnre_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string("\"") + CNRE_CLI_PATH + "\" " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > \"" + (workdir() / stdout_file).string() + "\"";
  cmd += " 2> \"" + (workdir() / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Synthesizes data once and trains for two epochs.
struct Run {
  fs::path data = workdir() / "data";
  fs::path out = workdir() / "run";
  fs::path manifest = data / "manifest.json";
  fs::path ckpt = out / "model.ckpt";
  std::string user, item;
  int train_rc = -1;
  Run() {
    REQUIRE(run("synth -o \"" + data.string() + "\" --users 20 --items 15 --seed 3") == 0);
    json m = json::parse(slurp(manifest));
    m["train"]["epochs"] = 2;
    m["model"]["dim"] = 4;
    m["model"]["hyperedges"] = 2;
    m["sweep"]["layer_grid"] = {{1, 1, 1}};
    m["sweep"]["drop_fractions"] = {0.5};
    std::ofstream(manifest) << m.dump(2);
    train_rc = run("train -m \"" + manifest.string() + "\" -o \"" + out.string() + "\"", "train_stdout.txt");
    const auto first = lines_of(data / "buy.tsv").at(0);
    user = first.substr(0, first.find('\t'));
    item = first.substr(first.find('\t') + 1);
  }
  std::string common() const {
    return " -m \"" + manifest.string() + "\" -c \"" + ckpt.string() + "\" -o \"" + out.string() + "\"";
  }
};

const Run& trained() {
  static const Run r;
  return r;
}

}  // namespace

TEST_CASE("train writes a log, a checkpoint and the resolved manifest") {
  const auto& r = trained();
  REQUIRE(r.train_rc == 0);
  CHECK(fs::exists(r.ckpt));
  CHECK(fs::exists(r.out / "manifest.json"));
  const auto log = lines_of(r.out / "train.log");
  REQUIRE(log.size() == 2);
  const std::regex line(R"(^\d+\t[-+0-9.eE]+\t[0-9.eE+-]+$)");
  for (const auto& l : log) CHECK(std::regex_match(l, line));
  CHECK(lines_of(workdir() / "train_stdout.txt") == log);
}

TEST_CASE("eval prints a record and writes tables") {
  const auto& r = trained();
  REQUIRE(run("eval" + r.common() + " -k 1,10", "eval_stdout.txt") == 0);
  const auto j = json::parse(lines_of(workdir() / "eval_stdout.txt").at(0));
  CHECK(j["hr"].contains("10"));
  CHECK(j["hr"]["10"].get<double>() >= j["hr"]["1"].get<double>());
  CHECK(fs::exists(r.out / "metrics.jsonl"));
  CHECK(lines_of(r.out / "metrics.tsv").at(0) == "group\tusers\tk\thr\tndcg");

  REQUIRE(run("eval --memorized" + r.common()) == 0);
  CHECK(fs::exists(r.out / "metrics_memorized.jsonl"));
}

TEST_CASE("explain and counterfactual append JSON lines") {
  const auto& r = trained();
  const std::string pair = " -u " + r.user + " -i " + r.item;
  REQUIRE(run("explain" + r.common() + pair) == 0);
  const auto rec = json::parse(lines_of(r.out / "explanations.jsonl").back());
  CHECK(rec["user"] == r.user);
  CHECK(rec["item"] == r.item);

  REQUIRE(run("counterfactual" + r.common() + pair + " --drop buy") == 0);
  const auto cf = json::parse(lines_of(r.out / "counterfactuals.jsonl").back());
  CHECK(cf["transition"] == "downgrade");
  CHECK(cf["base"]["path"] == "Strong; Direct");

  CHECK(run("counterfactual" + r.common() + pair + " --drop buy --add view") == 2);
  CHECK(run("counterfactual" + r.common() + pair + " --add buy") == 2);
  CHECK(run("explain" + r.common() + " -u nobody -i " + r.item) == 2);
}

TEST_CASE("sweeps write tables") {
  const auto& r = trained();
  REQUIRE(run("sweep -m \"" + r.manifest.string() + "\" -k layers -o \"" + r.out.string() + "\"") == 0);
  const auto rows = lines_of(r.out / "sweep_layers.tsv");
  CHECK(rows.size() >= 2);
  REQUIRE(run("sweep -m \"" + r.manifest.string() + "\" -k robustness -o \"" + r.out.string() + "\"") == 0);
  CHECK(lines_of(r.out / "sweep_robustness.tsv").size() >= 2);
}

TEST_CASE("exit codes") {
  const auto& r = trained();
  CHECK(run("") != 0);
  CHECK(run("train") == 2);
  CHECK(run("frobnicate") == 2);

  const auto bad = workdir() / "bad.json";
  std::ofstream(bad) << R"({"behaviors": [{"name": "buy", "path": "nope.tsv"}]})";
  CHECK(run("train -m \"" + bad.string() + "\"") == 2);
  CHECK(slurp(workdir() / "stderr.txt").find("nope.tsv") != std::string::npos);

  const auto junk = workdir() / "junk.ckpt";
  std::ofstream(junk) << "definitely not a checkpoint";
  CHECK(run("eval -m \"" + r.manifest.string() + "\" -c \"" + junk.string() + "\"") == 2);

  // a checkpoint from differently shaped data is incompatible
  const auto other = workdir() / "other";
  REQUIRE(run("synth -o \"" + other.string() + "\" --users 12 --items 9") == 0);
  CHECK(run("eval -m \"" + (other / "manifest.json").string() + "\" -c \"" + r.ckpt.string() + "\"") == 2);

  json m = json::parse(slurp(r.manifest));
  m["train"]["lr"] = 1e300;
  m["train"]["epochs"] = 3;
  const auto blow = r.data / "blowup.json";
  std::ofstream(blow) << m.dump();
  CHECK(run("train -m \"" + blow.string() + "\" -o \"" + (workdir() / "blow").string() + "\"") == 3);
}
