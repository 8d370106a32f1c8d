/*
 * Copyright 2026 The tk Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tk/csv.hpp"
#include "tk/experiment.hpp"
#include "tk/timestamp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

class Sandbox {
 public:
  Sandbox() {
    static int counter = 0;
    root_ = fs::temp_directory_path() /
            ("tk_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Sandbox() { fs::remove_all(root_); }
  const fs::path& root() const { return root_; }

  Outcome run(std::vector<std::string> args) const {
    args.insert(args.begin(), {"tk", "--root", root_.string()});
    return run_raw(args);
  }
  static Outcome run_raw(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = tk::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
  }

  fs::path write(const std::string& rel, const std::string& text) const {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << text;
    return p;
  }
  fs::path write_json(const std::string& rel, const json& j) const { return write(rel, j.dump(2)); }

 private:
  fs::path root_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

json lag_rule(double sigma, std::size_t n, std::uint64_t seed = 5) {
  return {{"name", "lag"},
          {"n", n},
          {"seed", seed},
          {"noise_std", sigma},
          {"rule",
           {{"terms",
             {{{"component", "x"}, {"lag", 1}, {"coef", 0.6}}, {{"component", "x"}, {"lag", 3}, {"coef", -0.3}}}}}}};
}

// Parses timestamp,x,y rows into per-column vectors.
std::vector<std::vector<double>> read_columns(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> cols;
  while (std::getline(in, line)) {
    const auto cells = tk::split_csv_line(line);
    if (cols.empty()) cols.resize(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) cols[c - 1].push_back(std::stod(cells[c]));
  }
  return cols;
}

json train_config(const std::string& name, const std::string& dataset, std::size_t epochs = 5) {
  return {{"name", name},
          {"dataset", dataset},
          {"task",
           {{"in_delays", {-4, 0}}, {"in_components", {"x"}}, {"out_delays", {0, 0}}, {"out_components", {"y"}}}},
          {"arch", {{"name", "mlp"}, {"hyperparams", {{"widths", {8}}}}}},
          {"train", {{"lr", 0.01}, {"max_epochs", epochs}, {"patience", 3}, {"seed", 2}}}};
}

// Synthesizes and imports the lag dataset; returns the sandbox-relative name.
void prepare_lag(const Sandbox& box, std::size_t n = 400) {
  box.write_json("synth.json", lag_rule(0.01, n));
  REQUIRE(box.run({"synth", "--config", (box.root() / "synth.json").string()}).code == 0);
  const auto o = box.run({"import", (box.root() / "synthetic/lag.csv").string(), "--meta",
                          (box.root() / "synthetic/lag.meta.json").string()});
  REQUIRE_MESSAGE(o.code == 0, o.err);
}

}  // namespace

TEST_CASE("synth with zero noise satisfies the lag rule exactly") {
  auto spec = tk::exp::synth_from_json(lag_rule(0.0, 500));
  const auto series = tk::exp::generate(spec);
  REQUIRE(series.values.size() == 500);
  for (std::size_t t = 3; t < series.values.size(); ++t) {
    const double expected = 0.6 * series.values[t - 1][0] - 0.3 * series.values[t - 3][0];
    CHECK(series.values[t][1] == doctest::Approx(expected).epsilon(0).scale(0).epsilon(1e-15));
  }
}

TEST_CASE("synth residual std matches the requested noise") {
  Sandbox box;
  box.write_json("s.json", lag_rule(0.01, 10000, 11));
  REQUIRE(box.run({"synth", "--config", (box.root() / "s.json").string()}).code == 0);
  const auto cols = read_columns(box.root() / "synthetic/lag.csv");
  REQUIRE(cols.size() == 2);
  const auto& x = cols[0];
  const auto& y = cols[1];
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 3; t < y.size(); ++t) {
    const double r = y[t] - (0.6 * x[t - 1] - 0.3 * x[t - 3]);
    sum += r;
    sq += r * r;
    ++n;
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  CHECK(sd >= 0.008);
  CHECK(sd <= 0.012);
}

TEST_CASE("synth gap pattern yields one more slice than gaps") {
  Sandbox box;
  json spec = lag_rule(0.0, 300);
  spec["gaps"] = {{{"at", 100}, {"length", 5}}, {{"at", 200}, {"length", 2}}};
  box.write_json("s.json", spec);
  REQUIRE(box.run({"synth", "--config", (box.root() / "s.json").string()}).code == 0);
  const auto o = box.run({"import", (box.root() / "synthetic/lag.csv").string(), "--meta",
                          (box.root() / "synthetic/lag.meta.json").string()});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  CHECK(o.out.find("3 slices") != std::string::npos);
  const json manifest = json::parse(slurp(box.root() / "custom_datasets/lag/manifest.json"));
  REQUIRE(manifest.at("slices").size() == 3);
  CHECK(manifest["slices"][0]["length"] == 100);
  CHECK(manifest["slices"][1]["length"] == 95);
  CHECK(manifest["slices"][2]["length"] == 98);
}

TEST_CASE("synth rejects invalid rules with exit 2") {
  Sandbox box;
  json unknown = lag_rule(0.0, 100);
  unknown["rule"]["terms"][0]["component"] = "q";
  box.write_json("a.json", unknown);
  CHECK(box.run({"synth", "--config", (box.root() / "a.json").string()}).code == 2);

  json too_deep = lag_rule(0.0, 100);
  too_deep["history"] = 2;
  box.write_json("b.json", too_deep);
  const auto o = box.run({"synth", "--config", (box.root() / "b.json").string()});
  CHECK(o.code == 2);
  CHECK(o.err.rfind("error: ConfigError:", 0) == 0);

  json negative = lag_rule(-1.0, 100);
  box.write_json("c.json", negative);
  CHECK(box.run({"synth", "--config", (box.root() / "c.json").string()}).code == 2);
}

TEST_CASE("import: summary, refusal to overwrite, off-grid errors") {
  Sandbox box;
  box.write("a.csv",
            "timestamp,x,y\n2021-03-01T00:00:00Z,1,2\n2021-03-01T00:01:00Z,2,3\n2021-03-01T00:05:00Z,3,4\n");
  box.write_json("a.json", {{"name", "a"},
                            {"delta_seconds", 60},
                            {"components", {{{"name", "x"}, {"role", "input"}}, {{"name", "y"}, {"role", "output"}}}}});
  const std::string csv = (box.root() / "a.csv").string(), meta = (box.root() / "a.json").string();
  const auto ok = box.run({"import", csv, "--meta", meta});
  REQUIRE_MESSAGE(ok.code == 0, ok.err);
  CHECK(ok.out.find("2 slices") != std::string::npos);
  const json manifest = json::parse(slurp(box.root() / "custom_datasets/a/manifest.json"));
  CHECK(manifest["slices"][0]["length"] == 2);
  CHECK(manifest["slices"][1]["length"] == 1);

  const auto again = box.run({"import", csv, "--meta", meta});
  CHECK(again.code == 3);
  CHECK(again.err.rfind("error: Conflict:", 0) == 0);
  CHECK(box.run({"import", csv, "--meta", meta, "--force"}).code == 0);

  box.write("b.csv", "timestamp,x,y\n2021-03-01T00:00:00Z,1,2\n2021-03-01T00:01:30Z,2,3\n");
  box.write_json("b.json", {{"name", "b"}, {"delta_seconds", 60}, {"components", {{{"name", "x"}}, {{"name", "y"}}}}});
  const auto bad = box.run({"import", (box.root() / "b.csv").string(), "--meta", (box.root() / "b.json").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.rfind("error: OffGridTimestamp:", 0) == 0);
  CHECK(bad.err.find("row 2") != std::string::npos);
  CHECK(count(bad.err, "\n") == 1);
  CHECK_FALSE(fs::exists(box.root() / "custom_datasets/b"));
}

TEST_CASE("train writes checkpoint and curves; --viz adds the plot; reruns are safe") {
  Sandbox box;
  prepare_lag(box);
  box.write_json("t.json", train_config("m", "lag"));
  const std::string cfg = (box.root() / "t.json").string();
  const auto o = box.run({"train", "--config", cfg});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  const fs::path dir = box.root() / "models/m";
  for (const char* f : {"model.json", "params.bin", "curves.csv", "config.json", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  CHECK_FALSE(fs::exists(dir / "curves.svg"));
  const std::string curves = slurp(dir / "curves.csv");

  CHECK(box.run({"train", "--config", cfg, "--viz"}).code == 0);
  CHECK(fs::exists(dir / "curves.svg"));
  CHECK(slurp(dir / "curves.csv") == curves);
  CHECK(count(slurp(dir / "curves.svg"), "class=\"series\"") == 2);

  json changed = train_config("m", "lag");
  changed["train"]["lr"] = 0.02;
  box.write_json("t2.json", changed);
  const auto conflict = box.run({"train", "--config", (box.root() / "t2.json").string()});
  CHECK(conflict.code == 3);
  CHECK(slurp(dir / "curves.csv") == curves);
  CHECK(box.run({"train", "--config", (box.root() / "t2.json").string(), "--force"}).code == 0);
  CHECK(slurp(dir / "curves.csv") != curves);
}

TEST_CASE("train config errors map to exit 2; divergence maps to exit 4") {
  Sandbox box;
  prepare_lag(box, 200);
  json missing = train_config("m", "lag");
  missing.erase("task");
  box.write_json("a.json", missing);
  CHECK(box.run({"train", "--config", (box.root() / "a.json").string()}).code == 2);

  json typo = train_config("m", "lag");
  typo["trian"] = json::object();
  box.write_json("b.json", typo);
  CHECK(box.run({"train", "--config", (box.root() / "b.json").string()}).code == 2);

  json no_data = train_config("m", "nothere");
  box.write_json("c.json", no_data);
  CHECK(box.run({"train", "--config", (box.root() / "c.json").string()}).code == 2);

  json bad_arch = train_config("m", "lag");
  bad_arch["arch"]["name"] = "transformer";
  box.write_json("d.json", bad_arch);
  const auto unknown = box.run({"train", "--config", (box.root() / "d.json").string()});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.rfind("error: UnknownArchitecture:", 0) == 0);

  json diverge = train_config("m", "lag");
  diverge["train"] = {{"optimizer", "sgd"}, {"lr", 1e300}, {"max_epochs", 3}};
  box.write_json("e.json", diverge);
  const auto o = box.run({"train", "--config", (box.root() / "e.json").string()});
  CHECK(o.code == 4);
  CHECK(o.err.rfind("error: NonFiniteLoss:", 0) == 0);
  CHECK_FALSE(fs::exists(box.root() / "models/m/model.json"));
}

TEST_CASE("sweep: report per trial, one checkpoint when consolidating") {
  Sandbox box;
  prepare_lag(box, 300);
  json cfg = train_config("s", "lag", 3);
  cfg["sweep"] = {{"grid", {{"arch.widths", {{4}, {8}}}, {"train.lr", {0.01, 0.003}}}}, {"workers", 2}};
  box.write_json("s.json", cfg);
  const auto o = box.run({"sweep", "--config", (box.root() / "s.json").string(), "--viz"});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  const fs::path dir = box.root() / "models/s";
  const std::string report = slurp(dir / "sweep.jsonl");
  CHECK(count(report, "\n") == 4);
  CHECK(count(report, "\"status\":\"ok\"") == 4);
  std::size_t checkpoints = 0;
  for (const auto& e : fs::recursive_directory_iterator(box.root() / "models"))
    if (e.path().filename() == "model.json") ++checkpoints;
  CHECK(checkpoints == 1);
  CHECK(fs::exists(dir / "curves.svg"));

  cfg["name"] = "s2";
  cfg["sweep"]["consolidate"] = false;
  box.write_json("s2.json", cfg);
  REQUIRE(box.run({"sweep", "--config", (box.root() / "s2.json").string()}).code == 0);
  CHECK(fs::exists(box.root() / "models/s2/sweep.jsonl"));
  CHECK_FALSE(fs::exists(box.root() / "models/s2/model.json"));
}

TEST_CASE("evaluate: deterministic JSON, fit plot per component, split typos") {
  Sandbox box;
  box.write_json("s.json", lag_rule(0.01, 300));
  REQUIRE(box.run({"synth", "--config", (box.root() / "s.json").string()}).code == 0);
  // Second output derived from the first so the model has two output columns.
  std::ifstream in(box.root() / "synthetic/lag.csv");
  std::ostringstream csv;
  std::string line;
  std::getline(in, line);
  csv << line << ",z\n";
  while (std::getline(in, line)) {
    const auto cells = tk::split_csv_line(line);
    csv << line << ',' << tk::format_double(2.0 * std::stod(cells[2])) << '\n';
  }
  box.write("two.csv", csv.str());
  box.write_json("two.json", {{"name", "two"},
                              {"delta_seconds", 3600},
                              {"components", {{{"name", "x"}, {"role", "input"}},
                                              {{"name", "y"}, {"role", "output"}},
                                              {{"name", "z"}, {"role", "output"}}}}});
  REQUIRE(box.run({"import", (box.root() / "two.csv").string(), "--meta", (box.root() / "two.json").string()})
              .code == 0);
  json cfg = train_config("m", "two", 3);
  cfg["task"]["out_components"] = {"y", "z"};
  box.write_json("t.json", cfg);
  REQUIRE(box.run({"train", "--config", (box.root() / "t.json").string()}).code == 0);

  const auto a = box.run({"evaluate", "m", "--split", "eval"});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  const std::string first = slurp(box.root() / "models/m/eval_eval.json");
  const auto b = box.run({"evaluate", "m", "--split", "eval"});
  CHECK(b.code == 0);
  CHECK(slurp(box.root() / "models/m/eval_eval.json") == first);
  CHECK(json::parse(first).at("n") == json::parse(first).at("points").size());

  REQUIRE(box.run({"evaluate", "m", "--split", "val", "--plot-fit", "--components", "z"}).code == 0);
  const std::string one = slurp(box.root() / "models/m/fit_val.svg");
  CHECK(count(one, "class=\"series\"") == 1);
  CHECK(count(one, "class=\"target\"") == 1);
  REQUIRE(box.run({"evaluate", "m", "--split", "train", "--plot-fit"}).code == 0);
  CHECK(count(slurp(box.root() / "models/m/fit_train.svg"), "class=\"series\"") == 2);

  CHECK(box.run({"evaluate", "m", "--split", "val", "--plot-fit", "--components", "w"}).code == 2);
  const auto typo = box.run({"evaluate", "m", "--split", "vaal"});
  CHECK(typo.code == 2);
  CHECK(typo.err.find("train, val, eval") != std::string::npos);
  CHECK(box.run({"evaluate", "ghost"}).code == 2);
}

TEST_CASE("interpret: heatmaps, CSVs, determinism, selection errors") {
  Sandbox box;
  prepare_lag(box, 300);
  box.write_json("t.json", train_config("m", "lag", 3));
  REQUIRE(box.run({"train", "--config", (box.root() / "t.json").string()}).code == 0);
  const json request = {{"method", "integrated_gradients"},
                        {"target", {{"row", 0}, {"col", 0}}},
                        {"ig_steps", 16},
                        {"selection", {{"mode", "random"}, {"k", 5}, {"split", "val"}, {"seed", 9}}}};
  box.write_json("r.json", request);
  const std::string req = (box.root() / "r.json").string();
  const auto o = box.run({"interpret", "m", "--config", req, "--tag", "one"});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  const fs::path dir = box.root() / "models/m/interpretations/one";
  std::size_t svgs = 0, csvs = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    svgs += e.path().extension() == ".svg";
    csvs += e.path().extension() == ".csv";
  }
  CHECK(svgs == 6);
  CHECK(csvs == 7);  // five points, the importance matrix and the point summary
  CHECK(count(slurp(dir / "importance.svg"), "class=\"cell\"") == 5);

  REQUIRE(box.run({"interpret", "m", "--config", req, "--tag", "two"}).code == 0);
  for (const char* f : {"point_0.csv", "point_4.csv", "importance.csv", "points.csv"}) {
    CHECK_MESSAGE(slurp(dir / f) == slurp(box.root() / "models/m/interpretations/two" / f), f);
  }
  CHECK(box.run({"interpret", "m", "--config", req, "--tag", "one"}).code == 0);

  json bad = request;
  bad["selection"] = {{"mode", "explicit"}, {"indices", {0, 100000}}, {"split", "val"}};
  box.write_json("bad.json", bad);
  const auto oor = box.run({"interpret", "m", "--config", (box.root() / "bad.json").string()});
  CHECK(oor.code == 2);
  CHECK(oor.err.rfind("error: OutOfRange:", 0) == 0);

  json big = request;
  big["selection"]["k"] = 100000;
  box.write_json("big.json", big);
  CHECK(box.run({"interpret", "m", "--config", (box.root() / "big.json").string()}).code == 4);
}

TEST_CASE("verify detects tampered artifacts") {
  Sandbox box;
  prepare_lag(box, 200);
  box.write_json("t.json", train_config("m", "lag", 2));
  REQUIRE(box.run({"train", "--config", (box.root() / "t.json").string()}).code == 0);
  const auto ok = box.run({"verify"});
  CHECK_MESSAGE(ok.code == 0, ok.out);
  CHECK(ok.out.find("ok model m") != std::string::npos);

  const fs::path params = box.root() / "models/m/params.bin";
  std::string bytes = slurp(params);
  bytes[3] = static_cast<char>(bytes[3] ^ 0x5a);
  std::ofstream(params, std::ios::binary) << bytes;
  const auto bad = box.run({"verify"});
  CHECK(bad.code == 4);
  CHECK(bad.out.find("FAIL model m") != std::string::npos);
}

TEST_CASE("custom architectures are manifests over built-in constructors") {
  Sandbox box;
  prepare_lag(box, 200);
  box.write_json("custom_archs/deep.json",
                 {{"name", "cli_test_deep_mlp"}, {"base", "mlp"}, {"hyperparams", {{"widths", {6, 6}}}}});
  json cfg = train_config("m", "lag", 2);
  cfg["arch"] = {{"name", "cli_test_deep_mlp"}};
  box.write_json("t.json", cfg);
  const auto o = box.run({"train", "--config", (box.root() / "t.json").string()});
  REQUIRE_MESSAGE(o.code == 0, o.err);
  const json model = json::parse(slurp(box.root() / "models/m/model.json"));
  CHECK(model.dump().find("\"widths\":[6,6]") != std::string::npos);
  CHECK(slurp(box.root() / "models/m/config.json").find("cli_test_deep_mlp") != std::string::npos);
  CHECK(box.run({"evaluate", "m"}).code == 0);

  box.write_json("custom_archs/code.json", {{"name", "cli_test_plugin"}, {"base", "./plugin.so"}});
  CHECK(box.run({"verify"}).code == 2);
}

TEST_CASE("lock file serializes commands; stale locks are taken over") {
  Sandbox box;
  box.write("x", "");
  box.write(".tk.lock", std::to_string(::getpid()) + "\n");
  const auto held = box.run({"verify"});
  CHECK(held.code == 3);
  CHECK(held.err.rfind("error: Conflict:", 0) == 0);

  box.write(".tk.lock", "999999999\n");
  CHECK(box.run({"verify"}).code == 0);
  CHECK_FALSE(fs::exists(box.root() / ".tk.lock"));
}

TEST_CASE("TK_ROOT provides the default root; usage errors exit 2") {
  Sandbox box;
  box.write_json("s.json", lag_rule(0.0, 50));
  ::setenv("TK_ROOT", box.root().c_str(), 1);
  const auto o = Sandbox::run_raw({"tk", "synth", "--config", (box.root() / "s.json").string()});
  ::unsetenv("TK_ROOT");
  CHECK(o.code == 0);
  CHECK(fs::exists(box.root() / "synthetic/lag.csv"));
  CHECK(fs::exists(box.root() / "runs.jsonl"));

  CHECK(Sandbox::run_raw({"tk"}).code == 2);
  CHECK(Sandbox::run_raw({"tk", "train"}).code == 2);
  CHECK(Sandbox::run_raw({"tk", "--help"}).code == 0);
  CHECK(box.run({"synth", "--config", (box.root() / "missing.json").string()}).code == 2);
}

TEST_CASE("run log records every successful command") {
  Sandbox box;
  prepare_lag(box, 200);
  std::ifstream in(box.root() / "runs.jsonl");
  std::string line;
  std::vector<json> records;
  while (std::getline(in, line)) records.push_back(json::parse(line));
  REQUIRE(records.size() == 2);
  CHECK(records[0]["op"] == "synth");
  CHECK(records[1]["op"] == "import");
  for (const auto& r : records) {
    CHECK(r.contains("time"));
    CHECK(r["version"] == tk::exp::kVersion);
    CHECK(r["config_digest"].get<std::string>().size() == 64);
  }
}
