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

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "tk/architectures.hpp"
#include "tk/csv.hpp"
#include "tk/error.hpp"
#include "tk/experiment.hpp"
#include "tk/interpreter.hpp"
#include "tk/render.hpp"
#include "tk/timebase_json.hpp"
#include "tk/trainer.hpp"

namespace tk::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using exp::Paths;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Conflict:
    case ErrorKind::DuplicateName:
      return 3;
    case ErrorKind::NonMonotonicTimestamps:
    case ErrorKind::OffGridTimestamp:
    case ErrorKind::MissingComponent:
    case ErrorKind::NonNumericValue:
    case ErrorKind::EmptyTask:
    case ErrorKind::OutOfRange:
    case ErrorKind::DegenerateSplit:
    case ErrorKind::UnknownArchitecture:
    case ErrorKind::IncompatibleHyperparams:
    case ErrorKind::EmptyTrainSplit:
    case ErrorKind::UnknownSplit:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ConfigError:
    case ErrorKind::NotFound:
      return 2;
    default:
      return 4;
  }
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void check_name(const std::string& what, const std::string& name) {
  if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
      name == "." || name == ".." || name.front() == '.') {
    fail(ErrorKind::ConfigError, what + " must be a plain, non-empty name (got '" + name + "')");
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::ConfigError, where + " must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
      fail(ErrorKind::ConfigError, "unknown field '" + key + "' in " + where);
    }
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scratch directory whose files are later moved into place with the
// no-silent-overwrite rule.
class Staging {
 public:
  explicit Staging(const Paths& paths)
      : dir_(paths.root / (".staging-" + std::to_string(::getpid()))) {
    std::error_code ec;
    fs::remove_all(dir_, ec);
    fs::create_directories(dir_);
  }
  ~Staging() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  const fs::path& dir() const { return dir_; }

  void put(const std::string& rel, const std::string& content) const {
    const fs::path p = dir_ / rel;
    fs::create_directories(p.parent_path());
    render::write_file(p.string(), content);
  }

  // Every file is checked before any is written, so a conflict leaves the
  // target untouched.
  std::vector<fs::path> commit(const fs::path& target, bool force) const {
    std::vector<fs::path> rels;
    for (const auto& e : fs::recursive_directory_iterator(dir_)) {
      if (e.is_regular_file()) rels.push_back(fs::relative(e.path(), dir_));
    }
    std::sort(rels.begin(), rels.end());
    if (!force) {
      for (const auto& rel : rels) {
        const fs::path dst = target / rel;
        if (fs::exists(dst) && read_text(dst) != read_text(dir_ / rel)) {
          fail(ErrorKind::Conflict, dst.string() + " exists with different content; use --force to replace it");
        }
      }
    }
    std::vector<fs::path> written;
    for (const auto& rel : rels) {
      exp::write_artifact(target / rel, read_text(dir_ / rel), true);
      written.push_back(target / rel);
    }
    return written;
  }

 private:
  fs::path dir_;
};

json path_list(const std::vector<fs::path>& paths, const Paths& root) {
  json out = json::array();
  for (const auto& p : paths) out.push_back(fs::relative(p, root.root).generic_string());
  return out;
}

std::shared_ptr<const timebase::TimeSeriesDataset> load_named_dataset(const Paths& paths, const std::string& name) {
  check_name("dataset", name);
  const fs::path dir = paths.dataset(name);
  if (!fs::exists(dir / "manifest.json")) {
    fail(ErrorKind::NotFound, "dataset '" + name + "' has not been imported into " + paths.datasets().string());
  }
  return std::make_shared<const timebase::TimeSeriesDataset>(timebase::load_dataset(dir.string()));
}

trainer::Checkpoint load_model(const Paths& paths, const std::string& name) {
  check_name("model", name);
  const fs::path dir = paths.model(name);
  if (!fs::exists(dir / "model.json")) fail(ErrorKind::NotFound, "no checkpoint in " + dir.string());
  return trainer::load_checkpoint(dir.string());
}

trainer::PreparedData prepare_for(const Paths& paths, const trainer::Checkpoint& ckpt) {
  auto ds = load_named_dataset(paths, ckpt.dataset_name);
  trainer::PreparedData data = trainer::prepare(ds, ckpt.task, ckpt.data_config);
  if (data.dataset_digest != ckpt.dataset_digest) {
    fail(ErrorKind::Conflict, "dataset '" + ckpt.dataset_name + "' changed since the model was trained");
  }
  return data;
}

std::string curves_svg(const std::vector<trainer::EpochRecord>& curves, const std::string& title) {
  render::Series tr{"train", {}, {}}, va{"val", {}, {}};
  for (const auto& e : curves) {
    tr.x.push_back(static_cast<double>(e.epoch));
    tr.y.push_back(e.train_loss);
    va.x.push_back(static_cast<double>(e.epoch));
    va.y.push_back(e.val_loss);
  }
  return render::line_chart_svg({tr, va}, title, "epoch", "loss");
}

json model_manifest(const trainer::Checkpoint& ckpt, const std::string& config_text) {
  return {{"config_digest", exp::json_digest(json::parse(config_text))},
          {"dataset", ckpt.dataset_name},
          {"dataset_digest", ckpt.dataset_digest},
          {"scaler_digest", ckpt.scaler_digest},
          {"split_digest", ckpt.split_digest},
          {"params_digest", ckpt.params_digest()},
          {"version", exp::kVersion}};
}

// Writes checkpoint, config, manifest and optional curve plot.
std::vector<fs::path> store_model(const Paths& paths, const std::string& name, const trainer::Checkpoint& ckpt,
                                  const std::string& config_text, bool force, bool viz,
                                  const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  Staging stage(paths);
  trainer::save_checkpoint(ckpt, stage.dir().string());
  stage.put("config.json", config_text);
  stage.put("manifest.json", model_manifest(ckpt, config_text).dump(2) + "\n");
  if (viz) stage.put("curves.svg", curves_svg(ckpt.curves, name + " training curves"));
  for (const auto& [rel, content] : extra) stage.put(rel, content);
  return stage.commit(paths.model(name), force);
}

struct TrainSetup {
  json config;
  std::string config_text;
  std::string name;
  timebase::TaskSpec task;
  arch::ArchSpec arch;
  trainer::DataConfig data;
  trainer::TrainConfig train;
  std::uint64_t model_seed = 0;
};

TrainSetup parse_train_config(const fs::path& path, bool with_sweep) {
  TrainSetup s;
  s.config = exp::read_json(path);
  if (with_sweep) {
    check_keys(s.config, {"name", "dataset", "task", "arch", "data", "train", "model_seed", "sweep"}, "sweep config");
    if (!s.config.contains("sweep")) fail(ErrorKind::ConfigError, "sweep config needs a 'sweep' section");
  } else {
    check_keys(s.config, {"name", "dataset", "task", "arch", "data", "train", "model_seed"}, "train config");
  }
  for (const char* key : {"name", "dataset", "task", "arch"}) {
    if (!s.config.contains(key)) fail(ErrorKind::ConfigError, std::string("config is missing '") + key + "'");
  }
  try {
    s.name = s.config.at("name").get<std::string>();
    check_name("name", s.name);
    s.config.at("dataset").get<std::string>();
    s.task = timebase::task_from_json(s.config.at("task"));
    const json& a = s.config.at("arch");
    check_keys(a, {"name", "hyperparams"}, "arch");
    s.arch.name = a.at("name").get<std::string>();
    s.arch.hyperparams = a.value("hyperparams", json::object());
    s.data = trainer::data_config_from_json(s.config.value("data", json::object()));
    s.train = trainer::config_from_json(s.config.value("train", json::object()), s.task.kind);
    s.model_seed = s.config.value("model_seed", s.train.seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::ConfigError, std::string("malformed config: ") + e.what());
  }
  s.config_text = s.config.dump(2) + "\n";
  return s;
}

void check_config_unchanged(const Paths& paths, const TrainSetup& s, bool force) {
  const fs::path existing = paths.model(s.name) / "config.json";
  if (!force && fs::exists(existing) && read_text(existing) != s.config_text) {
    fail(ErrorKind::Conflict, "model '" + s.name + "' exists with a different config; use --force to replace it");
  }
}

void print_warnings(const arch::Model& model, std::ostream& err) {
  for (const auto& w : model.warnings()) err << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

struct Options {
  std::string root;
  std::string config;
  bool force = false;
  bool viz = false;
  std::string csv, meta;
  std::string model, split = "val", tag;
  bool plot_fit = false;
  std::vector<std::string> components;
};

int cmd_import(const Paths& paths, const Options& o, std::ostream& out) {
  const json meta_json = exp::read_json(o.meta);
  const timebase::DatasetMeta meta = exp::meta_from_json(meta_json);
  check_name("dataset name", meta.name);
  const fs::path dir = paths.dataset(meta.name);
  if (fs::exists(dir) && !o.force) {
    fail(ErrorKind::Conflict, "dataset '" + meta.name + "' already exists; use --force to replace it");
  }
  if (!fs::exists(o.csv)) fail(ErrorKind::NotFound, "cannot read " + o.csv);
  const auto ds = timebase::import_dataset(timebase::read_csv_table(o.csv), meta);
  Staging stage(paths);
  timebase::save_dataset(ds, stage.dir().string());
  stage.put("meta.json", exp::meta_to_json(meta).dump(2) + "\n");
  if (fs::exists(dir)) fs::remove_all(dir);
  const auto written = stage.commit(dir, true);

  out << "imported " << ds.name << ": " << ds.slices.size() << " slices, " << ds.n_total() << " rows, "
      << ds.n_components() << " components\n";
  for (std::size_t s = 0; s < ds.slices.size(); ++s) {
    out << "  slice " << s << ": start " << format_iso8601(ds.slices[s].start_ts) << ", length "
        << ds.slices[s].length() << '\n';
  }
  for (const auto& c : ds.components) out << "  component " << c.name << " (" << timebase::role_name(c.role) << ")\n";
  exp::append_run(paths, {{"op", "import"},
                          {"config_digest", exp::json_digest(meta_json)},
                          {"inputs", {{"csv", exp::file_digest(o.csv)}}},
                          {"outputs", path_list(written, paths)},
                          {"dataset_digest", timebase::dataset_digest(ds)}});
  return 0;
}

int cmd_synth(const Paths& paths, const Options& o, std::ostream& out) {
  const json cfg = exp::read_json(o.config);
  const exp::SyntheticSpec spec = exp::synth_from_json(cfg);
  check_name("name", spec.name);
  fs::path dir = paths.root / "synthetic";
  if (cfg.contains("output_dir")) {
    const fs::path p = cfg.at("output_dir").get<std::string>();
    dir = p.is_absolute() ? p : paths.root / p;
  }
  const exp::SynthFiles files = exp::write_synthetic(spec, dir, o.force);
  out << "wrote " << files.csv.string() << '\n' << "wrote " << files.meta.string() << '\n'
      << "wrote " << files.rule.string() << '\n';
  exp::append_run(paths, {{"op", "synth"},
                          {"config_digest", exp::json_digest(cfg)},
                          {"inputs", json::object()},
                          {"outputs", {files.csv.string(), files.meta.string(), files.rule.string()}}});
  return 0;
}

int cmd_train(const Paths& paths, const Options& o, std::ostream& out, std::ostream& err) {
  const TrainSetup s = parse_train_config(o.config, false);
  check_config_unchanged(paths, s, o.force);
  auto ds = load_named_dataset(paths, s.config.at("dataset").get<std::string>());
  const trainer::PreparedData data = trainer::prepare(ds, s.task, s.data);
  auto model = arch::build_model(s.arch, s.task, s.model_seed);
  print_warnings(*model, err);
  const trainer::Checkpoint ckpt = trainer::train(*model, data, s.train);
  const auto written = store_model(paths, s.name, ckpt, s.config_text, o.force, o.viz);
  out << "trained " << s.name << ": " << ckpt.curves.size() << " epochs, best epoch " << ckpt.best_epoch
      << ", best val loss " << format_double(ckpt.best_val) << '\n';
  exp::append_run(paths, {{"op", "train"},
                          {"config_digest", exp::json_digest(s.config)},
                          {"inputs", {{"dataset", data.dataset_digest}}},
                          {"outputs", path_list(written, paths)}});
  return 0;
}

int cmd_sweep(const Paths& paths, const Options& o, std::ostream& out) {
  const TrainSetup s = parse_train_config(o.config, true);
  const trainer::SweepConfig sc = trainer::sweep_config_from_json(s.config.at("sweep"));
  check_config_unchanged(paths, s, o.force);
  auto ds = load_named_dataset(paths, s.config.at("dataset").get<std::string>());
  const trainer::PreparedData data = trainer::prepare(ds, s.task, s.data);
  trainer::TrainConfig base = s.train;
  base.seed = s.model_seed;
  const trainer::SweepResult result = trainer::sweep(sc, s.arch, base, data);

  std::string report;
  for (const auto& t : result.trials) {
    report += t.to_json().dump() + "\n";
    out << "trial " << t.trial_id << " " << t.config.dump() << ": " << t.status;
    if (t.status == "ok") out << ", best val loss " << format_double(t.best_val);
    else out << " (" << one_line(t.error) << ")";
    out << '\n';
  }
  std::vector<fs::path> written;
  if (result.consolidated) {
    written = store_model(paths, s.name, *result.consolidated, s.config_text, o.force, o.viz,
                          {{"sweep.jsonl", report}});
  } else {
    Staging stage(paths);
    stage.put("config.json", s.config_text);
    stage.put("sweep.jsonl", report);
    written = stage.commit(paths.model(s.name), o.force);
  }
  exp::append_run(paths, {{"op", "sweep"},
                          {"config_digest", exp::json_digest(s.config)},
                          {"inputs", {{"dataset", data.dataset_digest}}},
                          {"outputs", path_list(written, paths)}});
  if (!result.best) fail(ErrorKind::EmptyResults, "no sweep trial completed; see sweep.jsonl");
  out << "best trial " << result.trials[*result.best].trial_id
      << (result.consolidated ? " (checkpoint kept)" : " (no checkpoint kept)") << '\n';
  return 0;
}

std::string fit_svg(const trainer::EvalResult& r, const trainer::PreparedData& data,
                    const std::vector<std::string>& requested, const std::string& title) {
  const auto& names = data.task.out_components;
  std::vector<std::size_t> cols;
  for (const auto& c : requested) {
    const auto it = std::find(names.begin(), names.end(), c);
    if (it == names.end()) fail(ErrorKind::ConfigError, "'" + c + "' is not an output component of this model");
    cols.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  if (cols.empty())
    for (std::size_t c = 0; c < names.size(); ++c) cols.push_back(c);
  std::vector<render::Series> series;
  for (std::size_t c : cols) {
    render::Series pred{names[c], {}, {}}, target{names[c] + " (target)", {}, {}, "target", true};
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      const double x = static_cast<double>(r.points[i].global);
      pred.x.push_back(x);
      pred.y.push_back(r.predictions[i](0, c));
      target.x.push_back(x);
      target.y.push_back(r.targets[i](0, c));
    }
    series.push_back(std::move(pred));
    series.push_back(std::move(target));
  }
  return render::line_chart_svg(series, title, "prediction point (row)", "value");
}

int cmd_evaluate(const Paths& paths, const Options& o, std::ostream& out) {
  const trainer::Split split = trainer::parse_split(o.split);
  const trainer::Checkpoint ckpt = load_model(paths, o.model);
  const trainer::PreparedData data = prepare_for(paths, ckpt);
  const trainer::EvalResult r = trainer::evaluate(ckpt, data, split);
  const std::string sname(trainer::split_name(split));
  Staging stage(paths);
  stage.put("eval_" + sname + ".json", r.to_json().dump(2) + "\n");
  if (o.plot_fit) {
    const std::string title = o.model + " fit on " + sname;
    if (r.kind == timebase::TaskKind::Classification) {
      stage.put("fit_" + sname + ".svg", render::confusion_svg(r.confusion, title));
    } else {
      stage.put("fit_" + sname + ".svg", fit_svg(r, data, o.components, title));
    }
  }
  const auto written = stage.commit(paths.model(o.model), o.force);
  out << o.model << " on " << sname << " (" << r.n << " points): loss " << format_double(r.loss);
  if (r.kind == timebase::TaskKind::Regression) {
    out << ", mse " << format_double(r.mse) << ", mae " << format_double(r.mae) << '\n';
  } else {
    out << ", accuracy " << format_double(r.accuracy) << ", macro-F1 " << format_double(r.macro_f1) << '\n';
  }
  exp::append_run(paths, {{"op", "evaluate"},
                          {"config_digest", exp::json_digest({{"model", o.model}, {"split", sname}})},
                          {"inputs", {{"params", ckpt.params_digest()}, {"dataset", data.dataset_digest}}},
                          {"outputs", path_list(written, paths)}});
  return 0;
}

std::vector<std::string> delay_labels(const timebase::TaskSpec& task) {
  std::vector<std::string> labels;
  for (int d = task.in_delays.first; d <= task.in_delays.last; ++d) labels.push_back(std::to_string(d));
  return labels;
}

int cmd_interpret(const Paths& paths, const Options& o, std::ostream& out) {
  const json req_json = exp::read_json(o.config);
  const interp::AttributionRequest request = interp::request_from_json(req_json);
  const json canonical = interp::request_to_json(request);
  std::string tag = o.tag;
  if (tag.empty()) tag = std::string(interp::method_name(request.method)) + "-" + exp::json_digest(canonical).substr(0, 8);
  check_name("tag", tag);

  const trainer::Checkpoint ckpt = load_model(paths, o.model);
  const trainer::PreparedData data = prepare_for(paths, ckpt);
  auto model = ckpt.restore();
  const interp::Interpretation result = interp::interpret(*model, data, request);

  const auto rows = delay_labels(data.task);
  const auto& comps = data.task.in_components;
  std::vector<std::string> header{"delay"};
  header.insert(header.end(), comps.begin(), comps.end());

  Staging stage(paths);
  stage.put("request.json", canonical.dump(2) + "\n");
  std::ostringstream summary;
  summary << "index,position,slice,offset,global,target_row,target_col,output,baseline_output,gap,loss\n";
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    const std::string base = "point_" + std::to_string(i);
    stage.put(base + ".csv", matrix_to_csv(p.attribution.scores, header, rows));
    stage.put(base + ".svg",
              render::heatmap_svg(p.attribution.scores, rows, comps, render::ColorScale::Diverging,
                                  std::string(interp::method_name(request.method)) + " at row " +
                                      std::to_string(p.point.global)));
    summary << i << ',' << p.position << ',' << p.point.slice << ',' << p.point.offset << ',' << p.point.global
            << ',' << p.target.row << ',' << p.target.col << ',' << format_double(p.attribution.output) << ','
            << format_double(p.attribution.baseline_output) << ',' << format_double(p.attribution.gap) << ','
            << format_double(p.loss) << '\n';
  }
  stage.put("points.csv", summary.str());
  stage.put("importance.csv", matrix_to_csv(result.importance.mean_abs, header, rows));
  stage.put("importance.svg", render::heatmap_svg(result.importance.mean_abs, rows, comps,
                                                  render::ColorScale::Sequential, "mean |attribution|"));
  const fs::path dir = paths.model(o.model) / "interpretations" / tag;
  const auto written = stage.commit(dir, o.force);

  out << "interpreted " << result.points.size() << " points of " << o.model << " into " << dir.string() << '\n';
  std::vector<std::size_t> order(result.importance.per_delay.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return result.importance.per_delay[a] > result.importance.per_delay[b];
  });
  out << "delays by importance:";
  for (std::size_t i : order) out << ' ' << rows[i];
  out << '\n';
  exp::append_run(paths, {{"op", "interpret"},
                          {"config_digest", exp::json_digest(canonical)},
                          {"inputs", {{"params", ckpt.params_digest()}, {"dataset", data.dataset_digest}}},
                          {"outputs", path_list(written, paths)}});
  return 0;
}

int cmd_verify(const Paths& paths, std::ostream& out) {
  std::size_t failures = 0, checked = 0;
  auto report = [&](const std::string& what, const std::string& problem) {
    if (problem.empty()) {
      out << "ok " << what << '\n';
    } else {
      out << "FAIL " << what << ": " << problem << '\n';
      ++failures;
    }
    ++checked;
  };
  auto sorted_dirs = [](const fs::path& p) {
    std::vector<fs::path> dirs;
    if (fs::exists(p))
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
  };

  for (const auto& dir : sorted_dirs(paths.datasets())) {
    std::string problem;
    try {
      const json manifest = exp::read_json(dir / "manifest.json");
      const auto ds = timebase::load_dataset(dir.string());
      if (manifest.value("digest", std::string()) != timebase::dataset_digest(ds)) problem = "column digest mismatch";
    } catch (const std::exception& e) {
      problem = one_line(e.what());
    }
    report("dataset " + dir.filename().string(), problem);
  }
  for (const auto& dir : sorted_dirs(paths.models())) {
    const std::string name = dir.filename().string();
    if (!fs::exists(dir / "model.json")) {
      report("model " + name + " (no checkpoint)", "");
      continue;
    }
    std::string problem;
    try {
      const trainer::Checkpoint ckpt = trainer::load_checkpoint(dir.string());
      const json manifest = exp::read_json(dir / "manifest.json");
      const json config = exp::read_json(dir / "config.json");
      const trainer::PreparedData data =
          trainer::prepare(load_named_dataset(paths, ckpt.dataset_name), ckpt.task, ckpt.data_config);
      if (manifest.at("config_digest") != exp::json_digest(config)) problem = "config digest mismatch";
      else if (manifest.at("params_digest") != ckpt.params_digest()) problem = "params digest mismatch";
      else if (data.dataset_digest != ckpt.dataset_digest || manifest.at("dataset_digest") != ckpt.dataset_digest)
        problem = "dataset digest mismatch";
      else if (data.scaler_digest != ckpt.scaler_digest || manifest.at("scaler_digest") != ckpt.scaler_digest)
        problem = "scaler digest mismatch";
      else if (data.split_digest != ckpt.split_digest || manifest.at("split_digest") != ckpt.split_digest)
        problem = "split digest mismatch";
    } catch (const std::exception& e) {
      problem = one_line(e.what());
    }
    report("model " + name, problem);
  }
  out << checked << " artifacts checked, " << failures << " failed\n";
  exp::append_run(paths, {{"op", "verify"}, {"checked", checked}, {"failed", failures}});
  if (failures) fail(ErrorKind::ContractViolation, std::to_string(failures) + " artifacts failed verification");
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tk: time-series deep learning toolkit", "tk"};
  app.set_version_flag("--version", std::string(exp::kVersion));
  app.require_subcommand(1);
  Options o;
  const char* env_root = std::getenv("TK_ROOT");
  o.root = env_root && *env_root ? env_root : ".";
  app.add_option("--root", o.root, "experiment directory (default: $TK_ROOT or .)");

  auto* imp = app.add_subcommand("import", "import a CSV series into custom_datasets/");
  imp->add_option("csv", o.csv, "CSV file with a leading timestamp column")->required();
  imp->add_option("--meta", o.meta, "dataset metadata JSON")->required();
  imp->add_flag("--force", o.force, "replace an existing dataset");

  auto* syn = app.add_subcommand("synth", "generate a synthetic series from a linear lag rule");
  syn->add_option("--config", o.config, "synthetic spec JSON")->required();
  syn->add_flag("--force", o.force, "overwrite differing files");

  auto* trn = app.add_subcommand("train", "train one model");
  trn->add_option("--config", o.config, "training config JSON")->required();
  trn->add_flag("--force", o.force, "overwrite a differing model");
  trn->add_flag("--viz", o.viz, "write curves.svg");

  auto* swp = app.add_subcommand("sweep", "grid search over hyperparameters");
  swp->add_option("--config", o.config, "training config JSON with a sweep section")->required();
  swp->add_flag("--force", o.force, "overwrite a differing model");
  swp->add_flag("--viz", o.viz, "write curves.svg for the kept checkpoint");

  auto* evl = app.add_subcommand("evaluate", "metrics of a trained model on a split");
  evl->add_option("model", o.model, "model name")->required();
  evl->add_option("--split", o.split, "train, val or eval");
  evl->add_flag("--plot-fit", o.plot_fit, "write fit_<split>.svg");
  evl->add_option("--components", o.components, "output components to plot")->delimiter(',');
  evl->add_flag("--force", o.force, "overwrite differing files");

  auto* itp = app.add_subcommand("interpret", "feature attribution for selected prediction points");
  itp->add_option("model", o.model, "model name")->required();
  itp->add_option("--config", o.config, "attribution request JSON")->required();
  itp->add_option("--tag", o.tag, "interpretation directory name");
  itp->add_flag("--force", o.force, "overwrite differing files");

  auto* ver = app.add_subcommand("verify", "check digests of every dataset and model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const Paths paths{o.root};
    paths.ensure();
    exp::DirLock lock(paths);
    exp::load_custom_archs(paths);
    if (imp->parsed()) return cmd_import(paths, o, out);
    if (syn->parsed()) return cmd_synth(paths, o, out);
    if (trn->parsed()) return cmd_train(paths, o, out, err);
    if (swp->parsed()) return cmd_sweep(paths, o, out);
    if (evl->parsed()) return cmd_evaluate(paths, o, out);
    if (itp->parsed()) return cmd_interpret(paths, o, out);
    if (ver->parsed()) return cmd_verify(paths, out);
  } catch (const Error& e) {
    err << "error: " << e.kind_name() << ": " << one_line(e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: ConfigError: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: RuntimeError: " << one_line(e.what()) << '\n';
    return 4;
  }
  return 2;
}

}  // namespace tk::cli
