#include "attdmm/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "attdmm/cli/checks.hpp"
#include "attdmm/data/checkpoint.hpp"
#include "attdmm/data/csv_io.hpp"
#include "attdmm/data/preprocess.hpp"
#include "attdmm/data/synth.hpp"
#include "attdmm/evalmetrics/tasks.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/parallel.hpp"
#include "attdmm/scoring/risk.hpp"
#include "attdmm/training/folds.hpp"
#include "attdmm/training/trainer.hpp"

namespace attdmm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool compatible(const json& def, const json& given) {
  if (def.is_number_float()) return given.is_number();
  if (def.is_number_integer()) return given.is_number_integer();
  if (def.is_boolean()) return given.is_boolean();
  if (def.is_string()) return given.is_string();
  if (def.is_array()) return given.is_array();
  return def.type() == given.type();
}

// Defaults, then the --config file, then explicit flags.
class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& help, json defaults)
      : app_(parent.add_subcommand(name, help)), defaults_(std::move(defaults)) {
    app_->add_option("--config", config_path_, "JSON file with settings (flags take precedence)");
  }

  template <class T>
  void flag(const std::string& flag, const std::string& key, const std::string& help) {
    require(defaults_.contains(key), "internal: flag bound to unknown key " + key);
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    overrides_.push_back([opt, value, key](json& cfg) {
      if (opt->count() > 0) cfg[key] = *value;
    });
  }

  CLI::App* app() const { return app_; }
  bool selected() const { return app_->parsed(); }

  json resolve() const {
    json cfg = defaults_;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw DataError("cannot open config file " + config_path_);
      json file;
      try {
        in >> file;
      } catch (const json::exception& e) {
        throw DataError("config file " + config_path_ + " is not valid JSON: " + e.what());
      }
      if (!file.is_object()) throw DataError("config file " + config_path_ + " must hold an object");
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (!cfg.contains(it.key())) {
          throw DataError("config field '" + it.key() + "' is not a setting of `" + app_->get_name() + "`");
        }
        if (!compatible(cfg[it.key()], it.value())) {
          throw DataError("config field '" + it.key() + "' has the wrong type (expected " +
                          std::string(cfg[it.key()].type_name()) + ")");
        }
        cfg[it.key()] = it.value();
      }
    }
    for (const auto& apply : overrides_) apply(cfg);
    return cfg;
  }

 private:
  CLI::App* app_;
  json defaults_;
  std::string config_path_;
  std::vector<std::function<void(json&)>> overrides_;
};

template <class T>
T get(const json& cfg, const std::string& key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError("setting '" + key + "' is missing or has the wrong type");
  }
}

std::string required_path(const json& cfg, const std::string& key, const std::string& flag) {
  const std::string v = get<std::string>(cfg, key);
  if (v.empty()) throw UsageError("missing required flag " + flag);
  return v;
}

void write_run_config(const fs::path& out_dir, const std::string& command, const json& cfg) {
  json j = {{"command", command}, {"config", cfg}};
  write_file_atomic(out_dir / "run_config.json", j.dump(1) + "\n");
}

json matrix_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(a.cols()));
    for (Eigen::Index c = 0; c < a.cols(); ++c) row[static_cast<std::size_t>(c)] = a(r, c);
    rows.push_back(row);
  }
  return rows;
}

DatasetPaths dataset_paths(const fs::path& dir, bool labels_required) {
  DatasetPaths p = DatasetPaths::in_directory(dir);
  if (!fs::exists(p.timeseries)) throw DataError("missing file " + p.timeseries.string());
  if (!fs::exists(p.statics)) throw DataError("missing file " + p.statics.string());
  if (!fs::exists(p.labels)) {
    if (labels_required) throw DataError("missing file " + p.labels.string());
    p.labels.clear();
  }
  return p;
}

// ---- fold manifest ----

std::string manifest_csv(const RawDataset& data, const std::vector<int>& folds) {
  std::string out = "stay_id,fold\n";
  for (std::size_t i = 0; i < data.stays.size(); ++i) {
    out += data.stays[i].stay_id + "," + std::to_string(folds[i]) + "\n";
  }
  return out;
}

std::unordered_map<std::string, int> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing fold manifest " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "stay_id,fold") throw DataError(path.string() + ": header must be `stay_id,fold`");
  std::unordered_map<std::string, int> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": malformed row '" + line + "'");
    try {
      out[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw DataError(path.string() + ": fold is not an integer in row '" + line + "'");
    }
  }
  return out;
}

// ---- gen ----

json gen_defaults() {
  const SynthConfig d;
  return {{"seed", 1},
          {"records", d.records},
          {"out_dir", "data"},
          {"latent_dim", d.latent_dim},
          {"feature_dim", d.feature_dim},
          {"spectral_radius", d.spectral_radius},
          {"process_noise", d.process_noise},
          {"observation_noise", d.observation_noise},
          {"static_drive", d.static_drive},
          {"missing_rate", d.missing_rate},
          {"readout_scale", d.readout_scale},
          {"min_steps", d.min_steps},
          {"max_steps", d.max_steps},
          {"prevalence", d.prevalence}};
}

SynthConfig synth_config(const json& cfg) {
  SynthConfig s;
  s.seed = get<std::uint64_t>(cfg, "seed");
  s.records = get<int>(cfg, "records");
  s.latent_dim = get<int>(cfg, "latent_dim");
  s.feature_dim = get<int>(cfg, "feature_dim");
  s.spectral_radius = get<double>(cfg, "spectral_radius");
  s.process_noise = get<double>(cfg, "process_noise");
  s.observation_noise = get<double>(cfg, "observation_noise");
  s.static_drive = get<double>(cfg, "static_drive");
  s.missing_rate = get<double>(cfg, "missing_rate");
  s.readout_scale = get<double>(cfg, "readout_scale");
  s.min_steps = get<int>(cfg, "min_steps");
  s.max_steps = get<int>(cfg, "max_steps");
  s.prevalence = get<double>(cfg, "prevalence");
  return s;
}

int run_gen(const json& cfg, std::ostream& out) {
  const SynthConfig sc = synth_config(cfg);
  const SynthResult r = synth_generate(sc);
  const fs::path dir = get<std::string>(cfg, "out_dir");
  write_dataset(r.data, DatasetPaths::in_directory(dir));
  const oracle::LGSSM& g = r.truth.lgssm;
  json truth = {{"A", matrix_json(g.A)},
                {"B", matrix_json(g.B)},
                {"b", matrix_json(g.b)},
                {"q", matrix_json(g.q)},
                {"C", matrix_json(g.C)},
                {"d", matrix_json(g.d)},
                {"r", matrix_json(g.r)},
                {"readout", matrix_json(r.truth.readout)},
                {"offset", r.truth.offset}};
  write_file_atomic(dir / "synth_truth.json", truth.dump(1) + "\n");
  write_run_config(dir, "gen", cfg);
  int positives = 0;
  for (const RawStay& s : r.data.stays) positives += *s.label;
  out << "generated " << r.data.stays.size() << " stays (" << positives << " positive) in "
      << dir.string() << "\n";
  return kOk;
}

// ---- train ----

json train_defaults() {
  const TrainConfig t;
  const Dims d;
  return {{"seed", 0},
          {"data_dir", "data"},
          {"out_dir", "run"},
          {"fold", 0},
          {"folds", kDefaultFolds},
          {"alpha", t.loss.alpha},
          {"mc_samples", t.loss.mc_samples},
          {"supervised", t.loss.supervised},
          {"learning_rate", t.learning_rate},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"var_floor", t.var_floor},
          {"linear_mode", t.linear_mode},
          {"stop_metric", "val_auroc"},
          {"val_mc_samples", t.val_mc_samples},
          {"threads", 0},
          {"latent_dim", d.latent_dim},
          {"transition_hidden", d.transition_hidden},
          {"emission_hidden", d.emission_hidden},
          {"rnn_dim", d.rnn_dim},
          {"attention_dim", d.attention_dim},
          {"predictor_hidden", d.predictor_hidden}};
}

std::vector<RawStay> pick(const RawDataset& data, const std::vector<std::size_t>& idx) {
  std::vector<RawStay> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.stays[i]);
  return out;
}

json stay_ids(const std::vector<RawStay>& stays) {
  json ids = json::array();
  for (const RawStay& s : stays) ids.push_back(s.stay_id);
  return ids;
}

int run_train(const json& cfg, std::ostream& out) {
  const fs::path data_dir = get<std::string>(cfg, "data_dir");
  const fs::path out_dir = get<std::string>(cfg, "out_dir");
  const RawDataset data = load_dataset(dataset_paths(data_dir, true));
  const int k = get<int>(cfg, "folds");
  const int fold = get<int>(cfg, "fold");
  if (fold < 0 || fold >= k) throw UsageError("--fold must lie in [0, " + std::to_string(k) + ")");
  const std::uint64_t seed = get<std::uint64_t>(cfg, "seed");

  std::vector<int> labels;
  for (const RawStay& s : data.stays) labels.push_back(*s.label);
  const std::vector<int> folds = stratified_folds(labels, k, seed);
  const FoldSplit split = fold_split(folds, fold, k);
  write_file_atomic(out_dir / "folds.csv", manifest_csv(data, folds));

  const std::vector<RawStay> train_raw = pick(data, split.train);
  const std::vector<RawStay> val_raw = pick(data, split.val);
  Normalizer norm;
  norm.fit(train_raw);
  const std::vector<PatientRecord> train_set = norm.apply(train_raw);
  const std::vector<PatientRecord> val_set = norm.apply(val_raw);

  TrainConfig tc;
  tc.seed = seed;
  tc.loss.alpha = get<double>(cfg, "alpha");
  tc.loss.mc_samples = get<int>(cfg, "mc_samples");
  tc.loss.supervised = get<bool>(cfg, "supervised");
  tc.learning_rate = get<double>(cfg, "learning_rate");
  tc.batch_size = get<int>(cfg, "batch_size");
  tc.max_epochs = get<int>(cfg, "max_epochs");
  tc.patience = get<int>(cfg, "patience");
  tc.var_floor = get<double>(cfg, "var_floor");
  tc.linear_mode = get<bool>(cfg, "linear_mode");
  tc.val_mc_samples = get<int>(cfg, "val_mc_samples");
  tc.threads = get<int>(cfg, "threads");
  const std::string stop = get<std::string>(cfg, "stop_metric");
  if (stop == "val_auroc") {
    tc.stop_metric = StopMetric::ValidationAuroc;
  } else if (stop == "val_loss") {
    tc.stop_metric = StopMetric::ValidationLoss;
  } else {
    throw DataError("setting 'stop_metric' must be val_auroc or val_loss, got '" + stop + "'");
  }
  if (!tc.loss.supervised) tc.stop_metric = StopMetric::ValidationLoss;
  tc.dims.latent_dim = get<int>(cfg, "latent_dim");
  tc.dims.transition_hidden = get<int>(cfg, "transition_hidden");
  tc.dims.emission_hidden = get<int>(cfg, "emission_hidden");
  tc.dims.rnn_dim = get<int>(cfg, "rnn_dim");
  tc.dims.attention_dim = get<int>(cfg, "attention_dim");
  tc.dims.predictor_hidden = get<int>(cfg, "predictor_hidden");
  tc.dims.feature_dim = static_cast<int>(data.feature_names.size());
  tc.dims.static_dim = norm.static_dim();
  tc.progress = &out;

  const TrainResult result = train(train_set, val_set, tc);

  Checkpoint ckpt;
  ckpt.params = result.params;
  ckpt.normalizer = norm;
  ckpt.provenance = {{"config", cfg},
                     {"feature_names", data.feature_names},
                     {"folds", k},
                     {"test_fold", fold},
                     {"val_fold", (fold + 1) % k},
                     {"rho", result.report.rho},
                     {"train_stay_ids", stay_ids(train_raw)},
                     {"val_stay_ids", stay_ids(val_raw)}};
  checkpoint_save(ckpt, out_dir / "checkpoint.json");

  json history = json::array();
  for (const EpochRecord& e : result.report.history) {
    history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_metric", e.val_metric}});
  }
  const json report = {{"rho", result.report.rho},
                       {"stop_metric", tc.stop_metric == StopMetric::ValidationAuroc ? "val_auroc" : "-val_loss"},
                       {"best_epoch", result.report.best_epoch},
                       {"stop_epoch", result.report.stop_epoch},
                       {"best_metric", result.report.best_metric},
                       {"history", history}};
  write_file_atomic(out_dir / "train_report.json", report.dump(1) + "\n");
  write_run_config(out_dir, "train", cfg);
  out << "best epoch " << result.report.best_epoch << " metric " << fmt17(result.report.best_metric)
      << "; checkpoint written to " << (out_dir / "checkpoint.json").string() << "\n";
  return kOk;
}

// ---- eval ----

json eval_defaults() {
  return {{"seed", 0},
          {"checkpoint", ""},
          {"data_dir", "data"},
          {"folds_manifest", ""},
          {"out_dir", "eval"},
          {"fold", -1},
          {"mc_samples", 10},
          {"horizon_hours", default_horizons()},
          {"lead_min", -120},
          {"lead_max", 0},
          {"threads", 0}};
}

struct LoadedModel {
  Checkpoint ckpt;
  fs::path path;
};

LoadedModel load_model(const json& cfg) {
  LoadedModel m;
  m.path = required_path(cfg, "checkpoint", "--checkpoint");
  m.ckpt = checkpoint_load(m.path);
  if (!m.ckpt.normalizer) throw DataError("checkpoint " + m.path.string() + " has no normalizer");
  return m;
}

int run_eval(const json& cfg, std::ostream& out) {
  const LoadedModel model = load_model(cfg);
  const fs::path data_dir = get<std::string>(cfg, "data_dir");
  const fs::path out_dir = get<std::string>(cfg, "out_dir");
  const RawDataset data = load_dataset(dataset_paths(data_dir, true));

  const json& prov = model.ckpt.provenance;
  if (!prov.contains("test_fold") || !prov.contains("train_stay_ids")) {
    throw DataError("checkpoint provenance lacks the fold record needed for evaluation");
  }
  const int trained_test_fold = prov.at("test_fold").get<int>();
  int fold = get<int>(cfg, "fold");
  if (fold < 0) fold = trained_test_fold;
  if (fold != trained_test_fold) {
    throw DataError("fold " + std::to_string(fold) + " was not held out when this checkpoint was trained (held-out fold: " +
                    std::to_string(trained_test_fold) + ")");
  }
  std::string manifest_path = get<std::string>(cfg, "folds_manifest");
  if (manifest_path.empty()) manifest_path = (model.path.parent_path() / "folds.csv").string();
  const auto manifest = read_manifest(manifest_path);

  std::set<std::string> seen_in_training;
  for (const auto& key : {"train_stay_ids", "val_stay_ids"}) {
    if (!prov.contains(key)) continue;
    for (const auto& id : prov.at(key)) seen_in_training.insert(id.get<std::string>());
  }
  std::vector<RawStay> test_raw;
  for (const RawStay& s : data.stays) {
    auto it = manifest.find(s.stay_id);
    if (it == manifest.end()) throw DataError("stay " + s.stay_id + " is not in the fold manifest");
    if (it->second != fold) continue;
    if (seen_in_training.count(s.stay_id)) {
      throw DataError("leakage: test stay " + s.stay_id + " was used during training");
    }
    test_raw.push_back(s);
  }
  if (test_raw.empty()) throw DataError("fold " + std::to_string(fold) + " has no stays");
  const std::vector<PatientRecord> test = model.ckpt.normalizer->apply(test_raw);

  EvalOptions opts;
  opts.n_samples = get<int>(cfg, "mc_samples");
  opts.seed = get<std::uint64_t>(cfg, "seed");
  opts.threads = get<int>(cfg, "threads");
  const auto horizons = get<std::vector<int>>(cfg, "horizon_hours");
  const int lead_min = get<int>(cfg, "lead_min");
  const int lead_max = get<int>(cfg, "lead_max");
  if (lead_min > lead_max || lead_max > 0) throw UsageError("lead range must satisfy lead_min <= lead_max <= 0");
  std::vector<int> leads;
  for (int l = lead_min; l <= lead_max; l += 2) leads.push_back(l);

  const EvalCurve t1 = eval_task1(model.ckpt.params, test, horizons, opts);
  const EvalCurve t2 = eval_task2(model.ckpt.params, test, leads, opts);
  write_file_atomic(out_dir / "task1.csv", eval_curve_csv(t1));
  write_file_atomic(out_dir / "task2.csv", eval_curve_csv(t2));
  write_run_config(out_dir, "eval", cfg);
  if (t1.headline) {
    out << "task1 48h auroc " << fmt17(t1.headline->auroc) << " auprc " << fmt17(t1.headline->auprc) << "\n";
  }
  out << "task1 aggregate auroc " << fmt17(t1.aggregate_auroc) << " auprc " << fmt17(t1.aggregate_auprc) << "\n";
  out << "task2 aggregate auroc " << fmt17(t2.aggregate_auroc) << " auprc " << fmt17(t2.aggregate_auprc) << "\n";
  return kOk;
}

// ---- score ----

json score_defaults() {
  return {{"seed", 0},
          {"checkpoint", ""},
          {"data_dir", "data"},
          {"records", std::vector<std::string>{}},
          {"mc_samples", kDefaultScoringSamples},
          {"stride", 1},
          {"out_dir", "scores"},
          {"threads", 0}};
}

int run_score(const json& cfg, std::ostream& out) {
  const LoadedModel model = load_model(cfg);
  const fs::path data_dir = get<std::string>(cfg, "data_dir");
  const fs::path out_dir = get<std::string>(cfg, "out_dir");
  const RawDataset data = load_dataset(dataset_paths(data_dir, false));
  const auto wanted = get<std::vector<std::string>>(cfg, "records");
  std::vector<RawStay> chosen;
  if (wanted.empty()) {
    chosen = data.stays;
  } else {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.stays.size(); ++i) index[data.stays[i].stay_id] = i;
    for (const std::string& id : wanted) {
      auto it = index.find(id);
      if (it == index.end()) throw DataError("--records: unknown stay_id " + id);
      chosen.push_back(data.stays[it->second]);
    }
  }
  const std::vector<PatientRecord> records = model.ckpt.normalizer->apply(chosen);
  const int n = get<int>(cfg, "mc_samples");
  const int stride = get<int>(cfg, "stride");
  const std::uint64_t seed = get<std::uint64_t>(cfg, "seed");
  std::vector<std::string> rows(records.size());
  parallel_for(records.size(), get<int>(cfg, "threads"), [&](std::size_t i, int) {
    rows[i] = trajectory_csv_rows(records[i].stay_id,
                                  score_trajectory(records[i], model.ckpt.params, n, stride, seed));
  });
  std::string csv = trajectory_csv_header();
  for (const std::string& r : rows) csv += r;
  write_file_atomic(out_dir / "risk_scores.csv", csv);
  write_run_config(out_dir, "score", cfg);
  out << "scored " << records.size() << " stays into " << (out_dir / "risk_scores.csv").string() << "\n";
  return kOk;
}

// ---- gradcheck / selfcheck ----

json gradcheck_defaults() {
  const GradcheckOptions g;
  return {{"seed", g.seed},       {"records", g.records},       {"steps", g.steps},
          {"features", g.features}, {"fd_step", g.fd_step},       {"alpha", g.alpha},
          {"mc_samples", g.mc_samples}, {"tolerance", 1e-4}};
}

int run_gradcheck_cmd(const json& cfg, std::ostream& out) {
  GradcheckOptions g;
  g.seed = get<std::uint64_t>(cfg, "seed");
  g.records = get<int>(cfg, "records");
  g.steps = get<int>(cfg, "steps");
  g.features = get<int>(cfg, "features");
  g.fd_step = get<double>(cfg, "fd_step");
  g.alpha = get<double>(cfg, "alpha");
  g.mc_samples = get<int>(cfg, "mc_samples");
  const double tol = get<double>(cfg, "tolerance");
  const GradcheckResult r = run_gradcheck(g);
  for (const auto& e : r.comparison.groups) {
    out << "  " << e.name << " rel " << fmt17(e.relative_error) << " max_abs " << fmt17(e.max_abs_error) << "\n";
  }
  out << "max relative error " << fmt17(r.comparison.max_relative_error) << " (" << r.comparison.worst_group
      << ", " << r.parameters << " parameters)\n";
  if (!(r.comparison.max_relative_error < tol)) {
    throw CheckFailed("gradient check failed: " + fmt17(r.comparison.max_relative_error) + " >= " + fmt17(tol));
  }
  return kOk;
}

json selfcheck_defaults() {
  const SelfcheckOptions s;
  return {{"seed", s.seed},   {"records", s.records},           {"steps", s.steps},
          {"features", s.features}, {"latent", s.latent},       {"missing_rate", s.missing_rate},
          {"mc_samples", s.samples}, {"slack", s.slack},        {"threads", s.threads}};
}

int run_selfcheck_cmd(const json& cfg, std::ostream& out) {
  SelfcheckOptions s;
  s.seed = get<std::uint64_t>(cfg, "seed");
  s.records = get<int>(cfg, "records");
  s.steps = get<int>(cfg, "steps");
  s.features = get<int>(cfg, "features");
  s.latent = get<int>(cfg, "latent");
  s.missing_rate = get<double>(cfg, "missing_rate");
  s.samples = get<int>(cfg, "mc_samples");
  s.slack = get<double>(cfg, "slack");
  s.threads = get<int>(cfg, "threads");
  const DominanceReport r = run_selfcheck(s);
  out << "records " << r.records << " violations " << r.violations << " max(elbo - loglik) "
      << fmt17(r.max_excess) << " mean gap per step " << fmt17(r.mean_gap_per_step) << "\n";
  if (r.violations > 0) {
    throw CheckFailed("ELBO exceeded the Kalman log-likelihood on " + std::to_string(r.violations) + " records");
  }
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"attdmm: synthetic cohorts, training, evaluation and risk scoring"};
  app.require_subcommand(1, 1);

  Command gen(app, "gen", "generate a synthetic cohort as CSV files", gen_defaults());
  gen.flag<std::uint64_t>("--seed", "seed", "random seed");
  gen.flag<int>("--records", "records", "number of stays");
  gen.flag<std::string>("--out-dir", "out_dir", "output directory");
  gen.flag<double>("--missing-rate", "missing_rate", "per-cell missingness probability");
  gen.flag<double>("--prevalence", "prevalence", "target positive share");

  Command tr(app, "train", "train on fold splits and write a checkpoint", train_defaults());
  tr.flag<std::uint64_t>("--seed", "seed", "random seed (folds, init, noise)");
  tr.flag<std::string>("--data-dir", "data_dir", "directory holding the CSV triplet");
  tr.flag<std::string>("--out-dir", "out_dir", "output directory");
  tr.flag<int>("--fold", "fold", "held-out test fold");
  tr.flag<double>("--alpha", "alpha", "ELBO regularization strength");
  tr.flag<int>("--mc-samples", "mc_samples", "posterior samples per record");
  tr.flag<int>("--epochs", "max_epochs", "maximum epochs");
  tr.flag<int>("--patience", "patience", "early-stopping patience (epochs)");
  tr.flag<int>("--batch-size", "batch_size", "mini-batch size");
  tr.flag<double>("--lr", "learning_rate", "Adam learning rate");
  tr.flag<int>("--threads", "threads", "worker threads (0: all cores)");

  Command ev(app, "eval", "Task-1 and Task-2 sweeps on the held-out fold", eval_defaults());
  ev.flag<std::uint64_t>("--seed", "seed", "scoring noise seed");
  ev.flag<std::string>("--checkpoint", "checkpoint", "checkpoint file");
  ev.flag<std::string>("--data-dir", "data_dir", "directory holding the CSV triplet");
  ev.flag<std::string>("--folds", "folds_manifest", "fold manifest (default: next to the checkpoint)");
  ev.flag<std::string>("--out-dir", "out_dir", "output directory");
  ev.flag<int>("--fold", "fold", "test fold (default: the fold held out in training)");
  ev.flag<int>("--mc-samples", "mc_samples", "posterior samples per score");
  ev.flag<std::vector<int>>("--horizon-hours", "horizon_hours", "Task-1 horizons in hours");
  ev.flag<int>("--lead-min", "lead_min", "first Task-2 lead time (hours, <= 0)");
  ev.flag<int>("--lead-max", "lead_max", "last Task-2 lead time (hours, <= 0)");
  ev.flag<int>("--threads", "threads", "worker threads (0: all cores)");

  Command sc(app, "score", "risk trajectories with confidence intervals", score_defaults());
  sc.flag<std::uint64_t>("--seed", "seed", "scoring noise seed");
  sc.flag<std::string>("--checkpoint", "checkpoint", "checkpoint file");
  sc.flag<std::string>("--data-dir", "data_dir", "directory holding timeseries.csv and static.csv");
  sc.flag<std::vector<std::string>>("--records", "records", "stay ids to score (default: all)");
  sc.flag<int>("--mc-samples", "mc_samples", "posterior samples per point");
  sc.flag<int>("--stride", "stride", "steps between trajectory points");
  sc.flag<std::string>("--out-dir", "out_dir", "output directory");
  sc.flag<int>("--threads", "threads", "worker threads (0: all cores)");

  Command gc(app, "gradcheck", "reverse-mode gradient against finite differences", gradcheck_defaults());
  gc.flag<std::uint64_t>("--seed", "seed", "random seed");
  gc.flag<double>("--tolerance", "tolerance", "maximum accepted relative error");

  Command sf(app, "selfcheck", "ELBO never exceeds the exact Kalman log-likelihood", selfcheck_defaults());
  sf.flag<std::uint64_t>("--seed", "seed", "random seed");
  sf.flag<int>("--records", "records", "number of LGSSM records");
  sf.flag<int>("--mc-samples", "mc_samples", "posterior samples per ELBO estimate");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen.selected()) return run_gen(gen.resolve(), out);
    if (tr.selected()) return run_train(tr.resolve(), out);
    if (ev.selected()) return run_eval(ev.resolve(), out);
    if (sc.selected()) return run_score(sc.resolve(), out);
    if (gc.selected()) return run_gradcheck_cmd(gc.resolve(), out);
    if (sf.selected()) return run_selfcheck_cmd(sf.resolve(), out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckFailed& e) {
    err << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  }
  err << "error: no subcommand\n";
  return kUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace attdmm::cli
