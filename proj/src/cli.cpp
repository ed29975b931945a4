#include "tfmt/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "tfmt/checkpoint.hpp"
#include "tfmt/eval.hpp"
#include "tfmt/gradcheck.hpp"

namespace tfmt {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t next = std::min(s.find(sep, pos), s.size());
    out.push_back(trim(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + s + "'");
  }
  return v;
}

int to_int(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ConfigError("bad integer for " + std::string(key) + ": '" + s + "'");
  }
  return int(v);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string short_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void refuse_overwrite(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw ConfigError(path.string() + " exists; pass --force to overwrite");
  }
}

// Flags shared by the commands that build a TrainConfig. Values are kept as
// text and applied through set_config_value, so flags and config files go
// through the same parser.
struct TrainFlags {
  std::string config;
  std::map<std::string, std::string> overrides;
  std::string seeds;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "flat key = value config file");
    static const std::pair<const char*, const char*> kFlags[] = {
        {"--variant", "variant"}, {"--mode", "mode"},         {"--alpha", "alpha"},
        {"--beta", "beta"},       {"--lambda", "lambda"},     {"--eta", "eta"},
        {"--kappa", "kappa"},     {"--aug-rate", "aug_rate"}, {"--epochs", "epochs"},
        {"--batch", "batch"},     {"--lr", "lr"},             {"--ablate", "ablate"},
    };
    for (const auto& [flag, key] : kFlags) {
      cmd.add_option_function<std::string>(
          flag, [this, k = std::string(key)](const std::string& v) { overrides[k] = v; },
          "overrides config key " + std::string(key));
    }
    cmd.add_option("--seed,--seeds", seeds, "seed or comma-separated seed list");
  }

  TrainConfig build() const {
    TrainConfig cfg;
    if (!config.empty()) {
      for (const auto& [k, v] : read_config_file(config)) {
        if (is_config_key(k)) set_config_value(cfg, k, v);
        else if (!is_synth_key(k)) throw ConfigError("unknown config key '" + k + "'");
      }
    }
    for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
    validate(cfg);
    return cfg;
  }

  std::vector<std::uint64_t> seed_list(const TrainConfig& cfg) const {
    return seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seed_list(seeds);
  }
};

struct RunOutcome {
  std::vector<double> dev;
  std::vector<double> test;
};

std::string stats_columns(const RunOutcome& o) {
  const SeedStats d = seed_stats(o.dev), t = seed_stats(o.test);
  return fixed6(d.mean) + ',' + fixed6(d.stddev) + ',' + fixed6(t.mean) + ',' + fixed6(t.stddev);
}

std::string seeds_name(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (auto seed : seeds) s += (s.empty() ? "" : " ") + std::to_string(seed);
  return s;
}

// -- subcommands -------------------------------------------------------------

int cmd_synth(const std::string& config, const std::string& seed, const fs::path& out_dir,
              std::ostream& out) {
  SynthConfig cfg;
  if (!config.empty()) {
    for (const auto& [k, v] : read_config_file(config)) {
      if (is_synth_key(k)) set_synth_value(cfg, k, v);
      else if (!is_config_key(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }
  if (!seed.empty()) set_synth_value(cfg, "synth_seed", seed);
  const SynthCorpus corpus = synth_corpus(cfg);
  fs::create_directories(out_dir);
  save_dataset(out_dir / kSourceTrainFile, corpus.source_train);
  save_dataset(out_dir / kSourceDevFile, corpus.source_dev);
  save_dataset(out_dir / kTargetUnlabeledFile, corpus.target_unlabeled);
  save_dataset(out_dir / kTargetTestFile, corpus.target_test);
  out << "wrote " << corpus.source_train.size() << " source train, " << corpus.source_dev.size()
      << " source dev, " << corpus.target_unlabeled.size() << " target unlabeled, "
      << corpus.target_test.size() << " target test sentences to " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_train(const TrainFlags& flags, const fs::path& data_dir, const fs::path& out_dir,
              bool force, std::ostream& out) {
  const TrainConfig base = flags.build();
  const auto seeds = flags.seed_list(base);
  const Datasets data = load_datasets(data_dir);
  fs::create_directories(out_dir);
  for (auto seed : seeds) refuse_overwrite(out_dir / ("metrics_seed" + std::to_string(seed) + ".csv"), force);
  refuse_overwrite(out_dir / "summary.csv", force);

  std::string runs = "seed,best_epoch,dev_f1,test_f1\n";
  RunOutcome outcome;
  for (auto seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    const FitResult r = fit(data, cfg);
    const std::string tag = "seed" + std::to_string(seed);
    std::ostringstream log;
    write_metric_log(log, r.epochs);
    write_text(out_dir / ("metrics_" + tag + ".csv"), log.str());
    save_checkpoint(out_dir / ("checkpoint_" + tag + ".ckpt"), r.checkpoint);
    runs += std::to_string(seed) + ',' + std::to_string(r.best_epoch) + ',' +
            fixed6(r.best_dev_f1) + ',' + fixed6(r.test_f1) + '\n';
    outcome.dev.push_back(r.best_dev_f1);
    outcome.test.push_back(r.test_f1);
    out << "seed " << seed << ": best epoch " << r.best_epoch << ", source dev F1 "
        << fixed6(r.best_dev_f1) << ", target test F1 " << fixed6(r.test_f1) << '\n';
  }
  write_text(out_dir / "runs.csv", runs);
  const std::string summary =
      "variant,mode,ablate,seeds,dev_f1_mean,dev_f1_std,test_f1_mean,test_f1_std\n" +
      std::string(variant_name(base.variant)) + ',' + std::string(task_name(base.mode)) + ',' +
      ablations_name(base.ablations) + ',' + seeds_name(seeds) + ',' + stats_columns(outcome) + '\n';
  write_text(out_dir / "summary.csv", summary);
  out << summary;
  return kExitOk;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& input, const std::string& mode,
             const fs::path& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto data = load_dataset(input);
  if (data.empty()) throw std::runtime_error(input.string() + " has no sentences");
  const ModelConfig mcfg = model_config(ckpt.config);
  Task view = mcfg.task;
  if (!mode.empty()) {
    view = parse_task(mode);
    // An ASTE model can be scored as pairs; an AOPE model has no polarities.
    if (view == Task::Aste && mcfg.task == Task::Aope) {
      throw std::runtime_error("checkpoint was trained for aope; cannot evaluate as aste");
    }
  }
  std::vector<std::vector<Triplet>> preds, golds;
  for (const auto& ls : data) {
    preds.push_back(task_view(predict(ls.sentence, ckpt.student, mcfg), view));
    golds.push_back(task_view(ls.triplets, view));
  }
  const EvalReport report = evaluate(preds, golds);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream csv;
    write_report_csv(csv, report);
    write_text(out_dir / ("report_" + std::string(task_name(view)) + ".csv"), csv.str());
  }
  out << "mode " << task_name(view) << '\n';
  write_report_summary(out, report);
  return kExitOk;
}

int cmd_audit(const fs::path& ckpt_path, const fs::path& input, const std::string& eta_text,
              const fs::path& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto data = load_dataset(input);
  const bool labeled = std::any_of(data.begin(), data.end(),
                                   [](const LabeledSentence& ls) { return !ls.triplets.empty(); });
  if (!labeled) throw std::runtime_error(input.string() + " carries no gold triplets to audit against");
  const double eta = eta_text.empty() ? ckpt.config.eta : to_double("eta", eta_text);
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  const ModelConfig mcfg = model_config(ckpt.config);
  AuditCounts counts;
  for (const auto& ls : data) {
    const auto labels = teacher_pseudo_label(ls.sentence, ckpt.teacher, mcfg, eta);
    counts += audit_pseudo_labels(pseudo_triplets(labels, mcfg, ls.sentence.size()),
                                  task_view(ls.triplets, mcfg.task));
  }
  std::ostringstream csv;
  write_audit_csv(csv, counts);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir / "audit.csv", csv.str());
  }
  out << csv.str();
  return kExitOk;
}

int cmd_gradcheck(const std::string& seed, const std::string& mode, const std::string& variant,
                  const fs::path& out_dir, std::ostream& out) {
  GradcheckConfig cfg;
  if (!seed.empty()) cfg.seed = parse_seed_list(seed).at(0);
  if (!mode.empty()) cfg.task = parse_task(mode);
  if (!variant.empty()) {
    cfg.head = parse_variant(variant) == Variant::CTfmt ? HeadKind::Cell : HeadKind::Region;
  }
  const GradcheckReport report = run_gradcheck(cfg);
  std::ostringstream text;
  write_gradcheck_report(text, report);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir / "gradcheck.csv", text.str());
  }
  out << text.str();
  return report.passed ? kExitOk : kExitFailure;
}

int cmd_ablate(const TrainFlags& flags, const fs::path& data_dir, const fs::path& out_dir,
               const std::string& alpha_grid, const std::string& beta_grid, bool force,
               std::ostream& out) {
  // --ablate names table rows here rather than one ablation set.
  TrainFlags base_flags = flags;
  std::string rows_text = "full,no_aug,no_uns,no_mmd,no_uns+no_mmd";
  if (auto it = base_flags.overrides.find("ablate"); it != base_flags.overrides.end()) {
    rows_text = it->second;
    base_flags.overrides.erase(it);
  }
  const TrainConfig base = base_flags.build();
  const auto seeds = base_flags.seed_list(base);

  struct Row {
    std::string name;
    TrainConfig cfg;
  };
  std::vector<Row> rows;
  for (auto name : split(rows_text, ',')) {
    Row r{std::string(name), base};
    r.cfg.ablations = parse_ablation_row(name);
    rows.push_back(r);
  }
  if (!alpha_grid.empty()) {
    for (double a : parse_grid(alpha_grid)) {
      Row r{"alpha=" + short_double(a), base};
      r.cfg.alpha = a;
      r.cfg.ablations = {};
      rows.push_back(r);
    }
  }
  if (!beta_grid.empty()) {
    for (double b : parse_grid(beta_grid)) {
      Row r{"beta=" + short_double(b), base};
      r.cfg.beta = b;
      r.cfg.ablations = {};
      rows.push_back(r);
    }
  }
  for (const auto& r : rows) validate(r.cfg);

  const Datasets data = load_datasets(data_dir);
  fs::create_directories(out_dir);
  refuse_overwrite(out_dir / "ablation.csv", force);
  std::string table =
      "row,variant,ablate,alpha,beta,seeds,dev_f1_mean,dev_f1_std,test_f1_mean,test_f1_std\n";
  for (const auto& row : rows) {
    RunOutcome outcome;
    for (auto seed : seeds) {
      TrainConfig cfg = row.cfg;
      cfg.seed = seed;
      const FitResult r = fit(data, cfg);
      outcome.dev.push_back(r.best_dev_f1);
      outcome.test.push_back(r.test_f1);
    }
    const std::string line = row.name + ',' + std::string(variant_name(row.cfg.variant)) + ',' +
                             ablations_name(row.cfg.ablations) + ',' +
                             short_double(row.cfg.alpha) + ',' + short_double(row.cfg.beta) + ',' +
                             seeds_name(seeds) + ',' + stats_columns(outcome) + '\n';
    table += line;
    out << line << std::flush;
  }
  write_text(out_dir / "ablation.csv", table);
  return kExitOk;
}

}  // namespace

// -- config helpers ----------------------------------------------------------

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  int line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const std::string_view line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    for (const auto& [k, v] : out) {
      if (k == key) throw ConfigError("config line " + std::to_string(line_no) + ": repeated key " + key);
    }
    out.emplace_back(key, value);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

namespace {
const char* const kSynthKeys[] = {
    "synth_seed",      "num_source",       "num_dev",          "num_test",
    "num_target",      "source_aspects",   "source_opinions",  "target_aspects",
    "target_opinions", "max_len",          "two_triplet_rate", "two_token_aspect_rate",
    "cue_rate",
};
}  // namespace

bool is_synth_key(std::string_view key) {
  return std::find(std::begin(kSynthKeys), std::end(kSynthKeys), key) != std::end(kSynthKeys);
}

void set_synth_value(SynthConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "synth_seed") cfg.seed = parse_seed_list(value).at(0);
  else if (key == "num_source") cfg.num_source = to_int(key, value);
  else if (key == "num_dev") cfg.num_dev = to_int(key, value);
  else if (key == "num_target") cfg.num_target = to_int(key, value);
  else if (key == "num_test") cfg.num_test = to_int(key, value);
  else if (key == "source_aspects") cfg.source_aspects = to_int(key, value);
  else if (key == "source_opinions") cfg.source_opinions = to_int(key, value);
  else if (key == "target_aspects") cfg.target_aspects = to_int(key, value);
  else if (key == "target_opinions") cfg.target_opinions = to_int(key, value);
  else if (key == "max_len") cfg.max_len = to_int(key, value);
  else if (key == "two_triplet_rate") cfg.two_triplet_rate = to_double(key, value);
  else if (key == "two_token_aspect_rate") cfg.two_token_aspect_rate = to_double(key, value);
  else if (key == "cue_rate") cfg.cue_rate = to_double(key, value);
  else throw ConfigError("unknown synth key '" + std::string(key) + "'");
}

std::vector<std::uint64_t> parse_seed_list(std::string_view s) {
  std::vector<std::uint64_t> out;
  for (auto item : split(s, ',')) {
    const std::string t(item);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size()) {
      throw ConfigError("bad seed '" + t + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_grid(std::string_view s) {
  std::vector<double> out;
  for (auto item : split(s, ',')) {
    const double v = to_double("grid", item);
    if (v < 0.0) throw ConfigError("grid weights must be >= 0");
    out.push_back(v);
  }
  return out;
}

Ablations parse_ablation_row(std::string_view row) {
  if (row == "full") return {};
  return parse_ablations(row);
}

SeedStats seed_stats(const std::vector<double>& values) {
  SeedStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / double(values.size() - 1));
  }
  return s;
}

Datasets load_datasets(const fs::path& dir) {
  Datasets d;
  d.source_train = load_dataset(dir / kSourceTrainFile);
  d.source_dev = load_dataset(dir / kSourceDevFile);
  d.target_unlabeled = load_dataset(dir / kTargetUnlabeledFile);
  d.target_test = load_dataset(dir / kTargetTestFile);
  return d;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Table-filling mean teacher for cross-domain triplet extraction", "tfmt"};
  app.require_subcommand(1);

  std::string out_dir, data_dir, config, seed, ckpt, input, mode, variant, eta;
  std::string alpha_grid, beta_grid;
  bool force = false;

  auto* synth = app.add_subcommand("synth", "write a synthetic two-domain corpus");
  synth->add_option("--config", config, "flat key = value config file");
  synth->add_option("--seed", seed, "corpus seed");
  synth->add_option("--out", out_dir, "output directory")->required();

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "fit one model per seed");
  train_flags.attach(*train);
  train->add_option("--data", data_dir, "corpus directory written by synth")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--force", force, "overwrite existing metric logs");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled file");
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--input", input, "labeled corpus file")->required();
  eval->add_option("--mode", mode, "aste or aope; aope scores an aste model as pairs");
  eval->add_option("--out", out_dir, "directory for report CSV");

  auto* audit = app.add_subcommand("audit", "classify teacher pseudo labels against gold");
  audit->add_option("--checkpoint", ckpt)->required();
  audit->add_option("--input", input, "labeled target corpus file")->required();
  audit->add_option("--eta", eta, "confidence threshold (default: the checkpoint's)");
  audit->add_option("--out", out_dir, "directory for audit CSV");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check on a micro model");
  gradcheck->add_option("--seed", seed);
  gradcheck->add_option("--mode", mode, "aste or aope");
  gradcheck->add_option("--variant", variant, "ctfmt checks the cell head");
  gradcheck->add_option("--out", out_dir, "directory for the report CSV");

  TrainFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "ablation table and alpha/beta sweeps");
  ablate_flags.attach(*ablate);
  ablate->add_option("--data", data_dir, "corpus directory written by synth")->required();
  ablate->add_option("--out", out_dir, "output directory")->required();
  ablate->add_option("--alpha-grid", alpha_grid, "comma-separated alpha values");
  ablate->add_option("--beta-grid", beta_grid, "comma-separated beta values");
  ablate->add_flag("--force", force, "overwrite an existing table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(config, seed, out_dir, out);
    if (*train) return cmd_train(train_flags, data_dir, out_dir, force, out);
    if (*eval) return cmd_eval(ckpt, input, mode, out_dir, out);
    if (*audit) return cmd_audit(ckpt, input, eta, out_dir, out);
    if (*gradcheck) return cmd_gradcheck(seed, mode, variant, out_dir, out);
    if (*ablate) {
      return cmd_ablate(ablate_flags, data_dir, out_dir, alpha_grid, beta_grid, force, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace tfmt
