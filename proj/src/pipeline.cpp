#include "nidsdl/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <future>
#include <mutex>
#include <nlohmann/json.hpp>

#include "nidsdl/error.hpp"
#include "nidsdl/persist.hpp"

namespace nidsdl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw UsageError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw UsageError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected true/false)");
}

// Returns false if `key` is not a training key.
bool set_train_key(TrainConfig& t, std::string_view key, std::string_view value) {
  if (key == "epochs") t.epochs = parse_number<std::size_t>(key, value);
  else if (key == "lr") t.lr = parse_number<double>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "validation_fraction") t.validation_fraction = parse_number<double>(key, value);
  else if (key == "threshold") t.threshold = parse_number<double>(key, value);
  else if (key == "train_seed") t.seed = parse_number<std::uint64_t>(key, value);
  else return false;
  return true;
}

fs::path out_path(const RunConfig& c, std::string_view name) { return fs::path(c.out_dir) / name; }

void require_file(const fs::path& p, std::string_view hint) {
  if (!fs::exists(p)) {
    throw DataError("missing " + p.string() + "; " + std::string(hint));
  }
}

Encoder load_encoder(const RunConfig& c) {
  const auto p = out_path(c, files::encoder);
  require_file(p, "run `nidsdl prepare` first");
  return Encoder::from_json(read_file(p.string()));
}

EncodedDataset load_encoded(const fs::path& p) {
  require_file(p, "run `nidsdl prepare` first");
  std::ifstream in(p, std::ios::binary);
  try {
    return read_encoded(in);
  } catch (const DataError& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

std::vector<BinaryLabel> labels_of(const std::vector<RawRecord>& records) {
  std::vector<BinaryLabel> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(binarize_label(r.label));
  return out;
}

std::vector<RawRecord> pick(const std::vector<RawRecord>& records, const std::vector<std::size_t>& idx) {
  std::vector<RawRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(records[i]);
  return out;
}

std::size_t count_attacks(const EncodedDataset& d) { return d.positives(); }

void write_text(const fs::path& p, std::string_view text) { write_file(p.string(), text); }

}  // namespace

TrainConfig RunConfig::train_config(Arch arch) const {
  TrainConfig t = train;
  if (auto it = per_arch.find(arch); it != per_arch.end()) {
    for (const auto& [k, v] : it->second) set_train_key(t, k, v);
  }
  return t;
}

void RunConfig::apply_smoke() {
  train.epochs = 10;
  max_rows = 20000;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (const auto dot = key.find('.'); dot != std::string_view::npos) {
    const Arch arch = parse_arch(key.substr(0, dot));
    const auto sub = key.substr(dot + 1);
    TrainConfig probe;
    if (!set_train_key(probe, sub, value)) {
      throw UsageError("'" + std::string(sub) + "' is not a per-architecture setting");
    }
    per_arch[arch].emplace_back(std::string(sub), std::string(value));
    return;
  }
  if (set_train_key(train, key, value)) return;
  if (key == "dataset") dataset = std::string(value);
  else if (key == "out_dir") out_dir = std::string(value);
  else if (key == "ratio") ratio = parse_number<double>(key, value);
  else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
    train.seed = seed;
  } else if (key == "features") {
    if (value == "default") features = FeatureSet::default_set;
    else if (value == "top_k" || value == "top-k") features = FeatureSet::top_k;
    else throw UsageError("features must be 'default' or 'top_k'");
  } else if (key == "top_k") top_k = parse_number<std::size_t>(key, value);
  else if (key == "fit_on_all") fit_on_all = parse_bool(key, value);
  else if (key == "max_rows") max_rows = parse_number<std::size_t>(key, value);
  else if (key == "jobs") jobs = parse_number<std::size_t>(key, value);
  else if (key == "smoke") {
    if (parse_bool(key, value)) apply_smoke();
  } else {
    throw UsageError("unknown setting '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("ratio must lie in (0, 1)");
  if (jobs < 1) throw UsageError("jobs must be at least 1");
  if (features == FeatureSet::top_k && top_k == 0) throw UsageError("top_k must be at least 1");
  train.validate();
  for (const auto& [arch, _] : per_arch) train_config(arch).validate();
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(std::string_view(line).substr(0, line.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(text.substr(0, eq), text.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string model_file(Arch arch) { return std::string(arch_name(arch)) + std::string(kModelExtension); }
std::string history_file(Arch arch) { return std::string(arch_name(arch)) + "_history.csv"; }
std::string roc_file(Arch arch) { return "roc_" + std::string(arch_name(arch)) + ".csv"; }

std::vector<RawRecord> load_capped(const std::string& path, const FeatureSchema& schema, std::size_t max_rows) {
  std::vector<RawRecord> records;
  try {
    records = load_dataset(path, schema);
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.find(path) != std::string::npos) throw;
    throw DataError(path + ": " + what);
  }
  if (max_rows > 0 && records.size() > max_rows) records.resize(max_rows);
  return records;
}

PrepareSummary cmd_prepare(const RunConfig& config, std::ostream& log) {
  config.validate();
  if (config.dataset.empty()) throw UsageError("no dataset given");
  const auto base = FeatureSchema::nsl_kdd();
  const auto records = load_capped(config.dataset, base, config.max_rows);
  log << fmt::format("parsed {} records from {}\n", records.size(), config.dataset);

  const auto idx = split_indices(records.size(), config.ratio, config.seed);
  const auto train_records = pick(records, idx.train);
  const auto test_records = pick(records, idx.test);

  auto schema = base;
  if (config.features == FeatureSet::top_k) {
    const auto ranking = rank_features(train_records, labels_of(train_records), base);
    schema = base.with_selected(select_top_k(ranking, config.top_k));
  }

  Encoder encoder = fit_encoder(config.fit_on_all ? records : train_records, schema);
  if (!config.fit_on_all) {
    // Category sets carry no label information, so they come from every row; numeric
    // ranges stay train-only. This keeps rare categories that only land in the test
    // partition encodable.
    const Encoder everything = fit_encoder(records, schema);
    auto features = encoder.features();
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].kind == FeatureKind::categorical) features[i].vocab = everything.features()[i].vocab;
    }
    encoder = Encoder(std::move(features));
  }
  const auto train = encode_dataset(train_records, encoder);
  const auto test = encode_dataset(test_records, encoder);

  fs::create_directories(config.out_dir);
  write_text(out_path(config, files::encoder), encoder.to_json());
  for (auto [name, data] : {std::pair{files::train, &train}, std::pair{files::test, &test}}) {
    std::ofstream out(out_path(config, name), std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path(config, name).string());
    write_encoded(out, *data);
  }
  for (auto [name, recs] : {std::pair{files::train_raw, &train_records}, std::pair{files::test_raw, &test_records}}) {
    std::ofstream out(out_path(config, name), std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path(config, name).string());
    write_dataset(out, *recs);
  }

  PrepareSummary s;
  s.rows = records.size();
  s.train_rows = train.rows();
  s.test_rows = test.rows();
  s.train_attacks = count_attacks(train);
  s.test_attacks = count_attacks(test);
  for (const auto& f : encoder.features()) s.features.push_back(f.name);
  s.output_dim = encoder.output_dim();
  s.encoder_digest = encoder.digest();

  json doc = {{"rows", s.rows},
              {"ratio", config.ratio},
              {"seed", config.seed},
              {"fit_on_all", config.fit_on_all},
              {"train", {{"rows", s.train_rows}, {"attack", s.train_attacks}, {"normal", s.train_rows - s.train_attacks}}},
              {"test", {{"rows", s.test_rows}, {"attack", s.test_attacks}, {"normal", s.test_rows - s.test_attacks}}},
              {"features", s.features},
              {"output_dim", s.output_dim},
              {"encoder_digest", s.encoder_digest}};
  write_text(out_path(config, files::summary), doc.dump(2) + "\n");

  log << fmt::format("train {} rows ({} attack, {} normal)\n", s.train_rows, s.train_attacks,
                     s.train_rows - s.train_attacks);
  log << fmt::format("test  {} rows ({} attack, {} normal)\n", s.test_rows, s.test_attacks,
                     s.test_rows - s.test_attacks);
  log << fmt::format("{} features -> {} encoded columns, encoder {}\n", s.features.size(), s.output_dim,
                     s.encoder_digest);
  return s;
}

std::vector<Arch> parse_arch_list(std::string_view which) {
  if (which == "all") return all_archs();
  return {parse_arch(which)};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& h : history) {
    out += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", h.epoch, h.train_loss, h.val_loss, h.val_accuracy);
  }
  return out;
}

void cmd_train(const RunConfig& config, std::string_view which, std::ostream& log) {
  config.validate();
  const auto archs = parse_arch_list(which);
  const Encoder encoder = load_encoder(config);
  const EncodedDataset data = load_encoded(out_path(config, files::train));
  if (data.cols != encoder.output_dim()) throw DataError("training data width does not match the encoder");
  const std::string digest = encoder.digest();

  std::mutex log_mutex;
  auto run = [&](Arch arch) {
    const auto tc = config.train_config(arch);
    {
      std::lock_guard lock(log_mutex);
      log << fmt::format("[{}] training {} epochs, lr {}, batch {}, {} rows\n", arch_name(arch), tc.epochs, tc.lr,
                         tc.batch_size, data.rows());
    }
    Model model = build(arch, data.cols, tc.seed);
    model = train(std::move(model), data, tc, [&](Arch a, const EpochRecord& r) {
      std::lock_guard lock(log_mutex);
      log << fmt::format("[{}] epoch {}/{} loss {:.6f} val_loss {:.6f} val_acc {:.4f}\n", arch_name(a), r.epoch,
                         tc.epochs, r.train_loss, r.val_loss, r.val_accuracy);
    });
    write_text(out_path(config, model_file(arch)), save_model(model, digest));
    write_text(out_path(config, history_file(arch)), history_csv(model.history));
  };

  if (config.jobs <= 1 || archs.size() == 1) {
    for (auto a : archs) run(a);
    return;
  }
  for (std::size_t start = 0; start < archs.size(); start += config.jobs) {
    std::vector<std::future<void>> pending;
    for (std::size_t i = start; i < std::min(archs.size(), start + config.jobs); ++i) {
      pending.push_back(std::async(std::launch::async, run, archs[i]));
    }
    for (auto& f : pending) f.get();
  }
}

std::vector<EvalReport> cmd_evaluate(const RunConfig& config, std::string_view which, std::ostream& log) {
  const auto archs = parse_arch_list(which);
  const Encoder encoder = load_encoder(config);
  const EncodedDataset test = load_encoded(out_path(config, files::test));
  const std::string digest = encoder.digest();

  std::vector<EvalReport> reports;
  for (auto arch : archs) {
    const auto path = out_path(config, model_file(arch));
    if (!fs::exists(path)) {
      if (which == "all") continue;
      throw DataError("missing " + path.string() + "; run `nidsdl train " + std::string(arch_name(arch)) + "` first");
    }
    auto artifact = load_model(read_file(path.string()));
    if (artifact.encoder_digest != digest) {
      throw VerificationError(path.string() + " was trained with encoder " + artifact.encoder_digest +
                              ", but " + out_path(config, files::encoder).string() + " is " + digest);
    }
    const auto& model = artifact.model;
    if (test.cols != model.spec().input_dim) throw DataError("test data width does not match " + path.string());
    // One row at a time: the same arithmetic the service performs per request.
    const auto scores = model.predict_rows(test.matrix, 1);
    auto report = evaluate_scores(std::string(arch_name(arch)), scores, test.labels, model.config.threshold);
    write_text(out_path(config, roc_file(arch)), roc_points_csv(report));
    reports.push_back(std::move(report));
  }
  if (reports.empty()) throw DataError("no trained models in " + config.out_dir + "; run `nidsdl train all` first");

  write_text(out_path(config, files::metrics), metrics_csv(reports));
  write_text(out_path(config, files::confusion), confusion_csv(reports));
  write_text(out_path(config, files::auc), auc_csv(reports));
  write_text(out_path(config, files::report), reports_json(reports));

  log << fmt::format("{:<6} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "model", "accuracy", "precision", "recall", "f1",
                     "auc");
  for (const auto& r : reports) {
    log << fmt::format("{:<6} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f}\n", r.classifier, r.accuracy,
                       r.precision, r.recall, r.f1, r.auc);
  }
  return reports;
}

RankResult cmd_rank_features(const RunConfig& config, std::size_t k, std::ostream& log) {
  if (config.dataset.empty()) throw UsageError("no dataset given");
  const auto schema = FeatureSchema::nsl_kdd();
  const auto records = load_capped(config.dataset, schema, config.max_rows);
  RankResult result;
  result.report = rank_features(records, labels_of(records), schema);
  if (k == 0) {
    log << "warning: k = 0 selects no features\n";
  } else {
    result.selected = select_top_k(result.report, k);
  }
  const auto& defaults = default_features();
  for (const auto& name : result.selected) {
    result.overlap += std::find(defaults.begin(), defaults.end(), name) != defaults.end() ? 1 : 0;
  }

  std::string csv = "rank,feature,score\n";
  json ranking = json::array();
  for (std::size_t i = 0; i < result.report.ranking.size(); ++i) {
    const auto& f = result.report.ranking[i];
    csv += fmt::format("{},{},{:.9g}\n", i + 1, f.name, f.score);
    ranking.push_back({{"feature", f.name}, {"score", f.score}});
  }
  json doc = {{"rows", records.size()},
              {"k", k},
              {"selected", result.selected},
              {"overlap_with_default", result.overlap},
              {"default_size", defaults.size()},
              {"ranking", ranking}};
  fs::create_directories(config.out_dir);
  write_text(out_path(config, files::ranking), csv);
  write_text(out_path(config, files::selection), doc.dump(2) + "\n");

  for (const auto& name : result.selected) log << name << "\n";
  log << fmt::format("overlap with the default feature set: {}/{}\n", result.overlap, defaults.size());
  return result;
}

GradCheckSummary cmd_gradcheck(double tolerance, const std::vector<std::string>& layers, std::size_t seeds,
                               std::ostream& log) {
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (seeds == 0) throw UsageError("seeds must be at least 1");
  const auto& known = nn::gradcheck_layer_kinds();
  const auto& kinds = layers.empty() ? known : layers;
  for (const auto& k : kinds) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw UsageError("unknown layer kind '" + k + "'");
    }
  }
  nn::GradCheckOptions options;
  options.tolerance = tolerance;

  GradCheckSummary summary;
  for (const auto& kind : kinds) {
    double worst = 0.0;
    std::size_t failed = 0;
    for (std::size_t seed = 0; seed < seeds; ++seed) {
      auto report = nn::check_layer(kind, seed, options);
      ++summary.checks;
      worst = std::max(worst, report.max_rel_error);
      if (!report.passed) {
        ++failed;
        log << fmt::format("  FAIL {} seed {} ({}): {}[{}] analytic {:.9g} numeric {:.9g} rel err {:.3g}\n", kind,
                           seed, report.fragment, report.worst_tensor, report.worst_index, report.worst_analytic,
                           report.worst_numeric, report.max_rel_error);
        summary.failures.push_back(std::move(report));
      }
    }
    log << fmt::format("{:<8} {:>3} seeds  max rel err {:.3e}  {}\n", kind, seeds, worst,
                       failed == 0 ? "ok" : fmt::format("{} failed", failed));
  }
  return summary;
}

}  // namespace nidsdl
