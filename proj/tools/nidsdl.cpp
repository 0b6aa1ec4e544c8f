// nidsdl: prepare data, train and evaluate the five detectors, serve one of them.

#include <csignal>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "nidsdl/error.hpp"
#include "nidsdl/persist.hpp"
#include "nidsdl/pipeline.hpp"
#include "nidsdl/serve.hpp"
#include "nidsdl/synthetic.hpp"

using namespace nidsdl;

namespace {

struct GlobalFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::string dataset;
  std::string out_dir;
  std::string features;
  std::size_t top_k = 0;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  bool smoke = false;
  bool fit_on_all = false;
};

RunConfig resolve(const GlobalFlags& g, const CLI::App& app) {
  RunConfig c;
  if (!g.config_file.empty()) load_config_file(c, g.config_file);
  if (g.smoke) c.apply_smoke();
  if (app.count("--dataset")) c.dataset = g.dataset;
  if (app.count("--out")) c.out_dir = g.out_dir;
  if (app.count("--features")) c.set("features", g.features);
  if (app.count("--top-k")) c.top_k = g.top_k;
  if (app.count("--ratio")) c.ratio = g.ratio;
  if (app.count("--seed")) c.set("seed", std::to_string(g.seed));
  if (app.count("--jobs")) c.jobs = g.jobs;
  if (g.fit_on_all) c.fit_on_all = true;
  for (const auto& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

int run_serve(const std::string& model_path, const std::string& encoder_path, const std::string& host,
              std::uint16_t port, std::optional<double> threshold) {
  auto artifact = load_model(read_file(model_path));
  auto encoder = Encoder::from_json(read_file(encoder_path));
  const double t = threshold.value_or(artifact.model.config.threshold);
  auto classifier = std::make_shared<const Classifier>(std::move(artifact), std::move(encoder), t);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(classifier);
  server.start(host, port);
  std::cerr << fmt::format("serving {} on {}:{} (threshold {})\n", arch_name(classifier->model().spec().arch),
                           host, server.port(), t);
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-learning network intrusion detection: data preparation, training, evaluation, serving"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("-c,--config", g.config_file, "key = value configuration file");
  app.add_option("--set", g.sets, "override a setting, e.g. --set epochs=20 or --set cnn.lr=0.001");
  app.add_option("--dataset", g.dataset, "NSL-KDD formatted training file");
  app.add_option("-o,--out", g.out_dir, "output directory (default: run)");
  app.add_option("--features", g.features, "feature set: default or top_k");
  app.add_option("--top-k", g.top_k, "number of ranked features when --features top_k");
  app.add_option("--ratio", g.ratio, "training fraction of the split (default 0.85)");
  app.add_option("--seed", g.seed, "seed for the split and for training (default 42)");
  app.add_option("--jobs", g.jobs, "architectures trained concurrently by `train all`");
  app.add_flag("--smoke", g.smoke, "smoke profile: 10 epochs, first 20,000 rows");
  app.add_flag("--fit-on-all", g.fit_on_all, "fit the encoder on all rows instead of the training partition");

  auto* prepare = app.add_subcommand("prepare", "parse, split, fit the encoder and encode both partitions");

  std::string train_which;
  auto* train_cmd = app.add_subcommand("train", "train one architecture or all five");
  train_cmd->add_option("arch", train_which, "dnn, cnn, rnn, lstm, gru or all")->required();

  std::string eval_which = "all";
  auto* evaluate = app.add_subcommand("evaluate", "score trained models on the test partition");
  evaluate->add_option("arch", eval_which, "dnn, cnn, rnn, lstm, gru or all (default)");

  std::size_t k = 12;
  auto* rank = app.add_subcommand("rank-features", "rank features by |Pearson r| with the attack label");
  rank->add_option("-k", k, "number of features to select (default 12)");

  double tolerance = 1e-4;
  std::vector<std::string> layers;
  std::size_t seeds = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every layer's backward pass");
  gradcheck->add_option("--tolerance", tolerance, "relative error bound (default 1e-4)");
  gradcheck->add_option("--layer", layers, "restrict to these layer kinds");
  gradcheck->add_option("--seeds", seeds, "random fragments per layer kind (default 20)");

  std::string model_path, encoder_path, host = "127.0.0.1";
  std::uint16_t port = 9000;
  std::optional<double> threshold;
  auto* serve = app.add_subcommand("serve", "classify newline-delimited JSON requests over TCP");
  serve->add_option("--model", model_path, "model artifact (.nidsmodel)")->required();
  serve->add_option("--encoder", encoder_path, "encoder file (.nidsenc)")->required();
  serve->add_option("--host", host, "bind address (default 127.0.0.1)");
  serve->add_option("--port", port, "TCP port, 0 for any free port (default 9000)");
  serve->add_option("--threshold", threshold, "decision threshold (default: the model's)");

  SyntheticOptions synth_opts;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write synthetic NSL-KDD formatted records");
  synth->add_option("--rows", synth_opts.rows, "number of records (default 5000)");
  synth->add_option("--seed", synth_opts.seed, "generator seed (default 7)");
  synth->add_option("--overlap", synth_opts.overlap, "fraction of rows drawn from the other class's profile");
  synth->add_option("--output", synth_out, "destination file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    if (*synth) {
      std::ofstream out(synth_out, std::ios::binary | std::ios::trunc);
      if (!out) throw DataError("cannot write '" + synth_out + "'");
      write_dataset(out, synthetic_records(synth_opts));
      return 0;
    }
    if (*gradcheck) {
      const auto summary = cmd_gradcheck(tolerance, layers, seeds, std::cerr);
      if (!summary.passed()) {
        throw VerificationError(fmt::format("{} of {} gradient checks exceeded tolerance {:g}",
                                            summary.failures.size(), summary.checks, tolerance));
      }
      std::cerr << fmt::format("all {} gradient checks within {:g}\n", summary.checks, tolerance);
      return 0;
    }
    if (*serve) return run_serve(model_path, encoder_path, host, port, threshold);

    const RunConfig config = resolve(g, app);
    if (*prepare) cmd_prepare(config, std::cerr);
    else if (*train_cmd) cmd_train(config, train_which, std::cerr);
    else if (*evaluate) cmd_evaluate(config, eval_which, std::cerr);
    else if (*rank) cmd_rank_features(config, k, std::cerr);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  }
}
