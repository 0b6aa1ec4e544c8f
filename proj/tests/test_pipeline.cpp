#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "nidsdl/error.hpp"
#include "nidsdl/persist.hpp"
#include "nidsdl/pipeline.hpp"
#include "nidsdl/synthetic.hpp"
#include "support.hpp"

using namespace nidsdl;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr together
};

Run cli(const std::string& args) {
  const testkit::TempDir dir;
  const std::string capture = dir.file("output.txt");
  const std::string cmd = std::string(NIDSDL_CLI_PATH) + " " + args + " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = read_file(capture);
  return r;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

}  // namespace

TEST(RunConfig, DefaultsAndOverrides) {
  RunConfig c;
  EXPECT_EQ(c.ratio, 0.85);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.epochs, 100u);
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.batch_size, 1024u);
  c.set("epochs", "7");
  c.set("rnn.lr", "0.001");
  c.set("seed", "9");
  c.set("features", "top_k");
  c.set("fit_on_all", "true");
  EXPECT_EQ(c.train_config(Arch::dnn).epochs, 7u);
  EXPECT_EQ(c.train_config(Arch::dnn).lr, 0.01);
  EXPECT_EQ(c.train_config(Arch::rnn).lr, 0.001);
  EXPECT_EQ(c.train_config(Arch::rnn).epochs, 7u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.features, FeatureSet::top_k);
  EXPECT_TRUE(c.fit_on_all);
}

TEST(RunConfig, SmokeProfile) {
  RunConfig c;
  c.apply_smoke();
  EXPECT_EQ(c.train.epochs, 10u);
  EXPECT_EQ(c.max_rows, 20000u);
}

TEST(RunConfig, RejectsBadSettings) {
  RunConfig c;
  EXPECT_THROW(c.set("bogus", "1"), UsageError);
  EXPECT_THROW(c.set("epochs", "ten"), UsageError);
  EXPECT_THROW(c.set("fit_on_all", "maybe"), UsageError);
  EXPECT_THROW(c.set("features", "random"), UsageError);
  EXPECT_THROW(c.set("mlp.lr", "0.1"), UsageError);
  EXPECT_THROW(c.set("cnn.ratio", "0.5"), UsageError);
  c.ratio = 1.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(RunConfig, ConfigFile) {
  testkit::TempDir dir;
  const auto path = dir.file("run.conf");
  {
    std::ofstream out(path);
    out << "# comment\n\ndataset = data/x.txt\nepochs=3\n  gru.batch_size = 64  \n";
  }
  RunConfig c;
  load_config_file(c, path);
  EXPECT_EQ(c.dataset, "data/x.txt");
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train_config(Arch::gru).batch_size, 64u);
  {
    std::ofstream out(path);
    out << "epochs = 3\nno equals sign here\n";
  }
  try {
    load_config_file(c, path);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
  EXPECT_THROW(load_config_file(c, dir.file("missing.conf")), UsageError);
}

TEST(ArchList, ParsesAllAndSingle) {
  EXPECT_EQ(parse_arch_list("all"), all_archs());
  EXPECT_EQ(parse_arch_list("cnn"), std::vector<Arch>{Arch::cnn});
  EXPECT_THROW(parse_arch_list("svm"), UsageError);
}

TEST(Prepare, SyntheticSplitAndFiles) {
  testkit::TempDir dir;
  SyntheticOptions opts;
  opts.rows = 1000;
  {
    std::ofstream out(dir.file("data.txt"));
    write_dataset(out, synthetic_records(opts));
  }
  RunConfig c;
  c.dataset = dir.file("data.txt");
  c.out_dir = dir.file("run");
  c.ratio = 0.75;
  std::ostringstream log;
  const auto s = cmd_prepare(c, log);
  EXPECT_EQ(s.rows, 1000u);
  EXPECT_EQ(s.train_rows, 750u);
  EXPECT_EQ(s.test_rows, 250u);
  EXPECT_EQ(s.features, default_features());
  for (const char* f : {files::encoder, files::train, files::test, files::train_raw, files::test_raw, files::summary}) {
    EXPECT_TRUE(fs::exists(dir.path() / "run" / f)) << f;
  }
  const auto enc = Encoder::from_json(slurp(dir.path() / "run" / files::encoder));
  EXPECT_EQ(enc.digest(), s.encoder_digest);
  EXPECT_EQ(enc.output_dim(), s.output_dim);

  c.max_rows = 100;
  EXPECT_EQ(cmd_prepare(c, log).rows, 100u);

  c.dataset = dir.file("absent.txt");
  EXPECT_THROW(cmd_prepare(c, log), DataError);
}

TEST(Train, UnpreparedDirectoryIsActionable) {
  testkit::TempDir dir;
  RunConfig c;
  c.out_dir = dir.file("empty");
  std::ostringstream log;
  try {
    cmd_train(c, "dnn", log);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("prepare"), std::string::npos) << e.what();
  }
}

TEST(GradCheckCommand, SelectionAndTolerance) {
  std::ostringstream log;
  const auto ok = cmd_gradcheck(1e-4, {"dense"}, 3, log);
  EXPECT_TRUE(ok.passed());
  EXPECT_EQ(ok.checks, 3u);
  EXPECT_EQ(log.str().find("lstm"), std::string::npos);
  const auto tight = cmd_gradcheck(1e-12, {"lstm"}, 2, log);
  EXPECT_FALSE(tight.passed());
  EXPECT_THROW(cmd_gradcheck(1e-4, {"attention"}, 1, log), UsageError);
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testkit::TempDir();
    data_ = dir_->file("synthetic.txt");
    ASSERT_EQ(cli("synth --rows 1500 --seed 5 --output " + data_).code, 0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string base(const std::string& out) {
    return "--dataset " + data_ + " --out " + dir_->file(out) + " --set epochs=2 --set batch_size=128";
  }

  static testkit::TempDir* dir_;
  static std::string data_;
};

testkit::TempDir* Cli::dir_ = nullptr;
std::string Cli::data_;

TEST_F(Cli, PrepareTrainEvaluateIsReproducible) {
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(cli(base(out) + " prepare").code, 0);
    const auto train = cli(base(out) + " train all");
    ASSERT_EQ(train.code, 0) << train.output;
    const auto eval = cli(base(out) + " evaluate");
    ASSERT_EQ(eval.code, 0) << eval.output;
    EXPECT_NE(eval.output.find("accuracy"), std::string::npos);
  }
  const auto a = dir_->path() / "a";
  const auto b = dir_->path() / "b";
  for (auto arch : all_archs()) {
    const auto model = model_file(arch);
    ASSERT_TRUE(fs::exists(a / model)) << model;
    EXPECT_EQ(slurp(a / model), slurp(b / model)) << model;
    EXPECT_TRUE(fs::exists(a / history_file(arch)));
    EXPECT_TRUE(fs::exists(a / roc_file(arch)));
  }
  for (const char* f : {files::encoder, files::train, files::test, files::metrics, files::confusion, files::auc}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto metrics = slurp(a / files::metrics);
  EXPECT_EQ(metrics.rfind("classifier,accuracy,precision,recall,f1\n", 0), 0u);
  const auto report = nlohmann::json::parse(slurp(a / files::report));
  EXPECT_EQ(report.size(), 5u);

  // Re-running prepare and training leaves every artifact unchanged.
  const auto before = slurp(a / model_file(Arch::gru));
  ASSERT_EQ(cli(base("a") + " prepare").code, 0);
  ASSERT_EQ(cli(base("a") + " train gru").code, 0);
  EXPECT_EQ(slurp(a / model_file(Arch::gru)), before);
}

TEST_F(Cli, EvaluateRefusesForeignEncoder) {
  ASSERT_EQ(cli(base("c") + " prepare").code, 0);
  ASSERT_EQ(cli(base("c") + " train dnn").code, 0);
  ASSERT_EQ(cli(base("c") + " --features top_k --top-k 5 prepare").code, 0);
  const auto r = cli(base("c") + " evaluate dnn");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("encoder"), std::string::npos);
}

TEST_F(Cli, RankFeatures) {
  const auto r = cli("--dataset " + data_ + " --out " + dir_->file("rank") + " rank-features -k 12");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("overlap with the default feature set:"), std::string::npos);
  const auto sel = nlohmann::json::parse(slurp(dir_->path() / "rank" / files::selection));
  EXPECT_TRUE(fs::exists(dir_->path() / "rank" / files::ranking));
  const auto zero = cli("--dataset " + data_ + " --out " + dir_->file("rank0") + " rank-features -k 0");
  EXPECT_EQ(zero.code, 0);
  EXPECT_NE(zero.output.find("warning"), std::string::npos);
}

TEST_F(Cli, TopKFeatureSet) {
  const auto r = cli(base("topk") + " --features top_k --top-k 5 prepare");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto summary = nlohmann::json::parse(slurp(dir_->path() / "topk" / files::summary));
  EXPECT_EQ(summary.at("features").size(), 5u);
}

TEST(CliExitCodes, UsageDataVerification) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("--no-such-flag prepare").code, 1);
  EXPECT_EQ(cli("--out /tmp/nidsdl-none train svm").code, 1);
  const auto missing = cli("--dataset /nonexistent/KDDTrain+.txt --out /tmp/nidsdl-none prepare");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.output.find("/nonexistent/KDDTrain+.txt"), std::string::npos);
  const auto gc = cli("gradcheck --layer dense --seeds 2");
  EXPECT_EQ(gc.code, 0) << gc.output;
  const auto tight = cli("gradcheck --tolerance 1e-12 --layer lstm --seeds 2");
  EXPECT_EQ(tight.code, 3);
  EXPECT_NE(tight.output.find("FAIL lstm"), std::string::npos);
  EXPECT_EQ(tight.output.find("dense"), std::string::npos);
  EXPECT_EQ(cli("--help").code, 0);
}
