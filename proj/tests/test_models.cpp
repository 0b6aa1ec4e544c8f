#include <gtest/gtest.h>

#include <random>

#include "nidsdl/error.hpp"
#include "nidsdl/models.hpp"
#include "nidsdl/nn/gradcheck.hpp"
#include "nidsdl/nn/ops.hpp"

using namespace nidsdl;

namespace {

// Two classes split by the plane sum(x) = d/2, with a margin kept empty.
EncodedDataset separable(std::size_t rows, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EncodedDataset data;
  data.cols = d;
  while (data.rows() < rows) {
    std::vector<double> x(d);
    double s = 0.0;
    for (auto& v : x) s += (v = u(rng));
    const double margin = s - static_cast<double>(d) / 2.0;
    if (std::fabs(margin) < 0.05 * static_cast<double>(d)) continue;
    data.matrix.insert(data.matrix.end(), x.begin(), x.end());
    data.labels.push_back(margin > 0 ? 1 : 0);
  }
  return data;
}

std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

TEST(Arch, NamesRoundTrip) {
  for (auto a : all_archs()) EXPECT_EQ(parse_arch(arch_name(a)), a);
  EXPECT_EQ(parse_arch("LSTM"), Arch::lstm);
  EXPECT_THROW(parse_arch("transformer"), UsageError);
  EXPECT_EQ(all_archs().size(), 5u);
}

TEST(Build, DnnHasFourHiddenLayers) {
  const auto m = build(Arch::dnn, 92, 1);
  ASSERT_EQ(m.spec().layer_plan.size(), 5u);
  EXPECT_EQ(m.spec().layer_plan.back(), "dense(in=16,out=1,act=sigmoid)");
  EXPECT_EQ(m.spec().parameter_count, dense_params(92, 128) + dense_params(128, 64) + dense_params(64, 32) +
                                          dense_params(32, 16) + dense_params(16, 1));
}

TEST(Build, ParameterCounts) {
  const std::size_t head = dense_params(64, 1);
  // 10 -> conv 8 -> pool 4 -> conv 2 -> pool 1 step of 64 channels
  EXPECT_EQ(build(Arch::cnn, 10, 1).spec().parameter_count,
            (32 * 3 + 32) + (64 * 3 * 32 + 64) + dense_params(64, 64) + head);
  EXPECT_EQ(build(Arch::rnn, 20, 1).spec().parameter_count, (64 + 64 * 64 + 64) + head);
  EXPECT_EQ(build(Arch::lstm, 20, 1).spec().parameter_count, 4 * (64 + 64 * 64 + 64) + head);
  EXPECT_EQ(build(Arch::gru, 20, 1).spec().parameter_count, 3 * (64 + 64 * 64 + 64) + head);
  // Recurrent parameter counts do not depend on the sequence length.
  EXPECT_EQ(build(Arch::gru, 93, 1).spec().parameter_count, build(Arch::gru, 20, 1).spec().parameter_count);
}

TEST(Build, DeterministicPerSeed) {
  for (auto a : all_archs()) {
    const auto m1 = build(a, 16, 7);
    const auto m2 = build(a, 16, 7);
    const auto m3 = build(a, 16, 8);
    const auto p1 = m1.network().parameters();
    const auto p2 = m2.network().parameters();
    const auto p3 = m3.network().parameters();
    bool differs = false;
    for (std::size_t i = 0; i < p1.size(); ++i) {
      EXPECT_EQ(*p1[i], *p2[i]) << arch_name(a);
      differs |= !(*p1[i] == *p3[i]);
    }
    EXPECT_TRUE(differs) << arch_name(a);
  }
}

TEST(Build, Errors) {
  EXPECT_THROW(build(Arch::cnn, 0, 1), UsageError);
  EXPECT_THROW(build(Arch::dnn, 0, 1), UsageError);
  EXPECT_THROW(build(Arch::cnn, min_input_dim(Arch::cnn) - 1, 1), UsageError);
  EXPECT_NO_THROW(build(Arch::cnn, min_input_dim(Arch::cnn), 1));
}

TEST(Predict, ZeroInitializedDnnScoresHalf) {
  auto m = build(Arch::dnn, 5, 1);
  for (auto* p : m.network().parameters()) p->fill(0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = u(rng);
    EXPECT_EQ(m.predict(x), 0.5);
  }
  EXPECT_TRUE(is_attack(0.5, 0.5));
  EXPECT_FALSE(is_attack(std::nextafter(0.5, 0.0), 0.5));
}

TEST(Predict, ScoresInUnitIntervalAndLengthChecked) {
  const auto data = separable(50, 12, 3);
  for (auto a : all_archs()) {
    const auto m = build(a, 12, 4);
    for (double s : m.predict(data)) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    EXPECT_THROW(m.predict(std::vector<double>(11)), DataError);
  }
}

TEST(Predict, BatchingDoesNotChangeScores) {
  const auto data = separable(37, 12, 5);
  for (auto a : all_archs()) {
    const auto m = build(a, 12, 6);
    const auto whole = m.predict_rows(data.matrix, 1024);
    const auto single = m.predict_rows(data.matrix, 1);
    ASSERT_EQ(whole.size(), single.size());
    for (std::size_t i = 0; i < whole.size(); ++i) EXPECT_NEAR(whole[i], single[i], 1e-12) << arch_name(a);
  }
}

TEST(Train, DnnSeparatesLinearlySeparableSet) {
  const auto data = separable(1000, 2, 7);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  const auto m = train(build(Arch::dnn, 2, 8), data, cfg);
  const auto scores = m.predict(data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (is_attack(scores[i], 0.5) ? 1u : 0u) == data.labels[i];
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(data.rows()), 0.99);
}

TEST(Train, EveryArchitectureReducesLoss) {
  const auto data = separable(300, 10, 9);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  cfg.lr = 0.005;
  for (auto a : all_archs()) {
    const auto m = train(build(a, 10, 10), data, cfg);
    ASSERT_EQ(m.history.size(), 5u);
    EXPECT_LT(m.history.back().train_loss, m.history.front().train_loss) << arch_name(a);
  }
}

TEST(Train, HistoryLengthAndDeterminism) {
  const auto data = separable(200, 4, 11);
  TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_EQ(train(build(Arch::gru, 4, 1), data, cfg).history.size(), 1u);
  cfg.epochs = 3;
  cfg.batch_size = 16;
  const auto a = train(build(Arch::lstm, 4, 1), data, cfg);
  const auto b = train(build(Arch::lstm, 4, 1), data, cfg);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.history[i].epoch, i + 1);
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
    EXPECT_EQ(a.history[i].val_accuracy, b.history[i].val_accuracy);
  }
  const auto pa = a.network().parameters();
  const auto pb = b.network().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
  EXPECT_EQ(a.config.epochs, 3u);
}

TEST(Train, NoValidationSliceReportsNaN) {
  const auto data = separable(100, 3, 12);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.validation_fraction = 0.0;
  const auto m = train(build(Arch::dnn, 3, 1), data, cfg);
  EXPECT_TRUE(std::isnan(m.history[0].val_loss));
  EXPECT_TRUE(std::isnan(m.history[0].val_accuracy));
}

TEST(Train, Errors) {
  auto data = separable(100, 3, 13);
  TrainConfig cfg;
  cfg.epochs = 1;
  auto single = data;
  std::fill(single.labels.begin(), single.labels.end(), std::uint8_t{1});
  EXPECT_THROW(train(build(Arch::dnn, 3, 1), single, cfg), DataError);
  EXPECT_THROW(train(build(Arch::dnn, 4, 1), data, cfg), DataError);
  cfg.epochs = 0;
  EXPECT_THROW(train(build(Arch::dnn, 3, 1), data, cfg), UsageError);
  cfg.epochs = 1;
  cfg.lr = 0.0;
  EXPECT_THROW(train(build(Arch::dnn, 3, 1), data, cfg), UsageError);
}

TEST(Train, CallbackSeesEveryEpoch) {
  const auto data = separable(100, 3, 14);
  TrainConfig cfg;
  cfg.epochs = 4;
  std::vector<std::size_t> seen;
  train(build(Arch::rnn, 3, 1), data, cfg, [&](Arch a, const EpochRecord& r) {
    EXPECT_EQ(a, Arch::rnn);
    seen.push_back(r.epoch);
  });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
}

// Whole-network gradients through the fused sigmoid + cross-entropy path.
TEST(ModelGradCheck, SampledCoordinatesForEveryArchitecture) {
  const auto data = separable(6, 10, 15);
  nn::Tensor x({data.rows(), data.cols}, data.matrix);
  nn::Tensor y({data.rows(), 1});
  for (std::size_t i = 0; i < data.rows(); ++i) y[i] = data.labels[i];
  for (auto a : all_archs()) {
    auto m = build(a, 10, 16);
    auto& net = m.network();
    nn::GradCheckTarget target;
    target.names = net.parameter_names();
    target.wrt = net.parameters();
    target.loss = [&] { return nn::bce_loss(net.forward(x), y).loss; };
    target.analytic = [&] {
      std::vector<nn::LayerCache> caches;
      const auto p = net.forward(x, &caches);
      nn::Tensor dz(p.shape());
      for (std::size_t i = 0; i < p.size(); ++i) dz[i] = (p[i] - y[i]) / static_cast<double>(p.size());
      auto grads = net.zero_gradients();
      net.backward(dz, caches, grads, true);
      std::vector<nn::Tensor> flat;
      for (auto& layer : grads) {
        for (auto& g : layer) flat.push_back(std::move(g));
      }
      return flat;
    };
    nn::GradCheckOptions opts;
    opts.max_coords_per_tensor = 6;
    opts.seed = 17;
    const auto r = nn::grad_check(target, opts);
    EXPECT_TRUE(r.passed) << arch_name(a) << ": " << r.worst_tensor << " rel " << r.max_rel_error;
  }
}
