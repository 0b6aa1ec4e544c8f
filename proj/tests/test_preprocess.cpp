#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nidsdl/error.hpp"
#include "nidsdl/preprocess.hpp"
#include "support.hpp"

using namespace nidsdl;

namespace {

RawRecord with_values(const FeatureSchema& schema, std::initializer_list<std::pair<const char*, const char*>> kv,
                      std::string label = "normal") {
  RawRecord r;
  for (const auto& f : schema.features()) r.values.push_back(f.kind == FeatureKind::categorical ? "x" : "0");
  for (const auto& [name, value] : kv) r.values[schema.require_index(name)] = value;
  r.label = std::move(label);
  return r;
}

std::vector<RawRecord> random_records(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  const auto schema = FeatureSchema::nsl_kdd();
  std::vector<RawRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testkit::random_record(rng, schema));
  return out;
}

// Plain two-pass Pearson correlation in long double.
long double pearson_oracle(const std::vector<long double>& x, const std::vector<long double>& y) {
  const long double n = static_cast<long double>(x.size());
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0;
  return std::fabs(sxy / std::sqrt(sxx * syy));
}

FeatureSchema small_schema(std::vector<std::string> selected = {"a"}) {
  return FeatureSchema({{"a", FeatureKind::numeric}, {"b", FeatureKind::numeric}, {"c", FeatureKind::categorical}},
                       std::move(selected));
}

}  // namespace

TEST(MinMax, Examples) {
  EXPECT_EQ(min_max(58329, 0, 58329), 1.0);
  EXPECT_EQ(min_max(0, 0, 58329), 0.0);
  EXPECT_EQ(min_max(29164.5, 0, 58329), 0.5);
  EXPECT_EQ(min_max(3, 3, 3), 0.0);
  EXPECT_EQ(min_max(-5, 0, 10), 0.0);
  EXPECT_EQ(min_max(50, 0, 10), 1.0);
  EXPECT_THROW(min_max(1, 2, 1), std::invalid_argument);
}

TEST(Encoder, SortedVocabularyAndOneHotBlock) {
  const auto schema = FeatureSchema::nsl_kdd().with_selected({"protocol_type", "duration"});
  std::vector<RawRecord> records = {
      with_values(schema, {{"protocol_type", "udp"}, {"duration", "0"}}),
      with_values(schema, {{"protocol_type", "tcp"}, {"duration", "58329"}}),
      with_values(schema, {{"protocol_type", "icmp"}, {"duration", "100"}}),
  };
  const auto enc = fit_encoder(records, schema);
  ASSERT_EQ(enc.features().size(), 2u);
  EXPECT_EQ(enc.features()[0].vocab, (std::vector<std::string>{"icmp", "tcp", "udp"}));
  EXPECT_EQ(enc.features()[1].min, 0.0);
  EXPECT_EQ(enc.features()[1].max, 58329.0);
  EXPECT_EQ(enc.output_dim(), 4u);
  EXPECT_EQ(enc.encode(records[1]), (std::vector<double>{0, 1, 0, 1}));
  EXPECT_EQ(enc.encode(records[0]), (std::vector<double>{0, 0, 1, 0}));
}

TEST(Encoder, UnselectedFeatureContributesNoColumn) {
  const auto schema = FeatureSchema::nsl_kdd();
  const auto enc = fit_encoder(random_records(1, 50), schema);
  for (const auto& col : enc.layout()) EXPECT_NE(col.feature, "src_bytes");
}

TEST(Encoder, MinimaAndFirstCategoriesGiveLeadingOnes) {
  const auto schema = FeatureSchema::nsl_kdd();
  const auto records = random_records(2, 300);
  const auto enc = fit_encoder(records, schema);
  std::vector<FeatureValue> values;
  for (const auto& f : enc.features()) {
    if (f.kind == FeatureKind::categorical) values.emplace_back(f.vocab.front());
    else values.emplace_back(f.min);
  }
  const auto x = enc.encode_values(values);
  std::size_t col = 0;
  for (const auto& f : enc.features()) {
    for (std::size_t j = 0; j < f.width(); ++j, ++col) {
      const double expected = f.kind == FeatureKind::categorical && j == 0 ? 1.0 : 0.0;
      EXPECT_EQ(x[col], expected) << f.name;
    }
  }
}

TEST(Encoder, ExactlyThreeOnesForDefaultFeatures) {
  const auto records = random_records(3, 400);
  const auto enc = fit_encoder(records, FeatureSchema::nsl_kdd());
  for (const auto& r : records) {
    const auto x = enc.encode(r);
    std::size_t ones = 0;
    std::size_t col = 0;
    for (const auto& f : enc.features()) {
      if (f.kind == FeatureKind::categorical) {
        ones += static_cast<std::size_t>(std::count(x.begin() + col, x.begin() + col + f.width(), 1.0));
      }
      col += f.width();
    }
    EXPECT_EQ(ones, 3u);
  }
}

TEST(Encoder, UnseenCategoryNamesFeatureAndValue) {
  const auto schema = FeatureSchema::nsl_kdd();
  auto records = random_records(4, 20);
  const auto enc = fit_encoder(records, schema);
  auto r = records[0];
  r.values[schema.require_index("service")] = "never_seen";
  try {
    enc.encode(r);
    FAIL() << "expected UnseenCategory";
  } catch (const UnseenCategory& e) {
    EXPECT_EQ(e.feature(), "service");
    EXPECT_EQ(e.value(), "never_seen");
    EXPECT_NE(std::string(e.what()).find("unseen category"), std::string::npos);
  }
}

TEST(Encoder, FitErrors) {
  EXPECT_THROW(fit_encoder({}, FeatureSchema::nsl_kdd()), DataError);
}

TEST(Encoder, JsonRoundTripAndDigest) {
  const auto enc = fit_encoder(random_records(5, 200), FeatureSchema::nsl_kdd());
  const auto text = enc.to_json();
  const auto back = Encoder::from_json(text);
  EXPECT_EQ(back.to_json(), text);
  EXPECT_EQ(back.digest(), enc.digest());
  EXPECT_EQ(back.output_dim(), enc.output_dim());
  const auto other = fit_encoder(random_records(6, 200), FeatureSchema::nsl_kdd());
  EXPECT_NE(other.digest(), enc.digest());
  EXPECT_THROW(Encoder::from_json("{"), DataError);
  EXPECT_THROW(Encoder::from_json("{\"kind\":\"other\"}"), DataError);
}

TEST(EncodedDataset, BinaryRoundTrip) {
  const auto records = random_records(7, 100);
  const auto data = encode_dataset(records, fit_encoder(records, FeatureSchema::nsl_kdd()));
  std::stringstream buf;
  write_encoded(buf, data);
  const auto back = read_encoded(buf);
  EXPECT_EQ(back.cols, data.cols);
  EXPECT_EQ(back.matrix, data.matrix);
  EXPECT_EQ(back.labels, data.labels);
  std::stringstream junk("garbage");
  EXPECT_THROW(read_encoded(junk), DataError);
}

// Property suite: every fit, every record the fit saw, and records beyond its ranges.
TEST(EncoderProperties, ValuesInUnitIntervalAndBlocksOneHot) {
  const auto schema = FeatureSchema::nsl_kdd();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto records = random_records(1000 + seed, 60);
    const std::vector<RawRecord> fit_rows(records.begin(), records.begin() + 30);
    const auto enc = fit_encoder(fit_rows, schema);
    for (const auto& r : records) {
      std::vector<double> x;
      try {
        x = enc.encode(r);
      } catch (const UnseenCategory&) {
        continue;
      }
      ASSERT_EQ(x.size(), enc.output_dim());
      std::size_t col = 0;
      for (const auto& f : enc.features()) {
        double block_sum = 0.0;
        for (std::size_t j = 0; j < f.width(); ++j) {
          const double v = x[col + j];
          ASSERT_GE(v, 0.0);
          ASSERT_LE(v, 1.0);
          if (f.kind == FeatureKind::categorical) {
            ASSERT_TRUE(v == 0.0 || v == 1.0);
            block_sum += v;
          }
        }
        if (f.kind == FeatureKind::categorical) ASSERT_EQ(block_sum, 1.0) << f.name;
        col += f.width();
      }
    }
  }
}

TEST(EncoderProperties, FittedEndpointsMapToZeroAndOne) {
  const auto schema = FeatureSchema::nsl_kdd();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto records = random_records(5000 + seed, 40);
    const auto enc = fit_encoder(records, schema);
    const auto data = encode_dataset(records, enc);
    std::size_t col = 0;
    for (const auto& f : enc.features()) {
      if (f.kind == FeatureKind::numeric) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t i = 0; i < data.rows(); ++i) {
          lo = std::min(lo, data.row(i)[col]);
          hi = std::max(hi, data.row(i)[col]);
        }
        EXPECT_EQ(lo, 0.0) << f.name;
        if (f.max > f.min) EXPECT_EQ(hi, 1.0) << f.name;
        EXPECT_EQ(min_max(f.min, f.min, f.max), 0.0);
        if (f.max > f.min) EXPECT_EQ(min_max(f.max, f.min, f.max), 1.0);
      }
      col += f.width();
    }
  }
}

TEST(EncoderProperties, EncodeIsPure) {
  const auto records = random_records(8, 50);
  const auto enc = fit_encoder(records, FeatureSchema::nsl_kdd());
  for (const auto& r : records) EXPECT_EQ(enc.encode(r), enc.encode(r));
}

TEST(RankFeatures, LabelColumnScoresOneConstantScoresZero) {
  const auto schema = small_schema();
  std::vector<RawRecord> records;
  std::vector<BinaryLabel> labels;
  for (int i = 0; i < 20; ++i) {
    const bool attack = i % 3 == 0;
    records.push_back({{attack ? "1" : "0", "7", i % 2 ? "p" : "q"}, attack ? "neptune" : "normal", {}});
    labels.push_back(attack ? BinaryLabel::attack : BinaryLabel::normal);
  }
  const auto report = rank_features(records, labels, schema);
  ASSERT_EQ(report.ranking.size(), 3u);
  EXPECT_EQ(report.ranking[0].name, "a");
  EXPECT_NEAR(report.ranking[0].score, 1.0, 1e-12);
  EXPECT_EQ(report.ranking.back().name, "b");
  EXPECT_EQ(report.ranking.back().score, 0.0);
}

TEST(RankFeatures, MatchesPearsonOracle) {
  const auto schema = FeatureSchema::nsl_kdd();
  const auto records = random_records(9, 500);
  std::vector<BinaryLabel> labels;
  for (const auto& r : records) labels.push_back(binarize_label(r.label));
  const auto report = rank_features(records, labels, schema);

  std::vector<long double> y;
  for (auto l : labels) y.push_back(l == BinaryLabel::attack ? 1.0L : 0.0L);
  for (const auto& entry : report.ranking) {
    const auto j = schema.require_index(entry.name);
    long double expected = 0;
    if (schema.features()[j].kind == FeatureKind::numeric) {
      std::vector<long double> x;
      for (const auto& r : records) x.push_back(std::stold(r.values[j]));
      expected = pearson_oracle(x, y);
    } else {
      std::set<std::string> values;
      for (const auto& r : records) values.insert(r.values[j]);
      for (const auto& v : values) {
        std::vector<long double> x;
        for (const auto& r : records) x.push_back(r.values[j] == v ? 1.0L : 0.0L);
        expected = std::max(expected, pearson_oracle(x, y));
      }
    }
    EXPECT_NEAR(entry.score, static_cast<double>(expected), 1e-9) << entry.name;
  }
  for (std::size_t i = 1; i < report.ranking.size(); ++i) {
    EXPECT_GE(report.ranking[i - 1].score, report.ranking[i].score);
  }
}

TEST(RankFeatures, InvariantUnderAffineRescaling) {
  const auto schema = small_schema();
  std::mt19937_64 rng(10);
  std::vector<RawRecord> plain, scaled;
  std::vector<BinaryLabel> labels;
  for (int i = 0; i < 200; ++i) {
    const int a = static_cast<int>(rng() % 50);
    const int b = static_cast<int>(rng() % 50);
    const bool attack = (a + static_cast<int>(rng() % 30)) > 40;
    plain.push_back({{std::to_string(a), std::to_string(b), "z"}, "x", {}});
    scaled.push_back({{std::to_string(3 * a + 11), std::to_string(b * 1000), "z"}, "x", {}});
    labels.push_back(attack ? BinaryLabel::attack : BinaryLabel::normal);
  }
  const auto r1 = rank_features(plain, labels, schema);
  const auto r2 = rank_features(scaled, labels, schema);
  for (std::size_t i = 0; i < r1.ranking.size(); ++i) {
    EXPECT_EQ(r1.ranking[i].name, r2.ranking[i].name);
    EXPECT_NEAR(r1.ranking[i].score, r2.ranking[i].score, 1e-12);
  }
}

TEST(RankFeatures, SingleClassIsAnError) {
  const auto records = random_records(11, 10);
  std::vector<BinaryLabel> labels(records.size(), BinaryLabel::normal);
  EXPECT_THROW(rank_features(records, labels, FeatureSchema::nsl_kdd()), DataError);
}

TEST(SelectTopK, Sizes) {
  const auto records = random_records(12, 100);
  std::vector<BinaryLabel> labels;
  for (const auto& r : records) labels.push_back(binarize_label(r.label));
  const auto report = rank_features(records, labels, FeatureSchema::nsl_kdd());
  EXPECT_TRUE(select_top_k(report, 0).empty());
  EXPECT_EQ(select_top_k(report, 12).size(), 12u);
  const auto all = select_top_k(report, report.ranking.size());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], report.ranking[i].name);
  EXPECT_THROW(select_top_k(report, report.ranking.size() + 1), UsageError);
}

TEST(Split, PublishedTrainingFileSize) {
  const auto s = split_indices(125973, 0.85, 42);
  EXPECT_EQ(s.train.size(), 107077u);
  EXPECT_EQ(s.test.size(), 18896u);
  EXPECT_EQ(split_indices(125973, 0.75, 42).train.size(), 94479u);
}

TEST(Split, FloorRule) {
  const auto s = split_indices(4, 0.75, 1);
  EXPECT_EQ(s.train.size(), 3u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, Errors) {
  EXPECT_THROW(split_indices(1, 0.5, 0), DataError);
  EXPECT_THROW(split_indices(10, 0.0, 0), UsageError);
  EXPECT_THROW(split_indices(10, 1.0, 0), UsageError);
}

TEST(Split, DeterministicPerSeed) {
  EXPECT_EQ(split_indices(1000, 0.85, 5).train, split_indices(1000, 0.85, 5).train);
  EXPECT_NE(split_indices(1000, 0.85, 5).train, split_indices(1000, 0.85, 6).train);
}

TEST(SplitProperties, DisjointAndExhaustive) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 3000;
    const double ratio = 0.01 + 0.98 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto s = split_indices(n, ratio, rng());
    ASSERT_EQ(s.train.size(), static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n))));
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(all[i], i);
  }
}

TEST(Split, TakesMatchingRows) {
  const auto records = random_records(14, 40);
  const auto data = encode_dataset(records, fit_encoder(records, FeatureSchema::nsl_kdd()));
  const auto idx = split_indices(data.rows(), 0.75, 3);
  const auto [train, test] = split(data, 0.75, 3);
  ASSERT_EQ(train.rows(), idx.train.size());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    EXPECT_TRUE(std::ranges::equal(train.row(i), data.row(idx.train[i])));
    EXPECT_EQ(train.labels[i], data.labels[idx.train[i]]);
  }
  EXPECT_EQ(test.rows(), idx.test.size());
}
