#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nidsdl/ingest.hpp"

namespace nidsdl {

// (x - min) / (max - min), clamped to [0, 1]; 0 when max == min.
// Throws std::invalid_argument when min > max.
double min_max(double x, double min, double max);

struct EncodedFeature {
  std::string name;
  FeatureKind kind;
  std::size_t schema_index;
  std::vector<std::string> vocab;  // categorical only, sorted, unique
  double min = 0.0;                // numeric only
  double max = 0.0;

  std::size_t width() const { return kind == FeatureKind::categorical ? vocab.size() : 1; }
};

struct ColumnInfo {
  std::string feature;
  std::string category;  // "numeric" for scaled numeric columns
};

using FeatureValue = std::variant<std::string, double>;

// Fitted one-hot vocabularies and min/max ranges for the selected features.
// Immutable once fitted; encode is pure.
class Encoder {
 public:
  static constexpr int format_version = 1;

  explicit Encoder(std::vector<EncodedFeature> features);

  const std::vector<EncodedFeature>& features() const noexcept { return features_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  std::vector<ColumnInfo> layout() const;

  // Values ordered as `features()`; strings are parsed for numeric features.
  void encode_values(std::span<const FeatureValue> values, std::span<double> out) const;
  std::vector<double> encode_values(std::span<const FeatureValue> values) const;

  void encode_into(const RawRecord& record, std::span<double> out) const;
  std::vector<double> encode(const RawRecord& record) const;

  std::string to_json() const;
  static Encoder from_json(std::string_view text, const FeatureSchema& schema = FeatureSchema::nsl_kdd());

  // Digest of the canonical JSON form; links models to the encoder they were trained with.
  std::string digest() const;

 private:
  std::vector<EncodedFeature> features_;
  std::size_t output_dim_ = 0;
};

Encoder fit_encoder(const std::vector<RawRecord>& records, const FeatureSchema& schema);

struct EncodedDataset {
  std::size_t cols = 0;
  std::vector<double> matrix;  // row-major, rows() x cols
  std::vector<std::uint8_t> labels;

  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {matrix.data() + i * cols, cols};
  }
  std::size_t positives() const;
};

EncodedDataset encode_dataset(const std::vector<RawRecord>& records, const Encoder& encoder);

void write_encoded(std::ostream& out, const EncodedDataset& data);
EncodedDataset read_encoded(std::istream& in);

struct FeatureScore {
  std::string name;
  double score;
};

struct SelectionReport {
  std::vector<FeatureScore> ranking;  // score descending, name ascending on ties
};

// |Pearson| of each feature's encoded columns against the attack indicator;
// a categorical feature scores the max over its one-hot columns.
SelectionReport rank_features(const std::vector<RawRecord>& records,
                              const std::vector<BinaryLabel>& labels,
                              const FeatureSchema& schema);

std::vector<std::string> select_top_k(const SelectionReport& report, std::size_t k);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded uniform permutation; the first floor(ratio * n) indices train.
SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed);

EncodedDataset take_rows(const EncodedDataset& data, std::span<const std::size_t> rows);

std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& data, double ratio,
                                                std::uint64_t seed);

}  // namespace nidsdl
