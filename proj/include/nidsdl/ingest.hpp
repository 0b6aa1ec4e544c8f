#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nidsdl {

enum class FeatureKind { numeric, categorical };

struct FeatureDef {
  std::string name;
  FeatureKind kind;
};

// Column layout of an NSL-KDD record plus the subset fed to the encoder.
class FeatureSchema {
 public:
  // The 41 NSL-KDD connection features with the default 12-feature subset.
  static FeatureSchema nsl_kdd();

  // Throws DataError if `selected` names a feature that does not exist.
  FeatureSchema(std::vector<FeatureDef> features, std::vector<std::string> selected);

  const std::vector<FeatureDef>& features() const noexcept { return features_; }
  const std::vector<std::string>& selected() const noexcept { return selected_; }
  std::size_t size() const noexcept { return features_.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require_index(std::string_view name) const;

  FeatureSchema with_selected(std::vector<std::string> selected) const;

 private:
  std::vector<FeatureDef> features_;
  std::vector<std::string> selected_;
};

// The 12-feature subset the detector uses by default, in its canonical order.
const std::vector<std::string>& default_features();

// Vocabularies that occur in the published NSL-KDD training file.
const std::vector<std::string>& nsl_kdd_protocols();
const std::vector<std::string>& nsl_kdd_services();
const std::vector<std::string>& nsl_kdd_flags();

enum class BinaryLabel : std::uint8_t { normal = 0, attack = 1 };

struct RawRecord {
  std::vector<std::string> values;  // schema order
  std::string label;
  std::optional<int> difficulty;

  bool operator==(const RawRecord&) const = default;
};

// "normal" (trimmed, case-insensitive) maps to normal, any other token to attack.
BinaryLabel binarize_label(std::string_view label);

inline double label_value(BinaryLabel label) {
  return label == BinaryLabel::attack ? 1.0 : 0.0;
}

// Parses one comma-separated line; `line_no` is used in error messages.
RawRecord parse_record(std::string_view line, const FeatureSchema& schema, std::size_t line_no);

// One record per non-empty line. Lines must carry 42 or 43 fields.
std::vector<RawRecord> parse_dataset(std::istream& source, const FeatureSchema& schema);
std::vector<RawRecord> load_dataset(const std::string& path, const FeatureSchema& schema);

std::string serialize_record(const RawRecord& record);
void write_dataset(std::ostream& out, const std::vector<RawRecord>& records);

// Strict parse of a finite, non-negative real.
std::optional<double> parse_non_negative(std::string_view text);

}  // namespace nidsdl
