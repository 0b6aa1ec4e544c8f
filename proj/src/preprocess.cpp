#include "nidsdl/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"
#include "nidsdl/digest.hpp"
#include "nidsdl/error.hpp"
#include "nidsdl/random.hpp"

namespace nidsdl {

using json = nlohmann::json;

double min_max(double x, double min, double max) {
  if (min > max) throw std::invalid_argument("min_max: min > max");
  if (max == min) return 0.0;
  return std::clamp((x - min) / (max - min), 0.0, 1.0);
}

Encoder::Encoder(std::vector<EncodedFeature> features) : features_(std::move(features)) {
  for (const auto& f : features_) {
    if (f.kind == FeatureKind::categorical) {
      if (f.vocab.empty()) throw DataError("feature '" + f.name + "' has an empty vocabulary");
      if (!std::is_sorted(f.vocab.begin(), f.vocab.end()) ||
          std::adjacent_find(f.vocab.begin(), f.vocab.end()) != f.vocab.end()) {
        throw DataError("vocabulary of '" + f.name + "' must be sorted and unique");
      }
    } else if (!(f.min <= f.max)) {
      throw DataError("feature '" + f.name + "' has min > max");
    }
    output_dim_ += f.width();
  }
}

std::vector<ColumnInfo> Encoder::layout() const {
  std::vector<ColumnInfo> cols;
  cols.reserve(output_dim_);
  for (const auto& f : features_) {
    if (f.kind == FeatureKind::categorical) {
      for (const auto& v : f.vocab) cols.push_back({f.name, v});
    } else {
      cols.push_back({f.name, "numeric"});
    }
  }
  return cols;
}

namespace {

std::size_t category_index(const EncodedFeature& f, std::string_view value) {
  auto it = std::lower_bound(f.vocab.begin(), f.vocab.end(), value);
  if (it == f.vocab.end() || *it != value) throw UnseenCategory(f.name, std::string(value));
  return static_cast<std::size_t>(it - f.vocab.begin());
}

}  // namespace

void Encoder::encode_values(std::span<const FeatureValue> values, std::span<double> out) const {
  if (values.size() != features_.size()) {
    throw DataError("expected " + std::to_string(features_.size()) + " feature values, got " +
                    std::to_string(values.size()));
  }
  if (out.size() != output_dim_) throw DataError("output buffer does not match encoder width");
  std::size_t col = 0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.kind == FeatureKind::categorical) {
      const auto* s = std::get_if<std::string>(&values[i]);
      if (!s) throw DataError("feature '" + f.name + "' expects a category string");
      auto hot = category_index(f, *s);
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(col), f.vocab.size(), 0.0);
      out[col + hot] = 1.0;
      col += f.vocab.size();
    } else {
      double x = 0.0;
      if (const auto* d = std::get_if<double>(&values[i])) {
        if (!std::isfinite(*d)) throw DataError("feature '" + f.name + "' is not finite");
        x = *d;
      } else {
        auto parsed = parse_non_negative(std::get<std::string>(values[i]));
        if (!parsed) {
          throw DataError("feature '" + f.name + "' is not a finite non-negative number");
        }
        x = *parsed;
      }
      out[col++] = min_max(x, f.min, f.max);
    }
  }
}

std::vector<double> Encoder::encode_values(std::span<const FeatureValue> values) const {
  std::vector<double> out(output_dim_);
  encode_values(values, out);
  return out;
}

void Encoder::encode_into(const RawRecord& record, std::span<double> out) const {
  std::vector<FeatureValue> values;
  values.reserve(features_.size());
  for (const auto& f : features_) {
    if (f.schema_index >= record.values.size()) {
      throw DataError("record has no value for feature '" + f.name + "'");
    }
    const auto& raw = record.values[f.schema_index];
    if (f.kind == FeatureKind::categorical) {
      values.emplace_back(raw);
    } else {
      auto parsed = parse_non_negative(raw);
      if (!parsed) throw DataError("feature '" + f.name + "' is not a finite non-negative number");
      values.emplace_back(*parsed);
    }
  }
  encode_values(values, out);
}

std::vector<double> Encoder::encode(const RawRecord& record) const {
  std::vector<double> out(output_dim_);
  encode_into(record, out);
  return out;
}

namespace {

json encoder_document(const std::vector<EncodedFeature>& features, std::size_t output_dim) {
  json doc;
  doc["format"] = "nidsdl-encoder";
  doc["version"] = Encoder::format_version;
  doc["output_dim"] = output_dim;
  json list = json::array();
  for (const auto& f : features) {
    json entry;
    entry["name"] = f.name;
    if (f.kind == FeatureKind::categorical) {
      entry["kind"] = "categorical";
      entry["vocab"] = f.vocab;
    } else {
      entry["kind"] = "numeric";
      entry["min"] = f.min;
      entry["max"] = f.max;
    }
    list.push_back(std::move(entry));
  }
  doc["features"] = std::move(list);
  return doc;
}

}  // namespace

std::string Encoder::to_json() const {
  return encoder_document(features_, output_dim_).dump(2) + "\n";
}

std::string Encoder::digest() const {
  return hex_digest(encoder_document(features_, output_dim_).dump());
}

Encoder Encoder::from_json(std::string_view text, const FeatureSchema& schema) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("encoder JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "nidsdl-encoder") {
      throw DataError("not an encoder document");
    }
    auto version = doc.at("version").get<int>();
    if (version != format_version) {
      throw DataError("unsupported encoder version " + std::to_string(version));
    }
    std::vector<EncodedFeature> features;
    for (const auto& entry : doc.at("features")) {
      EncodedFeature f;
      f.name = entry.at("name").get<std::string>();
      f.schema_index = schema.require_index(f.name);
      auto kind = entry.at("kind").get<std::string>();
      if (kind == "categorical") {
        f.kind = FeatureKind::categorical;
        f.vocab = entry.at("vocab").get<std::vector<std::string>>();
      } else if (kind == "numeric") {
        f.kind = FeatureKind::numeric;
        f.min = entry.at("min").get<double>();
        f.max = entry.at("max").get<double>();
      } else {
        throw DataError("unknown feature kind '" + kind + "'");
      }
      if (f.kind != schema.features()[f.schema_index].kind) {
        throw DataError("feature '" + f.name + "' kind disagrees with the schema");
      }
      features.push_back(std::move(f));
    }
    Encoder enc(std::move(features));
    if (doc.at("output_dim").get<std::size_t>() != enc.output_dim()) {
      throw DataError("encoder output_dim does not match its features");
    }
    return enc;
  } catch (const json::exception& e) {
    throw DataError(std::string("encoder JSON: ") + e.what());
  }
}

Encoder fit_encoder(const std::vector<RawRecord>& records, const FeatureSchema& schema) {
  if (records.empty()) throw DataError("cannot fit an encoder on zero records");
  std::vector<EncodedFeature> features;
  for (const auto& name : schema.selected()) {
    EncodedFeature f;
    f.name = name;
    f.schema_index = schema.require_index(name);
    f.kind = schema.features()[f.schema_index].kind;
    if (f.kind == FeatureKind::categorical) {
      std::set<std::string> seen;
      for (const auto& r : records) seen.insert(r.values.at(f.schema_index));
      f.vocab.assign(seen.begin(), seen.end());
    } else {
      f.min = std::numeric_limits<double>::infinity();
      f.max = -std::numeric_limits<double>::infinity();
      for (const auto& r : records) {
        auto v = parse_non_negative(r.values.at(f.schema_index));
        if (!v) throw DataError("feature '" + name + "' is not a finite non-negative number");
        f.min = std::min(f.min, *v);
        f.max = std::max(f.max, *v);
      }
    }
    features.push_back(std::move(f));
  }
  return Encoder(std::move(features));
}

std::size_t EncodedDataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

EncodedDataset encode_dataset(const std::vector<RawRecord>& records, const Encoder& encoder) {
  EncodedDataset data;
  data.cols = encoder.output_dim();
  data.matrix.resize(records.size() * data.cols);
  data.labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    encoder.encode_into(records[i], {data.matrix.data() + i * data.cols, data.cols});
    data.labels.push_back(static_cast<std::uint8_t>(binarize_label(records[i].label)));
  }
  return data;
}

namespace {
constexpr std::string_view kDataMagic = "NIDSDAT1";
}

void write_encoded(std::ostream& out, const EncodedDataset& data) {
  std::string buf(kDataMagic);
  detail::put_u64(buf, data.rows());
  detail::put_u64(buf, data.cols);
  for (auto l : data.labels) buf.push_back(static_cast<char>(l));
  buf.reserve(buf.size() + data.matrix.size() * 8);
  for (double v : data.matrix) detail::put_f64(buf, v);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

EncodedDataset read_encoded(std::istream& in) {
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  detail::Reader r(bytes);
  if (r.take(kDataMagic.size(), "magic") != kDataMagic) {
    throw DataError("not an encoded dataset file");
  }
  auto rows = r.u64("row count");
  auto cols = r.u64("column count");
  EncodedDataset data;
  data.cols = cols;
  auto labels = r.take(rows, "labels");
  data.labels.assign(labels.begin(), labels.end());
  if (r.remaining() != rows * cols * 8) throw DataError("encoded dataset payload size mismatch");
  data.matrix.resize(rows * cols);
  for (auto& v : data.matrix) v = r.f64("matrix");
  return data;
}

namespace {

double pearson_abs(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
}

// Indicator column against a binary target, from counts.
double indicator_pearson_abs(double n, double n_cat, double pos_cat, double pos) {
  const double var = n_cat * (n - n_cat) * pos * (n - pos);
  if (var == 0.0) return 0.0;
  return std::min(1.0, std::abs(n * pos_cat - n_cat * pos) / std::sqrt(var));
}

}  // namespace

SelectionReport rank_features(const std::vector<RawRecord>& records,
                              const std::vector<BinaryLabel>& labels,
                              const FeatureSchema& schema) {
  if (records.size() != labels.size()) throw DataError("records and labels differ in length");
  if (records.size() < 2) throw DataError("feature ranking needs at least two records");
  std::vector<double> y(labels.size());
  std::transform(labels.begin(), labels.end(), y.begin(), label_value);
  const double pos = std::accumulate(y.begin(), y.end(), 0.0);
  const double n = static_cast<double>(y.size());
  if (pos == 0.0 || pos == n) throw DataError("feature ranking needs both classes present");

  SelectionReport report;
  std::vector<double> x(records.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& def = schema.features()[j];
    double score = 0.0;
    if (def.kind == FeatureKind::categorical) {
      std::map<std::string, std::pair<double, double>> counts;  // (rows, positives)
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto& c = counts[records[i].values.at(j)];
        c.first += 1.0;
        c.second += y[i];
      }
      for (const auto& [value, c] : counts) {
        score = std::max(score, indicator_pearson_abs(n, c.first, c.second, pos));
      }
    } else {
      for (std::size_t i = 0; i < records.size(); ++i) {
        auto v = parse_non_negative(records[i].values.at(j));
        if (!v) throw DataError("feature '" + def.name + "' is not a finite non-negative number");
        x[i] = *v;
      }
      score = pearson_abs(x, y);
    }
    report.ranking.push_back({def.name, score});
  }
  std::sort(report.ranking.begin(), report.ranking.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  return report;
}

std::vector<std::string> select_top_k(const SelectionReport& report, std::size_t k) {
  if (k > report.ranking.size()) {
    throw UsageError("k = " + std::to_string(k) + " exceeds the " +
                     std::to_string(report.ranking.size()) + " ranked features");
  }
  std::vector<std::string> names;
  names.reserve(k);
  for (std::size_t i = 0; i < k; ++i) names.push_back(report.ranking[i].name);
  return names;
}

SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw UsageError("split ratio must lie in (0, 1)");
  if (n < 2) throw DataError("cannot split fewer than two rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return out;
}

EncodedDataset take_rows(const EncodedDataset& data, std::span<const std::size_t> rows) {
  EncodedDataset out;
  out.cols = data.cols;
  out.matrix.reserve(rows.size() * data.cols);
  out.labels.reserve(rows.size());
  for (auto r : rows) {
    auto src = data.row(r);
    out.matrix.insert(out.matrix.end(), src.begin(), src.end());
    out.labels.push_back(data.labels[r]);
  }
  return out;
}

std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& data, double ratio,
                                                std::uint64_t seed) {
  auto idx = split_indices(data.rows(), ratio, seed);
  return {take_rows(data, idx.train), take_rows(data, idx.test)};
}

}  // namespace nidsdl
