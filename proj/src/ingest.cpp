#include "nidsdl/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "nidsdl/error.hpp"

namespace nidsdl {

namespace {

using K = FeatureKind;

const std::vector<FeatureDef>& nsl_kdd_features() {
  static const std::vector<FeatureDef> defs = {
      {"duration", K::numeric},
      {"protocol_type", K::categorical},
      {"service", K::categorical},
      {"flag", K::categorical},
      {"src_bytes", K::numeric},
      {"dst_bytes", K::numeric},
      {"land", K::numeric},
      {"wrong_fragment", K::numeric},
      {"urgent", K::numeric},
      {"hot", K::numeric},
      {"num_failed_logins", K::numeric},
      {"logged_in", K::numeric},
      {"num_compromised", K::numeric},
      {"root_shell", K::numeric},
      {"su_attempted", K::numeric},
      {"num_root", K::numeric},
      {"num_file_creations", K::numeric},
      {"num_shells", K::numeric},
      {"num_access_files", K::numeric},
      {"num_outbound_cmds", K::numeric},
      {"is_host_login", K::numeric},
      {"is_guest_login", K::numeric},
      {"count", K::numeric},
      {"srv_count", K::numeric},
      {"serror_rate", K::numeric},
      {"srv_serror_rate", K::numeric},
      {"rerror_rate", K::numeric},
      {"srv_rerror_rate", K::numeric},
      {"same_srv_rate", K::numeric},
      {"diff_srv_rate", K::numeric},
      {"srv_diff_host_rate", K::numeric},
      {"dst_host_count", K::numeric},
      {"dst_host_srv_count", K::numeric},
      {"dst_host_same_srv_rate", K::numeric},
      {"dst_host_diff_srv_rate", K::numeric},
      {"dst_host_same_src_port_rate", K::numeric},
      {"dst_host_srv_diff_host_rate", K::numeric},
      {"dst_host_serror_rate", K::numeric},
      {"dst_host_srv_serror_rate", K::numeric},
      {"dst_host_rerror_rate", K::numeric},
      {"dst_host_srv_rerror_rate", K::numeric},
  };
  return defs;
}

std::string_view trim(std::string_view s) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

const std::vector<std::string>& default_features() {
  static const std::vector<std::string> names = {
      "protocol_type",          "service",
      "flag",                   "count",
      "logged_in",              "serror_rate",
      "srv_serror_rate",        "same_srv_rate",
      "dst_host_srv_count",     "dst_host_same_srv_rate",
      "dst_host_serror_rate",   "dst_host_srv_serror_rate",
  };
  return names;
}

const std::vector<std::string>& nsl_kdd_protocols() {
  static const std::vector<std::string> v = {"icmp", "tcp", "udp"};
  return v;
}

const std::vector<std::string>& nsl_kdd_services() {
  static const std::vector<std::string> v = {
      "ftp_data", "other",     "private",  "http",      "remote_job", "name",     "netbios_ns",
      "eco_i",    "mtp",       "telnet",   "finger",    "domain_u",   "supdup",   "uucp_path",
      "Z39_50",   "smtp",      "csnet_ns", "uucp",      "netbios_dgm", "urp_i",   "auth",
      "domain",   "ftp",       "bgp",      "ldap",      "ecr_i",      "gopher",   "vmnet",
      "systat",   "http_443",  "efs",      "whois",     "imap4",      "iso_tsap", "echo",
      "klogin",   "link",      "sunrpc",   "login",     "kshell",     "sql_net",  "time",
      "hostnames", "exec",     "ntp_u",    "discard",   "nntp",       "courier",  "ctf",
      "ssh",      "daytime",   "shell",    "netstat",   "pop_3",      "nnsp",     "IRC",
      "pop_2",    "printer",   "tim_i",    "pm_dump",   "red_i",      "netbios_ssn", "rje",
      "X11",      "urh_i",     "http_8001", "aol",      "http_2784",  "tftp_u",   "harvest",
  };
  return v;
}

const std::vector<std::string>& nsl_kdd_flags() {
  static const std::vector<std::string> v = {"SF", "S0", "REJ", "RSTR", "SH", "RSTO",
                                             "S1", "RSTOS0", "S3", "S2", "OTH"};
  return v;
}

FeatureSchema FeatureSchema::nsl_kdd() {
  return FeatureSchema(nsl_kdd_features(), default_features());
}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features, std::vector<std::string> selected)
    : features_(std::move(features)), selected_(std::move(selected)) {
  for (const auto& name : selected_) {
    if (!index_of(name)) throw DataError("selected feature '" + name + "' is not in the schema");
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::require_index(std::string_view name) const {
  if (auto idx = index_of(name)) return *idx;
  throw DataError("unknown feature '" + std::string(name) + "'");
}

FeatureSchema FeatureSchema::with_selected(std::vector<std::string> selected) const {
  return FeatureSchema(features_, std::move(selected));
}

BinaryLabel binarize_label(std::string_view label) {
  auto token = trim(label);
  if (token.empty()) throw DataError("empty label token");
  constexpr std::string_view normal = "normal";
  bool is_normal = token.size() == normal.size() &&
                   std::equal(token.begin(), token.end(), normal.begin(), [](char a, char b) {
                     return std::tolower(static_cast<unsigned char>(a)) == b;
                   });
  return is_normal ? BinaryLabel::normal : BinaryLabel::attack;
}

std::optional<double> parse_non_negative(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value) || value < 0.0) return std::nullopt;
  return value;
}

RawRecord parse_record(std::string_view line, const FeatureSchema& schema, std::size_t line_no) {
  auto fields = split_fields(line);
  const std::size_t n = schema.size();
  if (fields.size() != n + 1 && fields.size() != n + 2) {
    throw ParseError(line_no, "expected " + std::to_string(n + 1) + " or " +
                                  std::to_string(n + 2) + " fields, got " +
                                  std::to_string(fields.size()));
  }
  RawRecord rec;
  rec.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& def = schema.features()[i];
    if (def.kind == FeatureKind::numeric) {
      if (!parse_non_negative(fields[i])) {
        throw ParseError(line_no, "feature '" + def.name + "' is not a finite non-negative number: '" +
                                      std::string(fields[i]) + "'");
      }
    } else if (fields[i].empty()) {
      throw ParseError(line_no, "feature '" + def.name + "' is empty");
    }
    rec.values.emplace_back(fields[i]);
  }
  rec.label = std::string(fields[n]);
  if (trim(rec.label).empty()) throw ParseError(line_no, "empty label");
  if (fields.size() == n + 2) {
    int difficulty = 0;
    auto text = fields[n + 1];
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), difficulty);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError(line_no, "difficulty is not an integer: '" + std::string(text) + "'");
    }
    rec.difficulty = difficulty;
  }
  return rec;
}

std::vector<RawRecord> parse_dataset(std::istream& source, const FeatureSchema& schema) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    std::string_view view = line;
    while (!view.empty() && (view.back() == '\r' || view.back() == '\n')) view.remove_suffix(1);
    if (trim(view).empty()) continue;
    records.push_back(parse_record(view, schema, line_no));
  }
  return records;
}

std::vector<RawRecord> load_dataset(const std::string& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  try {
    return parse_dataset(in, schema);
  } catch (const ParseError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string serialize_record(const RawRecord& record) {
  std::string out;
  for (const auto& v : record.values) {
    out += v;
    out += ',';
  }
  out += record.label;
  if (record.difficulty) {
    out += ',';
    out += std::to_string(*record.difficulty);
  }
  return out;
}

void write_dataset(std::ostream& out, const std::vector<RawRecord>& records) {
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

}  // namespace nidsdl
