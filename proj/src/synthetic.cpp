#include "nidsdl/synthetic.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <string>

#include "nidsdl/error.hpp"
#include "nidsdl/random.hpp"

namespace nidsdl {

namespace {

enum class Profile { normal, neptune, smurf, probe, remote };

struct Draw {
  Rng& rng;

  long integer(long lo, long hi) { return lo + static_cast<long>(rng.index(static_cast<std::uint64_t>(hi - lo + 1))); }
  double rate(double lo, double hi) { return std::clamp(rng.uniform(lo, hi), 0.0, 1.0); }
  const std::string& pick(const std::vector<std::string>& v) { return v[rng.index(v.size())]; }
};

std::string fmt_rate(double r) { return fmt::format("{:.2f}", r); }

Profile pick_profile(Rng& rng, bool attack) {
  if (!attack) return Profile::normal;
  const double u = rng.uniform();
  if (u < 0.58) return Profile::neptune;
  if (u < 0.70) return Profile::smurf;
  if (u < 0.94) return Profile::probe;
  return Profile::remote;
}

std::map<std::string, std::string> profile_values(Profile p, Draw& d) {
  static const std::vector<std::string> normal_services = {"http", "http", "http", "smtp", "ftp_data",
                                                           "domain_u", "private", "other", "ftp", "telnet",
                                                           "ecr_i", "urp_i", "ntp_u", "pop_3"};
  static const std::vector<std::string> remote_services = {"ftp", "ftp_data", "telnet", "imap4", "http"};
  static const std::vector<std::string> probe_flags = {"REJ", "SF", "S0", "RSTO", "RSTR", "SH", "OTH"};
  static const std::vector<std::string> normal_flags = {"REJ", "S0", "RSTO", "S1", "S2", "S3"};

  std::map<std::string, std::string> v;
  double serror = 0.0, srv_serror = 0.0, same_srv = 1.0, dh_same = 1.0, dh_serror = 0.0, dh_srv_serror = 0.0;
  long count = 1, dh_srv_count = 1, dh_count = 1;
  std::string protocol = "tcp", service = "http", flag = "SF";
  int logged_in = 0;

  switch (p) {
    case Profile::normal: {
      const double u = d.rng.uniform();
      protocol = u < 0.82 ? "tcp" : (u < 0.96 ? "udp" : "icmp");
      service = d.pick(normal_services);
      flag = d.rng.bernoulli(0.94) ? "SF" : d.pick(normal_flags);
      logged_in = protocol == "tcp" && d.rng.bernoulli(0.85) ? 1 : 0;
      count = d.integer(1, 25);
      serror = d.rng.bernoulli(0.95) ? 0.0 : d.rate(0.0, 0.3);
      srv_serror = d.rng.bernoulli(0.95) ? 0.0 : d.rate(0.0, 0.3);
      same_srv = d.rate(0.85, 1.05);
      dh_count = d.integer(20, 255);
      dh_srv_count = d.integer(60, 255);
      dh_same = d.rate(0.6, 1.05);
      dh_serror = d.rng.bernoulli(0.93) ? 0.0 : d.rate(0.0, 0.2);
      dh_srv_serror = d.rng.bernoulli(0.93) ? 0.0 : d.rate(0.0, 0.2);
      break;
    }
    case Profile::neptune:
      service = d.rng.bernoulli(0.6) ? "private" : d.pick(nsl_kdd_services());
      flag = d.rng.bernoulli(0.9) ? "S0" : "REJ";
      count = d.integer(90, 511);
      serror = d.rate(0.85, 1.1);
      srv_serror = d.rate(0.85, 1.1);
      same_srv = d.rate(-0.05, 0.15);
      dh_count = 255;
      dh_srv_count = d.integer(1, 30);
      dh_same = d.rate(-0.05, 0.12);
      dh_serror = d.rate(0.85, 1.1);
      dh_srv_serror = d.rate(0.85, 1.1);
      break;
    case Profile::smurf:
      protocol = "icmp";
      service = "ecr_i";
      count = d.integer(300, 511);
      same_srv = 1.0;
      dh_count = 255;
      dh_srv_count = 255;
      dh_same = 1.0;
      break;
    case Profile::probe:
      protocol = d.rng.bernoulli(0.7) ? "tcp" : "icmp";
      service = protocol == "icmp" ? (d.rng.bernoulli(0.5) ? "eco_i" : "ecr_i") : d.pick(nsl_kdd_services());
      flag = protocol == "icmp" ? "SF" : d.pick(probe_flags);
      count = d.integer(1, 200);
      serror = d.rate(0.0, 0.6);
      srv_serror = d.rate(0.0, 0.6);
      same_srv = d.rate(0.0, 0.5);
      dh_count = d.integer(1, 255);
      dh_srv_count = d.integer(1, 40);
      dh_same = d.rate(0.0, 0.4);
      dh_serror = d.rate(0.0, 0.5);
      dh_srv_serror = d.rate(0.0, 0.5);
      break;
    case Profile::remote:
      service = d.pick(remote_services);
      flag = d.rng.bernoulli(0.8) ? "SF" : "RSTO";
      logged_in = d.rng.bernoulli(0.5) ? 1 : 0;
      count = d.integer(1, 5);
      same_srv = 1.0;
      dh_count = d.integer(1, 255);
      dh_srv_count = d.integer(1, 35);
      dh_same = d.rate(0.0, 0.6);
      break;
  }

  v["protocol_type"] = protocol;
  v["service"] = service;
  v["flag"] = flag;
  v["logged_in"] = std::to_string(logged_in);
  v["count"] = std::to_string(count);
  v["srv_count"] = std::to_string(std::min<long>(count, d.integer(1, 511)));
  v["serror_rate"] = fmt_rate(serror);
  v["srv_serror_rate"] = fmt_rate(srv_serror);
  v["same_srv_rate"] = fmt_rate(same_srv);
  v["diff_srv_rate"] = fmt_rate(std::clamp(1.0 - same_srv - d.rate(0.0, 0.1), 0.0, 1.0));
  v["dst_host_count"] = std::to_string(dh_count);
  v["dst_host_srv_count"] = std::to_string(dh_srv_count);
  v["dst_host_same_srv_rate"] = fmt_rate(dh_same);
  v["dst_host_diff_srv_rate"] = fmt_rate(std::clamp(1.0 - dh_same, 0.0, 1.0) * d.rate(0.0, 1.0));
  v["dst_host_serror_rate"] = fmt_rate(dh_serror);
  v["dst_host_srv_serror_rate"] = fmt_rate(dh_srv_serror);
  v["duration"] = std::to_string(d.rng.bernoulli(0.92) ? 0 : d.integer(1, 58329));
  v["src_bytes"] = std::to_string(p == Profile::neptune ? 0 : d.integer(0, 6000));
  v["dst_bytes"] = std::to_string(logged_in ? d.integer(0, 20000) : 0);
  v["hot"] = std::to_string(p == Profile::remote ? d.integer(0, 30) : (d.rng.bernoulli(0.97) ? 0 : d.integer(1, 5)));
  v["num_failed_logins"] = std::to_string(p == Profile::remote && d.rng.bernoulli(0.3) ? 1 : 0);
  v["is_guest_login"] = std::to_string(p == Profile::remote && d.rng.bernoulli(0.4) ? 1 : 0);
  v["rerror_rate"] = fmt_rate(flag == "REJ" ? d.rate(0.5, 1.1) : 0.0);
  v["srv_rerror_rate"] = fmt_rate(flag == "REJ" ? d.rate(0.5, 1.1) : 0.0);
  v["dst_host_rerror_rate"] = fmt_rate(flag == "REJ" ? d.rate(0.3, 1.1) : 0.0);
  v["dst_host_srv_rerror_rate"] = fmt_rate(flag == "REJ" ? d.rate(0.3, 1.1) : 0.0);
  v["dst_host_same_src_port_rate"] = fmt_rate(d.rate(0.0, 1.0));
  v["dst_host_srv_diff_host_rate"] = fmt_rate(d.rng.bernoulli(0.8) ? 0.0 : d.rate(0.0, 0.5));
  v["srv_diff_host_rate"] = fmt_rate(d.rng.bernoulli(0.8) ? 0.0 : d.rate(0.0, 0.5));
  return v;
}

std::string attack_name(Profile p, Rng& rng) {
  switch (p) {
    case Profile::normal:
      return "normal";
    case Profile::neptune:
      return "neptune";
    case Profile::smurf:
      return "smurf";
    case Profile::probe: {
      static const std::vector<std::string> names = {"satan", "ipsweep", "portsweep", "nmap"};
      return names[rng.index(names.size())];
    }
    case Profile::remote: {
      static const std::vector<std::string> names = {"warezclient", "guess_passwd", "back", "buffer_overflow"};
      return names[rng.index(names.size())];
    }
  }
  return "normal";
}

}  // namespace

std::vector<RawRecord> synthetic_records(const SyntheticOptions& options, const FeatureSchema& schema) {
  if (!(options.attack_fraction > 0.0 && options.attack_fraction < 1.0)) {
    throw UsageError("attack fraction must lie in (0, 1)");
  }
  if (!(options.overlap >= 0.0 && options.overlap < 0.5)) throw UsageError("overlap must lie in [0, 0.5)");
  Rng rng(options.seed);
  Draw d{rng};
  std::vector<RawRecord> out;
  out.reserve(options.rows);
  for (std::size_t i = 0; i < options.rows; ++i) {
    const bool attack = rng.bernoulli(options.attack_fraction);
    const Profile label_profile = pick_profile(rng, attack);
    // Overlap rows look like the other class but keep their label.
    const Profile feature_profile =
        rng.bernoulli(options.overlap) ? pick_profile(rng, !attack) : label_profile;
    auto values = profile_values(feature_profile, d);

    RawRecord r;
    r.values.reserve(schema.size());
    for (const auto& f : schema.features()) {
      auto it = values.find(f.name);
      r.values.push_back(it != values.end() ? it->second : "0");
    }
    r.label = attack_name(label_profile, rng);
    r.difficulty = static_cast<int>(d.integer(1, 21));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace nidsdl
