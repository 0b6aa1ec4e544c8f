#pragma once

#include <cstdint>
#include <vector>

#include "nidsdl/ingest.hpp"

namespace nidsdl {

// Generator for NSL-KDD-formatted records. The values are synthetic: traffic
// profiles (normal, SYN flood, smurf, probes, remote-access attacks) loosely
// modelled on the dataset's published feature semantics. Used for tests and
// for exercising the pipeline when the real training file is not available.
struct SyntheticOptions {
  std::size_t rows = 5000;
  std::uint64_t seed = 7;
  double attack_fraction = 0.47;
  // Fraction of rows whose features are drawn from the opposite class profile.
  double overlap = 0.02;
};

std::vector<RawRecord> synthetic_records(const SyntheticOptions& options,
                                         const FeatureSchema& schema = FeatureSchema::nsl_kdd());

}  // namespace nidsdl
