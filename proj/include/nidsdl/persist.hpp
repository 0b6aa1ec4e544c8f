#pragma once

#include <string>
#include <string_view>

#include "nidsdl/models.hpp"

namespace nidsdl {

// Artifact layout:
//   8 bytes   magic "NIDSDL1\n"
//   u32 LE    header length
//   header    compact JSON: format_version, arch, input_dim, threshold,
//             encoder_digest, layer_plan, tensors [{name, shape, bytes}],
//             training config summary, history
//   payload   every parameter tensor as little-endian float32, in tensors order
inline constexpr std::string_view kModelMagic{"NIDSDL1\n", 8};
inline constexpr int kModelFormatVersion = 1;

inline constexpr std::string_view kModelExtension = ".nidsmodel";
inline constexpr std::string_view kEncoderExtension = ".nidsenc";

struct ModelArtifact {
  Model model;
  std::string encoder_digest;
};

// Deterministic: the same model and digest always produce the same bytes.
std::string save_model(const Model& model, std::string_view encoder_digest);

ModelArtifact load_model(std::string_view bytes);

void write_file(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace nidsdl
