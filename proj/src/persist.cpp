#include "nidsdl/persist.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "nidsdl/error.hpp"

namespace nidsdl {

using json = nlohmann::json;

namespace {

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string save_model(const Model& model, std::string_view encoder_digest) {
  const auto& spec = model.spec();
  const auto& net = model.network();
  const auto params = net.parameters();
  const auto names = net.parameter_names();

  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({{"name", names[i]}, {"shape", params[i]->shape()}, {"bytes", params[i]->size() * 4}});
  }
  json history = json::array();
  for (const auto& h : model.history) {
    history.push_back({h.epoch, nullable(h.train_loss), nullable(h.val_loss), nullable(h.val_accuracy)});
  }
  const auto& cfg = model.config;
  json header = {
      {"format_version", kModelFormatVersion},
      {"arch", arch_name(spec.arch)},
      {"input_dim", spec.input_dim},
      {"threshold", cfg.threshold},
      {"encoder_digest", encoder_digest},
      {"layer_plan", spec.layer_plan},
      {"tensors", tensors},
      {"training",
       {{"epochs", cfg.epochs},
        {"lr", cfg.lr},
        {"batch_size", cfg.batch_size},
        {"validation_fraction", cfg.validation_fraction},
        {"seed", cfg.seed}}},
      {"history", history},
  };
  const std::string header_text = header.dump();

  std::string out(kModelMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (double v : params[i]->data()) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(v) || !std::isfinite(f)) {
        throw DataError("parameter tensor '" + names[i] + "' holds a non-finite value");
      }
      detail::put_f32(out, f);
    }
  }
  return out;
}

ModelArtifact load_model(std::string_view bytes) {
  detail::Reader r(bytes);
  if (bytes.size() < kModelMagic.size() || r.take(kModelMagic.size(), "magic") != kModelMagic) {
    throw DataError("not a model artifact");
  }
  const auto header_len = r.u32("header length");
  const auto header_text = r.take(header_len, "header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model header is not valid JSON: ") + e.what());
  }

  try {
    const auto version = header.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version) +
                      " (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    }
    const Arch arch = parse_arch(header.at("arch").get<std::string>());
    const auto input_dim = header.at("input_dim").get<std::size_t>();
    Model model = build(arch, input_dim, 0);

    if (header.at("layer_plan").get<std::vector<std::string>>() != model.spec().layer_plan) {
      throw DataError("model header layer plan does not match the " + std::string(arch_name(arch)) +
                      " architecture");
    }
    const auto& tensors = header.at("tensors");
    auto params = model.network().parameters();
    const auto names = model.network().parameter_names();
    if (tensors.size() != params.size()) throw DataError("model header declares the wrong tensor count");
    std::size_t payload = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      if (t.at("name").get<std::string>() != names[i] ||
          t.at("shape").get<nn::Shape>() != params[i]->shape() ||
          t.at("bytes").get<std::size_t>() != params[i]->size() * 4) {
        throw DataError("model header and payload disagree on tensor '" + names[i] + "'");
      }
      payload += params[i]->size() * 4;
    }
    if (r.remaining() > payload) throw DataError("model artifact has trailing bytes after the payload");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string section = "payload for tensor " + names[i];
      if (r.remaining() < params[i]->size() * 4) throw DataError("truncated input: missing " + section);
      for (auto& v : params[i]->data()) v = static_cast<double>(r.f32(section.c_str()));
    }

    const auto& training = header.at("training");
    model.config.epochs = training.at("epochs").get<std::size_t>();
    model.config.lr = training.at("lr").get<double>();
    model.config.batch_size = training.at("batch_size").get<std::size_t>();
    model.config.validation_fraction = training.at("validation_fraction").get<double>();
    model.config.seed = training.at("seed").get<std::uint64_t>();
    model.config.threshold = header.at("threshold").get<double>();
    for (const auto& h : header.at("history")) {
      model.history.push_back({h.at(0).get<std::size_t>(), from_nullable(h.at(1)), from_nullable(h.at(2)),
                               from_nullable(h.at(3))});
    }
    return ModelArtifact{std::move(model), header.at("encoder_digest").get<std::string>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model header: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed model header: ") + e.what());
  }
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace nidsdl
