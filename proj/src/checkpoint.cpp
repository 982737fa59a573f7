// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "vagg/errors.hpp"
#include "vagg/io.hpp"

namespace vagg {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "vagg-checkpoint";

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

json encoder_to_json(const EncoderConfig& c) {
  return {{"dim", c.dim}, {"heads", c.heads}, {"layers", c.layers},
          {"head_dim", c.head_dim()}, {"mlp_hidden", c.mlp_hidden}, {"ln_eps", c.ln_eps}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  c.ln_eps = j.at("ln_eps").get<double>();
  c.validate();
  if (j.contains("head_dim") && j.at("head_dim").get<std::size_t>() != c.head_dim()) {
    throw ValidationError("checkpoint: head_dim disagrees with dim/heads");
  }
  return c;
}

json train_to_json(const TrainConfig& t) {
  return {{"margin", t.margin},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"impostors_per_genuine", t.impostors_per_genuine},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"seed", t.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.margin = j.at("margin").get<double>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.epochs = j.at("epochs").get<std::size_t>();
  t.impostors_per_genuine = j.at("impostors_per_genuine").get<std::size_t>();
  t.adam_beta1 = j.at("adam_beta1").get<double>();
  t.adam_beta2 = j.at("adam_beta2").get<double>();
  t.adam_eps = j.at("adam_eps").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

}  // namespace

std::vector<unsigned char> encode_params(const EncoderParams& params) {
  std::vector<unsigned char> blob;
  blob.reserve(parameter_count(params) * 8);
  for_each_tensor(params, [&](const std::string&, std::span<const double> v, TensorKind) {
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
    }
  });
  return blob;
}

EncoderParams decode_params(const std::vector<unsigned char>& blob, const EncoderConfig& cfg) {
  EncoderParams params = EncoderParams::zeros(cfg);
  const std::size_t expected = parameter_count(params) * 8;
  if (blob.size() != expected) {
    throw ValidationError("checkpoint blob has " + std::to_string(blob.size()) +
                          " bytes, config implies " + std::to_string(expected));
  }
  std::size_t pos = 0;
  for_each_tensor(params, [&](const std::string&, std::span<double> v, TensorKind) {
    for (double& x : v) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(blob[pos++]) << (8 * b);
      std::memcpy(&x, &bits, sizeof x);
    }
  });
  return params;
}

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  auto p = manifest;
  return p.replace_extension(".bin");
}

void save_checkpoint(const std::filesystem::path& manifest, const Checkpoint& ckpt) {
  check_params(ckpt.params, ckpt.encoder);
  const auto blob = encode_params(ckpt.params);
  const auto blob_path = blob_path_for(manifest);
  if (blob_path == manifest) throw ValidationError("checkpoint manifest must not end in .bin");

  json j = {{"format", kFormatName},
            {"version", kCheckpointVersion},
            {"encoder", encoder_to_json(ckpt.encoder)},
            {"train", train_to_json(ckpt.train)},
            {"seed", ckpt.train.seed},
            {"epochs", ckpt.loss_trace.size()},
            {"loss_trace", ckpt.loss_trace},
            {"split", {{"train_fraction", ckpt.train_fraction}, {"seed", ckpt.split_seed}}},
            {"blob",
             {{"file", blob_path.filename().string()},
              {"encoding", "float64-le"},
              {"values", blob.size() / 8},
              {"fnv1a64", hex64(fnv1a(blob))}}}};

  std::ofstream bout(blob_path, std::ios::binary);
  if (!bout) throw ValidationError("cannot open " + blob_path.string() + " for writing");
  bout.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!bout) throw ValidationError("write failed: " + blob_path.string());

  std::ofstream mout(manifest, std::ios::binary);
  if (!mout) throw ValidationError("cannot open " + manifest.string() + " for writing");
  mout << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  std::ifstream min(manifest, std::ios::binary);
  if (!min) throw ValidationError("cannot open checkpoint " + manifest.string());
  json j;
  try {
    j = json::parse(min);
  } catch (const json::parse_error& e) {
    throw ValidationError("checkpoint manifest: " + std::string(e.what()));
  }
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      throw ValidationError("checkpoint manifest: unknown format");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("checkpoint manifest: unsupported version");
    }
    Checkpoint ckpt;
    ckpt.encoder = encoder_from_json(j.at("encoder"));
    ckpt.train = train_from_json(j.at("train"));
    ckpt.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    ckpt.train_fraction = j.at("split").at("train_fraction").get<double>();
    ckpt.split_seed = j.at("split").at("seed").get<std::uint64_t>();

    const auto& b = j.at("blob");
    const auto blob_path = manifest.parent_path() / b.at("file").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw ValidationError("cannot open checkpoint blob " + blob_path.string());
    std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)),
                                    std::istreambuf_iterator<char>());
    if (blob.size() != b.at("values").get<std::size_t>() * 8) {
      throw ValidationError("checkpoint blob length does not match manifest value count");
    }
    if (hex64(fnv1a(blob)) != b.at("fnv1a64").get<std::string>()) {
      throw ValidationError("checkpoint blob checksum mismatch");
    }
    ckpt.params = decode_params(blob, ckpt.encoder);
    return ckpt;
  } catch (const json::exception& e) {
    throw ValidationError("checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace vagg
