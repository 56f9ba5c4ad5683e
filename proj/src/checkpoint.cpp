// SPDX-License-Identifier: Apache-2.0
#include "exam/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace exam {

namespace fs = std::filesystem;

namespace {

std::uint32_t to_little_endian(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big)
    return ((bits & 0xffU) << 24) | ((bits & 0xff00U) << 8) |
           ((bits >> 8) & 0xff00U) | (bits >> 24);
  return bits;
}

nlohmann::ordered_json config_json(const ModelConfig &cfg) {
  nlohmann::ordered_json j;
  j["model"] = to_string(cfg.kind);
  j["task"] = to_string(cfg.task);
  j["encoder"] = to_string(cfg.encoder);
  j["gru_variant"] = to_string(cfg.gru_variant);
  j["vocab_size"] = cfg.vocab_size;
  j["num_classes"] = cfg.num_classes;
  j["embed_dim"] = cfg.embed_dim;
  j["seq_len"] = cfg.seq_len;
  j["region_radius"] = cfg.region_radius;
  j["gru_hidden"] = cfg.encoder_width();
  j["agg_hidden"] = cfg.aggregation_hidden();
  j["mask_padding_interactions"] = cfg.mask_padding_interactions;
  j["dropout"] = cfg.dropout;
  return j;
}

ModelConfig config_from_json(const nlohmann::json &j) {
  ModelConfig cfg;
  cfg.kind = parse_model_kind(j.at("model").get<std::string>());
  cfg.task = parse_task(j.at("task").get<std::string>());
  cfg.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
  cfg.gru_variant = parse_gru_variant(j.at("gru_variant").get<std::string>());
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.num_classes = j.at("num_classes").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.seq_len = j.at("seq_len").get<std::size_t>();
  cfg.region_radius = j.at("region_radius").get<std::size_t>();
  cfg.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  cfg.agg_hidden = j.at("agg_hidden").get<std::size_t>();
  cfg.mask_padding_interactions = j.at("mask_padding_interactions").get<bool>();
  cfg.dropout = j.at("dropout").get<double>();
  return cfg;
}

} // namespace

void save_checkpoint(const fs::path &dir, const Model<float> &model,
                     const Vocabulary &vocab,
                     std::span<const std::string> class_names) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw CheckpointError("cannot create " + dir.string() + ": " +
                          ec.message());

  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointFormatVersion;
  const auto config = config_json(model.config());
  for (auto &[key, value] : config.items())
    meta[key] = value;
  meta["class_names"] = std::vector<std::string>(class_names.begin(),
                                                 class_names.end());
  auto manifest = nlohmann::ordered_json::array();

  std::ofstream weights(dir / "weights.bin", std::ios::binary);
  if (!weights)
    throw CheckpointError("cannot write " + (dir / "weights.bin").string());
  std::size_t offset = 0;
  for (const auto &p : model.parameters()) {
    manifest.push_back(nlohmann::ordered_json{
        {"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    for (float x : p.tensor.data()) {
      const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(x));
      weights.write(reinterpret_cast<const char *>(&bits), sizeof bits);
    }
    offset += p.tensor.size() * sizeof(float);
  }
  weights.close();
  if (!weights)
    throw CheckpointError("short write to " + (dir / "weights.bin").string());
  meta["parameters"] = std::move(manifest);

  std::ofstream meta_out(dir / "meta.json", std::ios::binary);
  meta_out << meta.dump(2) << '\n';
  if (!meta_out)
    throw CheckpointError("cannot write " + (dir / "meta.json").string());
  vocab.save(dir / "vocab.txt");
}

LoadedCheckpoint load_checkpoint(const fs::path &dir) {
  std::ifstream meta_in(dir / "meta.json", std::ios::binary);
  if (!meta_in)
    throw CheckpointError("no meta.json in " + dir.string());
  nlohmann::json meta;
  ModelConfig cfg;
  try {
    meta = nlohmann::json::parse(meta_in);
    if (meta.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw CheckpointError("unsupported checkpoint format version");
    cfg = config_from_json(meta);
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError("malformed meta.json in " + dir.string() + ": " +
                          e.what());
  } catch (const ConfigError &e) {
    throw CheckpointError("malformed meta.json in " + dir.string() + ": " +
                          e.what());
  }

  Vocabulary vocab = Vocabulary::load(dir / "vocab.txt");
  if (vocab.size() != cfg.vocab_size)
    throw CheckpointError("vocab.txt has " + std::to_string(vocab.size()) +
                          " tokens, meta.json declares " +
                          std::to_string(cfg.vocab_size));

  Model<float> model(cfg, 0);
  std::ifstream weights(dir / "weights.bin", std::ios::binary);
  if (!weights)
    throw CheckpointError("no weights.bin in " + dir.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(weights)),
                          std::istreambuf_iterator<char>());

  const auto &manifest = meta.at("parameters");
  auto &params = model.parameters();
  if (manifest.size() != params.size())
    throw CheckpointError("manifest lists " + std::to_string(manifest.size()) +
                          " parameters, model expects " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto &entry = manifest[i];
    auto &p = params[i];
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    if (name != p.name || shape != p.tensor.shape())
      throw CheckpointError("manifest entry " + std::to_string(i) + " is " +
                            name + shape_to_string(shape) + ", expected " +
                            p.name + shape_to_string(p.tensor.shape()));
    const std::size_t count = p.tensor.size();
    if (offset + count * sizeof(float) > bytes.size())
      throw CheckpointError("weights.bin too short for " + name);
    auto dst = p.tensor.data();
    for (std::size_t j = 0; j < count; ++j) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + offset + j * sizeof bits, sizeof bits);
      dst[j] = std::bit_cast<float>(to_little_endian(bits));
    }
  }

  auto names = meta.value("class_names", std::vector<std::string>{});
  return {std::move(model), std::move(vocab), std::move(names)};
}

} // namespace exam
