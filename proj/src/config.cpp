// SPDX-License-Identifier: Apache-2.0
#include "exam/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace exam {

namespace fs = std::filesystem;

double RunConfig::effective_grad_clip() const {
  if (grad_clip)
    return *grad_clip;
  return model.encoder == EncoderKind::gru ? 5.0 : 0.0;
}

void RunConfig::validate() const {
  auto positive = [](auto v, const char *field) {
    if (!(v > 0))
      throw ConfigError(std::string(field) + " must be positive");
  };
  positive(model.embed_dim, "embed_dim");
  positive(model.seq_len, "seq_len");
  positive(learning_rate, "learning_rate");
  positive(batch_size, "batch_size");
  positive(max_epochs, "max_epochs");
  positive(min_count, "min_count");
  if (model.num_classes < 2)
    throw ConfigError("num_classes must be >= 2");
  if (model.kind == ModelKind::fasttext &&
      model.encoder != EncoderKind::embed_only)
    throw ConfigError("encoder: model fasttext requires encoder embed_only, "
                      "got " +
                      to_string(model.encoder));
  if (model.encoder == EncoderKind::gru && model.encoder_width() == 0)
    throw ConfigError("gru_hidden must be positive");
  if (!(model.dropout >= 0.0 && model.dropout < 1.0))
    throw ConfigError("dropout must lie in [0, 1)");
  if (weight_decay < 0.0)
    throw ConfigError("weight_decay must be >= 0");
  if (validation_path.empty() && !(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in (0, 1)");
  if (!class_names.empty() && class_names.size() != model.num_classes)
    throw ConfigError("class_names has " + std::to_string(class_names.size()) +
                      " entries for " + std::to_string(model.num_classes) +
                      " classes");
  if (train_path.empty())
    throw ConfigError("train_path is required");
  if (checkpoint_dir.empty())
    throw ConfigError("checkpoint_dir is required");
  for (const auto *p : {&train_path, &validation_path, &test_path})
    if (!p->empty() && !fs::is_regular_file(*p))
      throw ConfigError("data file not found: " + p->string());
}

RunConfig profile_defaults(std::string_view name) {
  RunConfig c;
  c.profile = std::string(name);
  if (name == "multiclass-paper") {
    c.model.task = Task::multiclass;
    c.model.kind = ModelKind::exam;
    c.model.encoder = EncoderKind::region;
    c.model.embed_dim = 128;
    c.model.seq_len = 64;
    c.model.region_radius = 3;
    c.model.agg_hidden = 0; // 2n
    c.learning_rate = 1e-4;
    c.batch_size = 16;
    c.min_count = 5;
  } else if (name == "multilabel-paper") {
    c.model.task = Task::multilabel;
    c.model.kind = ModelKind::exam;
    c.model.encoder = EncoderKind::gru;
    c.model.embed_dim = 256;
    c.model.gru_hidden = 1024;
    c.model.seq_len = 30;
    c.model.agg_hidden = 60;
    c.learning_rate = 1e-3;
    c.batch_size = 1000;
    c.min_count = 5;
  } else if (name == "toy") {
    c.model.task = Task::multiclass;
    c.model.kind = ModelKind::exam;
    c.model.encoder = EncoderKind::region;
    c.model.embed_dim = 16;
    c.model.seq_len = 32;
    c.model.region_radius = 3;
    c.model.agg_hidden = 0;
    c.learning_rate = 1e-3;
    c.batch_size = 8;
    c.min_count = 1;
  } else {
    throw ConfigError("profile: unknown profile '" + std::string(name) + "'");
  }
  return c;
}

namespace {

template <typename V>
V field(const nlohmann::json &j, const std::string &key) {
  try {
    return j.get<V>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigError(key + ": wrong type (" + j.dump() + ")");
  }
}

std::size_t count_field(const nlohmann::json &j, const std::string &key) {
  if (!j.is_number_integer() || j.get<long long>() < 0)
    throw ConfigError(key + ": expected a non-negative integer, got " +
                      j.dump());
  return j.get<std::size_t>();
}

fs::path path_field(const nlohmann::json &j, const std::string &key,
                    const fs::path &base) {
  fs::path p = field<std::string>(j, key);
  if (p.empty() || p.is_absolute() || base.empty())
    return p;
  return base / p;
}

} // namespace

RunConfig parse_run_config(std::string_view json_text,
                           const fs::path &base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ConfigError("config must be a JSON object");

  static const std::set<std::string> known = {
      "profile",       "task",          "model",
      "encoder",       "gru_variant",   "embed_dim",
      "seq_len",       "region_radius", "gru_hidden",
      "agg_hidden",    "num_classes",   "mask_padding_interactions",
      "dropout",       "weight_decay",  "learning_rate",
      "batch_size",    "max_epochs",    "patience",
      "seed",          "grad_clip",     "min_count",
      "val_fraction",  "precision_log_base",
      "train_path",    "validation_path", "test_path",
      "checkpoint_dir", "class_names"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError(it.key() + ": unknown key");

  RunConfig c = profile_defaults(
      j.contains("profile") ? field<std::string>(j["profile"], "profile")
                            : std::string("multiclass-paper"));
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string &key = it.key();
    const auto &v = it.value();
    if (key == "profile")
      continue;
    if (key == "task")
      c.model.task = parse_task(field<std::string>(v, key));
    else if (key == "model")
      c.model.kind = parse_model_kind(field<std::string>(v, key));
    else if (key == "encoder")
      c.model.encoder = parse_encoder_kind(field<std::string>(v, key));
    else if (key == "gru_variant")
      c.model.gru_variant = parse_gru_variant(field<std::string>(v, key));
    else if (key == "embed_dim")
      c.model.embed_dim = count_field(v, key);
    else if (key == "seq_len")
      c.model.seq_len = count_field(v, key);
    else if (key == "region_radius")
      c.model.region_radius = count_field(v, key);
    else if (key == "gru_hidden")
      c.model.gru_hidden = count_field(v, key);
    else if (key == "agg_hidden")
      c.model.agg_hidden = count_field(v, key);
    else if (key == "num_classes")
      c.model.num_classes = count_field(v, key);
    else if (key == "mask_padding_interactions")
      c.model.mask_padding_interactions = field<bool>(v, key);
    else if (key == "dropout")
      c.model.dropout = field<double>(v, key);
    else if (key == "weight_decay")
      c.weight_decay = field<double>(v, key);
    else if (key == "learning_rate")
      c.learning_rate = field<double>(v, key);
    else if (key == "batch_size")
      c.batch_size = count_field(v, key);
    else if (key == "max_epochs")
      c.max_epochs = count_field(v, key);
    else if (key == "patience")
      c.patience = count_field(v, key);
    else if (key == "seed")
      c.seed = count_field(v, key);
    else if (key == "grad_clip")
      c.grad_clip = field<double>(v, key);
    else if (key == "min_count")
      c.min_count = count_field(v, key);
    else if (key == "val_fraction")
      c.val_fraction = field<double>(v, key);
    else if (key == "precision_log_base")
      c.log_base = parse_log_base(field<std::string>(v, key));
    else if (key == "train_path")
      c.train_path = path_field(v, key, base_dir);
    else if (key == "validation_path")
      c.validation_path = path_field(v, key, base_dir);
    else if (key == "test_path")
      c.test_path = path_field(v, key, base_dir);
    else if (key == "checkpoint_dir")
      c.checkpoint_dir = path_field(v, key, base_dir);
    else if (key == "class_names")
      c.class_names = field<std::vector<std::string>>(v, key);
  }
  return c;
}

RunConfig load_run_config(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("config file not found: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

void apply_seed_override(RunConfig &config) {
  const char *env = std::getenv("EXAM_SEED");
  if (!env || !*env)
    return;
  char *end = nullptr;
  const unsigned long long seed = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-')
    throw ConfigError(std::string("EXAM_SEED: not a non-negative integer: ") +
                      env);
  config.seed = seed;
}

} // namespace exam
