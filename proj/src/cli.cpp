// SPDX-License-Identifier: Apache-2.0
#include "exam/cli.hpp"

#include "exam/checkpoint.hpp"
#include "exam/config.hpp"
#include "exam/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace exam::cli {

namespace fs = std::filesystem;

namespace {

std::vector<Instance> to_instances(const std::vector<LabeledText> &records,
                                   const Vocabulary &vocab,
                                   const ModelConfig &cfg) {
  const auto policy = SequencePolicy::for_task(cfg.task);
  std::vector<Instance> out;
  out.reserve(records.size());
  for (const auto &r : records) {
    const auto tokens = tokenize(r.text);
    out.push_back(make_instance(tokens, r.label, vocab, cfg.seq_len, policy));
  }
  return out;
}

std::vector<std::string> default_class_names(std::size_t c) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < c; ++i)
    names.push_back(std::to_string(i));
  return names;
}

std::string dataset_extension(Task task) {
  return task == Task::multiclass ? ".csv" : ".tsv";
}

bool write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text << '\n';
  return static_cast<bool>(out);
}

} // namespace

int run_train(const fs::path &config_path, std::ostream &out,
              std::ostream &err) {
  RunConfig cfg;
  std::vector<LabeledText> train_records, validation_records, test_records;
  try {
    cfg = load_run_config(config_path);
    apply_seed_override(cfg);
    cfg.validate();
    const Task task = cfg.model.task;
    const std::size_t c = cfg.model.num_classes;
    train_records = load_dataset(cfg.train_path, task, c);
    if (train_records.empty())
      throw DataError("training file is empty: " + cfg.train_path.string());
    if (!cfg.validation_path.empty()) {
      validation_records = load_dataset(cfg.validation_path, task, c);
    } else {
      auto split = split_train_validation(std::move(train_records),
                                          cfg.val_fraction, cfg.seed);
      train_records = std::move(split.train);
      validation_records = std::move(split.validation);
    }
    if (!cfg.test_path.empty())
      test_records = load_dataset(cfg.test_path, task, c);
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError &e) {
    err << "data error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::vector<std::vector<std::string>> corpus;
    corpus.reserve(train_records.size());
    for (const auto &r : train_records)
      corpus.push_back(tokenize(r.text));
    const Vocabulary vocab = Vocabulary::build(corpus, cfg.min_count);
    cfg.model.vocab_size = vocab.size();
    if (cfg.class_names.empty())
      cfg.class_names = default_class_names(cfg.model.num_classes);

    DatasetSplit split;
    split.train = to_instances(train_records, vocab, cfg.model);
    split.validation = to_instances(validation_records, vocab, cfg.model);
    split.test = to_instances(test_records, vocab, cfg.model);

    fs::create_directories(cfg.checkpoint_dir);
    if (cfg.validation_path.empty() && !validation_records.empty())
      save_dataset(cfg.checkpoint_dir /
                       ("validation" + dataset_extension(cfg.model.task)),
                   cfg.model.task, validation_records);

    Model<float> model(cfg.model, cfg.seed);
    TrainOptions options;
    options.learning_rate = cfg.learning_rate;
    options.batch_size = cfg.batch_size;
    options.max_epochs = cfg.max_epochs;
    options.patience = cfg.patience;
    options.seed = cfg.seed;
    options.grad_clip = cfg.effective_grad_clip();
    options.weight_decay = cfg.weight_decay;
    options.log_base = cfg.log_base;
    options.log = &err;

    const auto names = cfg.class_names;
    const fs::path dir = cfg.checkpoint_dir;
    TrainReport report =
        train(model, split, options,
              [&](const Model<float> &m, const EpochRecord &) {
                save_checkpoint(dir, m, vocab, names);
                return dir.string();
              });

    auto report_json = nlohmann::ordered_json::parse(report.to_json());
    if (!split.test.empty()) {
      const auto summary = evaluate(model, split.test, cfg.log_base);
      report_json["test"] = nlohmann::json::parse(summary.to_json());
    }
    write_text(dir / "report.json", report_json.dump(2));
    if (report.stop_reason == StopReason::non_finite) {
      err << "training aborted: " << report.message << '\n';
      return kExitRuntime;
    }
    out << "best epoch " << report.best_epoch << " validation "
        << report.best_metric << " -> " << dir.string() << '\n';
    return kExitOk;
  } catch (const std::exception &e) {
    err << "training failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

namespace {

/// Loads a checkpoint, mapping failures to the usage exit code.
std::optional<LoadedCheckpoint> open_checkpoint(const fs::path &dir,
                                                std::ostream &err) {
  try {
    return load_checkpoint(dir);
  } catch (const std::exception &e) {
    err << "cannot load checkpoint: " << e.what() << '\n';
    return std::nullopt;
  }
}

Instance instance_for_text(const LoadedCheckpoint &ckpt,
                           const std::string &text) {
  const auto &cfg = ckpt.model.config();
  const auto tokens = tokenize(text);
  const std::variant<std::int32_t, LabelSet> label =
      cfg.task == Task::multiclass
          ? std::variant<std::int32_t, LabelSet>(std::int32_t{0})
          : std::variant<std::int32_t, LabelSet>(LabelSet{});
  return make_instance(tokens, label, ckpt.vocab, cfg.seq_len,
                       SequencePolicy::for_task(cfg.task));
}

} // namespace

int run_eval(const fs::path &checkpoint, const fs::path &data,
             std::ostream &out, std::ostream &err) {
  auto ckpt = open_checkpoint(checkpoint, err);
  if (!ckpt)
    return kExitUsage;
  const auto &cfg = ckpt->model.config();
  std::vector<LabeledText> records;
  try {
    records = load_dataset(data, cfg.task, cfg.num_classes);
  } catch (const DataError &e) {
    err << "data error (expected " << to_string(cfg.task)
        << " data): " << e.what() << '\n';
    return kExitUsage;
  }
  if (records.empty()) {
    err << "data error: no instances in " << data.string() << '\n';
    return kExitUsage;
  }
  try {
    const auto instances = to_instances(records, ckpt->vocab, cfg);
    out << evaluate(ckpt->model, instances).to_json() << '\n';
    return kExitOk;
  } catch (const std::exception &e) {
    err << "evaluation failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_predict(const fs::path &checkpoint, const std::string &text,
                std::ostream &out, std::ostream &err) {
  auto ckpt = open_checkpoint(checkpoint, err);
  if (!ckpt)
    return kExitUsage;
  try {
    const auto &cfg = ckpt->model.config();
    const Instance inst = instance_for_text(*ckpt, text);
    const auto probs = ckpt->model.predict(inst.ids);
    const std::vector<double> scores(probs.begin(), probs.end());
    const auto ranked = RankedPrediction::from_scores(scores, {});
    nlohmann::ordered_json j;
    j["task"] = to_string(cfg.task);
    j["predictions"] = nlohmann::json::array();
    for (auto id : ranked.top) {
      const auto idx = static_cast<std::size_t>(id);
      j["predictions"].push_back(nlohmann::ordered_json{
          {"class", id},
          {"name", idx < ckpt->class_names.size() ? ckpt->class_names[idx]
                                                  : std::to_string(id)},
          {"probability", scores[idx]}});
    }
    out << j.dump(2) << '\n';
    return kExitOk;
  } catch (const std::exception &e) {
    err << "prediction failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int run_export_interaction(const fs::path &checkpoint, const std::string &text,
                           const fs::path &out_path, std::ostream &out,
                           std::ostream &err) {
  auto ckpt = open_checkpoint(checkpoint, err);
  if (!ckpt)
    return kExitUsage;
  if (ckpt->model.config().kind != ModelKind::exam) {
    err << "export-interaction needs an exam checkpoint, this one is "
        << to_string(ckpt->model.config().kind) << '\n';
    return kExitUsage;
  }
  try {
    const Instance inst = instance_for_text(*ckpt, text);
    const auto record =
        export_interaction(inst, ckpt->model, ckpt->class_names);
    if (!write_text(out_path, record.to_json())) {
      err << "cannot write " << out_path.string() << '\n';
      return kExitRuntime;
    }
    out << out_path.string() << '\n';
    return kExitOk;
  } catch (const std::exception &e) {
    err << "export failed: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int main(int argc, char **argv) {
  CLI::App app{"EXAM text classifier: word-class interaction model"};
  app.require_subcommand(1);

  std::string config, checkpoint, data, text, out_path;

  auto *train_cmd = app.add_subcommand("train", "train a model from a config");
  train_cmd->add_option("--config", config, "JSON run config")->required();

  auto *eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data, "CSV or TSV data file")->required();

  auto *predict_cmd = app.add_subcommand("predict", "rank classes for a text");
  predict_cmd->add_option("--checkpoint", checkpoint)->required();
  predict_cmd->add_option("--text", text)->required();

  auto *export_cmd = app.add_subcommand(
      "export-interaction", "write the interaction matrix of a text as JSON");
  export_cmd->add_option("--checkpoint", checkpoint)->required();
  export_cmd->add_option("--text", text)->required();
  export_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*train_cmd)
    return run_train(config, std::cout, std::cerr);
  if (*eval_cmd)
    return run_eval(checkpoint, data, std::cout, std::cerr);
  if (*predict_cmd)
    return run_predict(checkpoint, text, std::cout, std::cerr);
  return run_export_interaction(checkpoint, text, out_path, std::cout,
                                std::cerr);
}

} // namespace exam::cli
