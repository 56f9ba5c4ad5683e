// SPDX-License-Identifier: Apache-2.0
#include "exam/checkpoint.hpp"
#include "exam/cli.hpp"
#include "exam/config.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace exam;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path make_workdir() {
  const auto dir = fs::temp_directory_path() /
                   ("exam_cli_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path &path, const std::string &text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result train(const fs::path &config) {
  std::ostringstream out, err;
  const int code = cli::run_train(config, out, err);
  return {code, out.str(), err.str()};
}

Result eval(const fs::path &ckpt, const fs::path &data) {
  std::ostringstream out, err;
  const int code = cli::run_eval(ckpt, data, out, err);
  return {code, out.str(), err.str()};
}

Result predict(const fs::path &ckpt, const std::string &text) {
  std::ostringstream out, err;
  const int code = cli::run_predict(ckpt, text, out, err);
  return {code, out.str(), err.str()};
}

Result export_interaction(const fs::path &ckpt, const std::string &text,
                          const fs::path &out_path) {
  std::ostringstream out, err;
  const int code =
      cli::run_export_interaction(ckpt, text, out_path, out, err);
  return {code, out.str(), err.str()};
}

/// Runs the built executable; stdout is captured, stderr is discarded.
Result run_binary(const std::string &args) {
  const std::string cmd = std::string("\"") + EXAM_CLI_PATH + "\" " + args +
                          " 2>/dev/null";
  FILE *pipe = ::popen(cmd.c_str(), "r");
  if (!pipe)
    return {-1, "", "popen failed"};
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
    out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out, ""};
}

/// One trained toy checkpoint shared by the whole suite.
class CliTest : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = make_workdir();
    exam::testing::KeywordCorpusSpec spec;
    spec.num_classes = 4;
    spec.train = 200;
    spec.validation = 0;
    spec.test = 40;
    spec.max_length = 20;
    corpus_ = exam::testing::make_keyword_corpus(spec);
    save_dataset(dir_ / "train.csv", Task::multiclass, corpus_.train);
    save_dataset(dir_ / "test.csv", Task::multiclass, corpus_.test);
    write_file(dir_ / "empty.csv", "");
    write_file(dir_ / "labels.tsv", "kw1 w3 w4\t1,2\n");

    json cfg = base_config();
    write_file(dir_ / "toy.json", cfg.dump());
    const auto r = train(dir_ / "toy.json");
    train_code_ = r.code;
    train_err_ = r.err;
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static json base_config() {
    return json{{"profile", "toy"},
                {"num_classes", 4},
                {"max_epochs", 4},
                {"seed", 3},
                {"class_names", {"zero", "one", "two", "three"}},
                {"train_path", "train.csv"},
                {"test_path", "test.csv"},
                {"checkpoint_dir", "ckpt"}};
  }

  static fs::path write_config(const std::string &name, const json &cfg) {
    const auto path = dir_ / name;
    write_file(path, cfg.dump());
    return path;
  }

  static fs::path ckpt() { return dir_ / "ckpt"; }

  static inline fs::path dir_;
  static inline exam::testing::KeywordCorpus corpus_;
  static inline int train_code_ = -1;
  static inline std::string train_err_;
};

} // namespace

TEST_F(CliTest, TrainWritesCheckpointAndReport) {
  ASSERT_EQ(train_code_, cli::kExitOk) << train_err_;
  for (const char *f : {"meta.json", "weights.bin", "vocab.txt", "report.json",
                        "validation.csv"})
    EXPECT_TRUE(fs::exists(ckpt() / f)) << f;
  const auto report = json::parse(read_file(ckpt() / "report.json"));
  const auto &epochs = report.at("epochs");
  ASSERT_FALSE(epochs.empty());
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    EXPECT_EQ(epochs[i].at("epoch").get<std::size_t>(), i + 1);
    EXPECT_TRUE(std::isfinite(epochs[i].at("train_loss").get<double>()));
  }
  EXPECT_TRUE(report.contains("test"));
  EXPECT_EQ(report.at("test").at("count"), 40);
}

TEST_F(CliTest, EvalReproducesReportedValidationMetric) {
  ASSERT_EQ(train_code_, cli::kExitOk);
  const auto r = eval(ckpt(), ckpt() / "validation.csv");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto summary = json::parse(r.out);
  const auto report = json::parse(read_file(ckpt() / "report.json"));
  // 20 validation rows, so the accuracy is a multiple of 0.05 and the six
  // printed decimals are exact.
  EXPECT_EQ(summary.at("count"), 20);
  EXPECT_NEAR(summary.at("accuracy").get<double>(),
              report.at("best_metric").get<double>(), 1e-7);
  EXPECT_EQ(eval(ckpt(), ckpt() / "validation.csv").out, r.out);
}

TEST_F(CliTest, EvalRejectsEmptyAndMismatchedData) {
  EXPECT_EQ(eval(ckpt(), dir_ / "empty.csv").code, cli::kExitUsage);
  EXPECT_EQ(eval(ckpt(), dir_ / "labels.tsv").code, cli::kExitUsage);
  EXPECT_EQ(eval(ckpt(), dir_ / "missing.csv").code, cli::kExitUsage);
  EXPECT_EQ(eval(dir_ / "no_ckpt", dir_ / "test.csv").code, cli::kExitUsage);
}

TEST_F(CliTest, MultilabelCheckpointRejectsMulticlassCsv) {
  ModelConfig cfg;
  cfg.task = Task::multilabel;
  cfg.encoder = EncoderKind::gru;
  cfg.vocab_size = 5;
  cfg.num_classes = 4;
  cfg.embed_dim = 4;
  cfg.seq_len = 6;
  const auto vocab = Vocabulary::build({{"kw1", "w3", "w4"}}, 1);
  save_checkpoint(dir_ / "ml_ckpt", Model<float>(cfg, 1), vocab, {});
  EXPECT_EQ(eval(dir_ / "ml_ckpt", dir_ / "test.csv").code, cli::kExitUsage);
  const auto ok = eval(dir_ / "ml_ckpt", dir_ / "labels.tsv");
  EXPECT_EQ(ok.code, cli::kExitOk) << ok.err;
  EXPECT_TRUE(json::parse(ok.out).contains("f1"));
}

TEST_F(CliTest, PredictIsSortedNormalisedAndDeterministic) {
  ASSERT_EQ(train_code_, cli::kExitOk);
  const auto a = predict(ckpt(), "w1 kw2 w7 w8");
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  EXPECT_EQ(predict(ckpt(), "w1 kw2 w7 w8").out, a.out);
  const auto j = json::parse(a.out);
  EXPECT_EQ(j.at("task"), "multiclass");
  const auto &preds = j.at("predictions");
  ASSERT_EQ(preds.size(), 4u);
  double total = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += preds[i].at("probability").get<double>();
    if (i) {
      EXPECT_GE(preds[i - 1].at("probability").get<double>(),
                preds[i].at("probability").get<double>());
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
  const std::vector<std::string> names{"zero", "one", "two", "three"};
  EXPECT_EQ(preds[0].at("name"), names[preds[0].at("class").get<std::size_t>()]);
}

TEST_F(CliTest, ExportInteractionMatchesConfig) {
  ASSERT_EQ(train_code_, cli::kExitOk);
  const auto out = dir_ / "interaction.json";
  const auto r = export_interaction(ckpt(), "The w3 kw1, w9", out);
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto rec = InteractionRecord::from_json(read_file(out));
  ASSERT_EQ(rec.matrix.size(), 4u);
  for (const auto &row : rec.matrix)
    EXPECT_EQ(row.size(), 32u);
  ASSERT_EQ(rec.tokens.size(), 32u);
  const std::vector<std::string> head{"the", "w3", "kw1", ",", "w9"};
  for (std::size_t t = 0; t < head.size(); ++t) {
    EXPECT_EQ(rec.tokens[t], head[t]);
    EXPECT_FALSE(rec.padding_mask[t]);
  }
  EXPECT_EQ(rec.tokens[5], "<pad>");
  EXPECT_TRUE(rec.padding_mask[5]);
  EXPECT_EQ(rec.class_names,
            (std::vector<std::string>{"zero", "one", "two", "three"}));
}

TEST_F(CliTest, ExportRejectsNonExamCheckpoint) {
  auto cfg = base_config();
  cfg["model"] = "fasttext";
  cfg["encoder"] = "embed_only";
  cfg["max_epochs"] = 1;
  cfg["checkpoint_dir"] = "ft_ckpt";
  const auto r = train(write_config("ft.json", cfg));
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(export_interaction(dir_ / "ft_ckpt", "kw1", dir_ / "x.json").code,
            cli::kExitUsage);
}

TEST_F(CliTest, ValidationErrorsExitTwo) {
  auto missing = base_config();
  missing["train_path"] = "nowhere.csv";
  const auto r = train(write_config("missing.json", missing));
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("nowhere.csv"), std::string::npos) << r.err;

  auto bad_combo = base_config();
  bad_combo["model"] = "fasttext";
  bad_combo["encoder"] = "gru";
  EXPECT_EQ(train(write_config("combo.json", bad_combo)).code, cli::kExitUsage);

  auto typo = base_config();
  typo["learning_rat"] = 0.1;
  const auto t = train(write_config("typo.json", typo));
  EXPECT_EQ(t.code, cli::kExitUsage);
  EXPECT_NE(t.err.find("learning_rat"), std::string::npos) << t.err;

  auto empty = base_config();
  empty["train_path"] = "empty.csv";
  EXPECT_EQ(train(write_config("empty.json", empty)).code, cli::kExitUsage);

  EXPECT_EQ(train(dir_ / "absent.json").code, cli::kExitUsage);
}

TEST_F(CliTest, DivergentTrainingExitsThree) {
  auto cfg = base_config();
  cfg["learning_rate"] = 1e30;
  cfg["checkpoint_dir"] = "diverged";
  const auto r = train(write_config("diverge.json", cfg));
  EXPECT_EQ(r.code, cli::kExitRuntime) << r.err;
  const auto report = json::parse(read_file(dir_ / "diverged" / "report.json"));
  EXPECT_EQ(report.at("stop_reason"), "non_finite");
}

TEST_F(CliTest, SeedEnvironmentOverride) {
  auto cfg = parse_run_config(base_config().dump(), dir_);
  ::setenv("EXAM_SEED", "77", 1);
  apply_seed_override(cfg);
  EXPECT_EQ(cfg.seed, 77u);
  ::setenv("EXAM_SEED", "-4", 1);
  EXPECT_THROW(apply_seed_override(cfg), ConfigError);
  ::unsetenv("EXAM_SEED");
  apply_seed_override(cfg);
  EXPECT_EQ(cfg.seed, 77u);
}

TEST_F(CliTest, TrainingIsDeterministicForASeed) {
  auto cfg = base_config();
  cfg["max_epochs"] = 2;
  cfg["checkpoint_dir"] = "det_a";
  ASSERT_EQ(train(write_config("det_a.json", cfg)).code, cli::kExitOk);
  cfg["checkpoint_dir"] = "det_b";
  ASSERT_EQ(train(write_config("det_b.json", cfg)).code, cli::kExitOk);
  EXPECT_EQ(read_file(dir_ / "det_a" / "weights.bin"),
            read_file(dir_ / "det_b" / "weights.bin"));
}

TEST(ConfigProfiles, PublishedHyperparameters) {
  const auto mc = profile_defaults("multiclass-paper");
  EXPECT_EQ(mc.model.encoder, EncoderKind::region);
  EXPECT_EQ(mc.model.region_radius, 3u);
  EXPECT_EQ(mc.model.embed_dim, 128u);
  EXPECT_EQ(mc.model.aggregation_hidden(), 2 * mc.model.seq_len);
  EXPECT_EQ(mc.learning_rate, 1e-4);
  EXPECT_EQ(mc.batch_size, 16u);

  const auto ml = profile_defaults("multilabel-paper");
  EXPECT_EQ(ml.model.task, Task::multilabel);
  EXPECT_EQ(ml.model.encoder, EncoderKind::gru);
  EXPECT_EQ(ml.model.embed_dim, 256u);
  EXPECT_EQ(ml.model.encoder_width(), 1024u);
  EXPECT_EQ(ml.model.aggregation_hidden(), 60u);
  EXPECT_EQ(ml.model.seq_len, 30u);
  EXPECT_EQ(ml.batch_size, 1000u);
  EXPECT_EQ(ml.learning_rate, 1e-3);
  EXPECT_EQ(ml.effective_grad_clip(), 5.0);

  const auto toy = profile_defaults("toy");
  EXPECT_EQ(toy.model.embed_dim, 16u);
  EXPECT_EQ(toy.model.seq_len, 32u);
  EXPECT_EQ(toy.batch_size, 8u);
  EXPECT_EQ(toy.effective_grad_clip(), 0.0);

  EXPECT_THROW(profile_defaults("huge"), ConfigError);
}

TEST(ConfigParse, WrongTypesAndUnknownValues) {
  EXPECT_THROW(parse_run_config("[1]"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"seq_len\": -3}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"encoder\": \"lstm\"}"), ConfigError);
  EXPECT_THROW(parse_run_config("{\"precision_log_base\": \"10\"}"),
               ConfigError);
  const auto c = parse_run_config("{\"precision_log_base\": \"2\"}");
  EXPECT_EQ(c.log_base, LogBase::two);
}

class Binary : public ::testing::Test {};

TEST_F(Binary, UsageErrorsExitTwo) {
  EXPECT_EQ(run_binary("").code, cli::kExitUsage);
  EXPECT_EQ(run_binary("train").code, cli::kExitUsage);
  EXPECT_EQ(run_binary("frobnicate").code, cli::kExitUsage);
  EXPECT_EQ(run_binary("--help").code, cli::kExitOk);
}

TEST_F(Binary, EndToEndThroughTheExecutable) {
  const auto dir = make_workdir() / "bin";
  fs::create_directories(dir);
  exam::testing::KeywordCorpusSpec spec;
  spec.num_classes = 3;
  spec.train = 60;
  spec.validation = 0;
  spec.test = 0;
  const auto corpus = exam::testing::make_keyword_corpus(spec);
  save_dataset(dir / "train.csv", Task::multiclass, corpus.train);
  write_file(dir / "cfg.json",
             json{{"profile", "toy"},
                  {"num_classes", 3},
                  {"max_epochs", 1},
                  {"train_path", "train.csv"},
                  {"checkpoint_dir", "ckpt"}}
                 .dump());
  const std::string q = "\"" + dir.string();
  ASSERT_EQ(run_binary("train --config " + q + "/cfg.json\"").code,
            cli::kExitOk);
  const auto p = run_binary("predict --checkpoint " + q + "/ckpt\" --text kw1");
  ASSERT_EQ(p.code, cli::kExitOk);
  EXPECT_EQ(json::parse(p.out).at("predictions").size(), 3u);
  EXPECT_EQ(run_binary("eval --checkpoint " + q + "/ckpt\" --data " + q +
                       "/ckpt/validation.csv\"")
                .code,
            cli::kExitOk);
  EXPECT_EQ(run_binary("eval --checkpoint " + q + "/ckpt\" --data " + q +
                       "/nothing.csv\"")
                .code,
            cli::kExitUsage);
  fs::remove_all(dir);
}
