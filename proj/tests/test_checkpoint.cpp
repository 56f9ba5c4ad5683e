// SPDX-License-Identifier: Apache-2.0
#include "exam/checkpoint.hpp"
#include "exam/training.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <fstream>

#include <unistd.h>

using namespace exam;
namespace fs = std::filesystem;

namespace {

class CheckpointTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("exam_ckpt_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

ModelConfig config_for(EncoderKind encoder, ModelKind kind, std::size_t vocab) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.encoder = encoder;
  cfg.vocab_size = vocab;
  cfg.num_classes = 4;
  cfg.embed_dim = 8;
  cfg.seq_len = 16;
  cfg.region_radius = 2;
  cfg.gru_hidden = 6;
  return cfg;
}

} // namespace

TEST_F(CheckpointTest, TrainedModelReproducesValidationMetric) {
  exam::testing::KeywordCorpusSpec spec;
  spec.num_classes = 4;
  spec.train = 80;
  spec.validation = 60;
  spec.test = 0;
  spec.max_length = 14;
  const auto data =
      exam::testing::prepare(exam::testing::make_keyword_corpus(spec), 16);
  Model<float> model(config_for(EncoderKind::region, ModelKind::exam,
                                data.vocab.size()),
                     5);
  TrainOptions opts;
  opts.max_epochs = 3;
  opts.batch_size = 8;
  const std::vector<std::string> names{"a", "b", "c", "d"};
  const auto report = train(model, data.split, opts,
                            [&](const Model<float> &m, const EpochRecord &) {
                              save_checkpoint(dir_, m, data.vocab, names);
                              return dir_.string();
                            });
  const auto loaded = load_checkpoint(dir_);
  const double again = evaluate(loaded.model, data.split.validation).primary();
  EXPECT_NEAR(again, report.best_metric, 1e-7);
  EXPECT_EQ(loaded.class_names, names);
  EXPECT_EQ(loaded.vocab.size(), data.vocab.size());
}

TEST_F(CheckpointTest, EveryKindRoundTripsBitExactly) {
  const std::vector<std::pair<EncoderKind, ModelKind>> kinds{
      {EncoderKind::region, ModelKind::exam},
      {EncoderKind::gru, ModelKind::exam},
      {EncoderKind::embed_only, ModelKind::exam},
      {EncoderKind::embed_only, ModelKind::fasttext},
      {EncoderKind::gru, ModelKind::encoder_only}};
  const auto vocab = Vocabulary::build({{"p", "q", "r", "s"}}, 1);
  for (const auto &[enc, kind] : kinds) {
    auto cfg = config_for(enc, kind, vocab.size());
    cfg.task = Task::multilabel;
    cfg.gru_variant = GruVariant::as_printed;
    Model<float> model(cfg, 3);
    save_checkpoint(dir_, model, vocab, {});
    const auto back = load_checkpoint(dir_);
    EXPECT_EQ(back.model.snapshot(), model.snapshot());
    const auto &bc = back.model.config();
    EXPECT_EQ(bc.kind, cfg.kind);
    EXPECT_EQ(bc.encoder, cfg.encoder);
    EXPECT_EQ(bc.task, cfg.task);
    EXPECT_EQ(bc.gru_variant, cfg.gru_variant);
    EXPECT_EQ(bc.encoder_width(), cfg.encoder_width());
    EXPECT_EQ(bc.aggregation_hidden(), cfg.aggregation_hidden());
    const std::vector<std::int32_t> ids(16, 2);
    EXPECT_EQ(back.model.predict(ids), model.predict(ids));
    fs::remove_all(dir_);
  }
}

TEST_F(CheckpointTest, ManifestListsOffsetsInBytes) {
  const auto vocab = Vocabulary::build({{"p"}}, 1);
  Model<float> model(config_for(EncoderKind::region, ModelKind::exam,
                                vocab.size()),
                     3);
  save_checkpoint(dir_, model, vocab, {});
  std::ifstream in(dir_ / "meta.json");
  const auto meta = nlohmann::json::parse(in);
  std::size_t offset = 0;
  const auto &manifest = meta.at("parameters");
  ASSERT_EQ(manifest.size(), model.parameters().size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto &p = model.parameters()[i];
    EXPECT_EQ(manifest[i].at("name"), p.name);
    EXPECT_EQ(manifest[i].at("shape").get<Shape>(), p.tensor.shape());
    EXPECT_EQ(manifest[i].at("offset").get<std::size_t>(), offset);
    offset += p.tensor.size() * sizeof(float);
  }
  EXPECT_EQ(fs::file_size(dir_ / "weights.bin"), offset);
  EXPECT_EQ(Vocabulary::load(dir_ / "vocab.txt").token(0), "<pad>");
}

TEST_F(CheckpointTest, TruncatedWeightsRejected) {
  const auto vocab = Vocabulary::build({{"p"}}, 1);
  Model<float> model(config_for(EncoderKind::region, ModelKind::exam,
                                vocab.size()),
                     3);
  save_checkpoint(dir_, model, vocab, {});
  fs::resize_file(dir_ / "weights.bin", 12);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);
}

TEST_F(CheckpointTest, MissingDirectoryRejected) {
  EXPECT_THROW(load_checkpoint(dir_ / "nope"), CheckpointError);
}
