/*
 * Copyright 2026 The TDNR Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "support/property.hpp"
#include "tdnr/data/synthetic.hpp"
#include "tdnr/training/checkpoint.hpp"
#include "tdnr/training/trainer.hpp"

namespace tdnr {
namespace {

bool same_values(ModelParams<float>& a, ModelParams<float>& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.storage() != pb[i]->value.storage()) return false;
  }
  return true;
}

TEST(InitParams, SameSeedIsBitIdentical) {
  const TrainConfig cfg;
  auto a = init_params<float>(cfg, 50, 7);
  auto b = init_params<float>(cfg, 50, 7);
  auto c = init_params<float>(cfg, 50, 8);
  EXPECT_TRUE(same_values(a, b));
  EXPECT_FALSE(same_values(a, c));
}

TEST(InitParams, GlorotBoundsAndZeroBiases) {
  const TrainConfig cfg;  // d = h_a = 64
  EXPECT_NEAR(glorot_bound(64, 64), std::sqrt(6.0 / 128.0), 1e-15);
  EXPECT_NEAR(glorot_bound(64, 64), 0.2165, 1e-4);
  auto p = init_params<double>(cfg, 50, testing::kMasterSeed);
  double widest = 0.0;
  for (double v : p.candidate_merge.projection.value.values()) widest = std::max(widest, std::abs(v));
  EXPECT_LE(widest, glorot_bound(64, 64));
  EXPECT_GT(widest, 0.9 * glorot_bound(64, 64));
  for (double v : p.candidate_merge.bias.value.values()) EXPECT_EQ(v, 0.0);
  for (double v : p.title_head.bias.value.values()) EXPECT_EQ(v, 0.0);
}

TEST(InitParams, EmbeddingRangeAndPaddingRow) {
  const TrainConfig cfg;
  auto p = init_params<double>(cfg, 30, testing::kMasterSeed);
  for (std::size_t j = 0; j < cfg.d; ++j) EXPECT_EQ(p.embedding.value(0, j), 0.0);
  for (std::size_t r = 1; r < 30; ++r) {
    for (std::size_t j = 0; j < cfg.d; ++j) EXPECT_LE(std::abs(p.embedding.value(r, j)), 0.1);
  }
}

TEST(InitParams, InvalidConfigIsRejected) {
  TrainConfig cfg;
  cfg.heads = 5;
  EXPECT_THROW(init_params<float>(cfg, 30, 1), ConfigError);
}

Dataset small_dataset(std::size_t users, std::size_t per_user, const TrainConfig& cfg) {
  SyntheticConfig syn;
  syn.n_users = users;
  syn.n_news = 40;
  syn.impressions_per_user = per_user;
  syn.seed = 5;
  const SyntheticCorpus c = generate_synthetic_corpus(syn);
  std::istringstream news(c.news_tsv), beh(c.behaviors_tsv);
  return load_dataset(news, beh, cfg);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.d = 16;
  cfg.heads = 2;
  cfg.attn_hidden = 16;
  cfg.batch_size = 8;
  return cfg;
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const Dataset ds = small_dataset(5, 2, cfg);
  auto result = train(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
  auto init = init_params<float>(cfg, ds.vocab.size(), cfg.seed);
  EXPECT_TRUE(same_values(result.state.params, init));
  EXPECT_TRUE(result.log.empty());
}

TEST(Train, SameSeedGivesIdenticalLogs) {
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  const Dataset ds = small_dataset(5, 2, cfg);
  auto a = train(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
  auto b = train(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
  std::ostringstream la, lb;
  write_training_log(la, a.log);
  write_training_log(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(la.str().substr(0, la.str().find('\n')), "epoch,l_rec,l_cl,l_total");
  EXPECT_TRUE(same_values(a.state.params, b.state.params));
}

TEST(Train, LossDecreasesOnTenImpressions) {
  TrainConfig cfg = small_config();
  cfg.epochs = 200;
  const Dataset ds = small_dataset(5, 2, cfg);
  ASSERT_EQ(ds.impressions.size(), 10u);
  auto r = train(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
  ASSERT_EQ(r.log.size(), 200u);
  EXPECT_LT(r.log.back().l_total, r.log.front().l_total);
  for (const auto& e : r.log) {
    EXPECT_NEAR(e.l_total, e.l_rec + cfg.loss.lambda1 * e.l_cl, 1e-6);
  }
}

TEST(Train, VariantsWithoutContrastSkipProjections) {
  TrainConfig cfg = small_config();
  cfg.epochs = 1;
  const Dataset ds = small_dataset(5, 2, cfg);
  for (Variant v : kAllVariants) {
    cfg.variant = v;
    auto r = train(cfg, ds.corpus, ds.vocab.size(), ds.impressions);
    if (traits_of(v).contrastive) {
      EXPECT_GT(r.stats.projection_evaluations, 0u) << variant_name(v);
    } else {
      EXPECT_EQ(r.stats.projection_evaluations, 0u) << variant_name(v);
      for (const auto& e : r.log) EXPECT_EQ(e.l_cl, 0.0);
    }
  }
}

TEST(Train, NoPositiveImpressionIsAContractError) {
  TrainConfig cfg = small_config();
  Dataset ds = small_dataset(5, 2, cfg);
  for (auto& imp : ds.impressions) {
    for (auto& c : imp.candidates) c.label = 0;
  }
  EXPECT_THROW(train(cfg, ds.corpus, ds.vocab.size(), ds.impressions), ContractError);
}

class CheckpointFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("tdnr_ckpt_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
    cfg_ = small_config();
    cfg_.epochs = 2;
    ds_ = small_dataset(5, 2, cfg_);
    auto r = train(cfg_, ds_.corpus, ds_.vocab.size(), ds_.impressions);
    ckpt_ = Checkpoint{cfg_, ds_.vocab, std::move(r.state)};
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  std::filesystem::path dir_;
  TrainConfig cfg_;
  Dataset ds_;
  Checkpoint ckpt_;
};

TEST_F(CheckpointFiles, SaveLoadSaveIsByteIdentical) {
  save_checkpoint(ckpt_, path("a.ckpt"));
  Checkpoint loaded = load_checkpoint(path("a.ckpt"));
  save_checkpoint(loaded, path("b.ckpt"));
  EXPECT_EQ(slurp(path("a.ckpt")), slurp(path("b.ckpt")));
  EXPECT_TRUE(same_values(loaded.state.params, ckpt_.state.params));
  EXPECT_EQ(loaded.state.epochs_done, 2u);
  EXPECT_EQ(loaded.state.adam.step, ckpt_.state.adam.step);
  EXPECT_EQ(loaded.state.rng.state(), ckpt_.state.rng.state());
  EXPECT_EQ(loaded.vocab.learned_tokens(), ckpt_.vocab.learned_tokens());
  EXPECT_EQ(slurp(path("a.ckpt")).substr(0, 5), std::string("TDNR\x01", 5));
}

TEST_F(CheckpointFiles, TruncatedBlobIsALoadError) {
  const std::string bytes = encode_checkpoint(ckpt_);
  EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, bytes.size() - 1)), LoadError);
  EXPECT_THROW(decode_checkpoint(bytes + '\0'), LoadError);
  EXPECT_THROW(decode_checkpoint(std::string_view(bytes).substr(0, 7)), LoadError);
}

TEST_F(CheckpointFiles, ConfigShapeMismatchIsALoadError) {
  std::string bytes = encode_checkpoint(ckpt_);
  const auto at = bytes.find("\nd=16\n");
  ASSERT_NE(at, std::string::npos);
  bytes.replace(at, 6, "\nd=32\n");
  EXPECT_THROW(decode_checkpoint(bytes), LoadError);
}

TEST_F(CheckpointFiles, UnknownVersionAndMagicAreRefused) {
  std::string bytes = encode_checkpoint(ckpt_);
  bytes[4] = 2;
  EXPECT_THROW(decode_checkpoint(bytes), LoadError);
  bytes = encode_checkpoint(ckpt_);
  bytes[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bytes), LoadError);
  EXPECT_THROW(load_checkpoint(path("missing.ckpt")), LoadError);
}

TEST_F(CheckpointFiles, ResumedTrainingMatchesUninterrupted) {
  Checkpoint loaded = decode_checkpoint(encode_checkpoint(ckpt_));
  auto resumed = train_epochs(loaded.state, cfg_, ds_.corpus, ds_.impressions, 2);
  auto straight = train_epochs(ckpt_.state, cfg_, ds_.corpus, ds_.impressions, 2);
  ASSERT_EQ(resumed.size(), straight.size());
  for (std::size_t i = 0; i < resumed.size(); ++i) {
    EXPECT_EQ(resumed[i].l_total, straight[i].l_total);
    EXPECT_EQ(resumed[i].epoch, 3 + i);
  }
}

}  // namespace
}  // namespace tdnr
