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
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "support/property.hpp"
#include "tdnr/data/synthetic.hpp"
#include "tdnr/eval/evaluate.hpp"

namespace tdnr {
namespace {

using Scores = std::vector<double>;
using Labels = std::vector<int>;

double auc_of(const Scores& s, const Labels& l) { return *auc(s, l); }
double mrr_of(const Scores& s, const Labels& l) { return *mrr(s, l); }
double ndcg_of(const Scores& s, const Labels& l, std::size_t k) { return *ndcg_at_k(s, l, k); }

TEST(Auc, Examples) {
  EXPECT_EQ(auc_of({0.9, 0.1}, {1, 0}), 1.0);
  EXPECT_EQ(auc_of({0.4, 0.4, 0.4}, {1, 0, 1}), 0.5);
  EXPECT_EQ(auc_of({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}), 0.75);
  EXPECT_EQ(auc_of({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}), *testing::oracle_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}));
}

TEST(Auc, SingleClassIsSkipped) {
  EXPECT_FALSE(auc(Scores{0.1, 0.2}, Labels{1, 1}).has_value());
  EXPECT_FALSE(auc(Scores{0.1, 0.2}, Labels{0, 0}).has_value());
  EXPECT_THROW(auc(Scores{0.1}, Labels{1, 0}), ShapeError);
}

TEST(Mrr, Examples) {
  EXPECT_EQ(mrr_of({0.9, 0.1, 0.5}, {1, 0, 0}), 1.0);
  EXPECT_EQ(mrr_of({0.5, 0.9, 0.1}, {1, 0, 0}), 0.5);
  EXPECT_NEAR(mrr_of({0.3, 0.9, 0.5}, {1, 0, 1}), 5.0 / 12.0, 1e-15);
  EXPECT_FALSE(mrr(Scores{0.3, 0.9}, Labels{0, 0}).has_value());
}

TEST(Mrr, TiesBreakByOriginalIndex) {
  EXPECT_EQ(mrr_of({0.5, 0.5}, {0, 1}), 0.5);
  EXPECT_EQ(mrr_of({0.5, 0.5}, {1, 0}), 1.0);
}

TEST(Ndcg, Examples) {
  EXPECT_EQ(ndcg_of({0.9, 0.5, 0.1}, {1, 0, 0}, 5), 1.0);
  EXPECT_EQ(ndcg_of({0.1, 0.9, 0.8, 0.7, 0.6, 0.5}, {1, 0, 0, 0, 0, 0}, 5), 0.0);
  const Scores s{0.9, 0.8, 0.7, 0.6, 0.5};
  const Labels l{0, 1, 0, 1, 0};
  const double want = (1.0 / std::log2(3.0) + 1.0 / std::log2(5.0)) / (1.0 + 1.0 / std::log2(3.0));
  EXPECT_NEAR(ndcg_of(s, l, 5), want, 1e-15);
  EXPECT_NEAR(ndcg_of(s, l, 5), 0.65092, 1e-5);
  EXPECT_FALSE(ndcg_at_k(s, Labels{0, 0, 0, 0, 0}, 5).has_value());
}

TEST(Metrics, AgreeWithOraclesOnRandomImpressions) {
  Rng rng(testing::kMasterSeed);
  for (int i = 0; i < 1000; ++i) {
    const auto imp = testing::random_impression(rng);
    const auto a = auc(imp.scores, imp.labels);
    const auto oa = testing::oracle_auc(imp.scores, imp.labels);
    ASSERT_EQ(a.has_value(), oa.has_value());
    if (a) {
      EXPECT_LE(std::abs(*a - *oa), 1e-12);
    }
    const auto m = mrr(imp.scores, imp.labels);
    const auto om = testing::oracle_mrr(imp.scores, imp.labels);
    ASSERT_EQ(m.has_value(), om.has_value());
    if (m) {
      EXPECT_LE(std::abs(*m - *om), 1e-12);
    }
    for (std::size_t k : {5u, 10u}) {
      const auto n = ndcg_at_k(imp.scores, imp.labels, k);
      const auto on = testing::oracle_ndcg(imp.scores, imp.labels, k);
      ASSERT_EQ(n.has_value(), on.has_value());
      if (n) {
        EXPECT_LE(std::abs(*n - *on), 1e-12);
      }
    }
  }
}

ImpressionLog log_of(const std::string& id, const Labels& labels) {
  ImpressionLog imp;
  imp.impression_id = id;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    imp.candidates.push_back({"N" + std::to_string(i + 1), labels[i]});
  }
  return imp;
}

TEST(Summarize, MeanOverScoreableImpressions) {
  const std::vector<ImpressionLog> imps{log_of("1", {1, 0}), log_of("2", {1, 0}), log_of("3", {1, 1})};
  const std::vector<Scores> scores{{0.9, 0.1}, {0.3, 0.3}, {0.1, 0.2}};
  const MetricsReport r = summarize(imps, scores, "full");
  EXPECT_EQ(r.auc, 0.75);
  EXPECT_EQ(r.n_impressions, 2u);
  EXPECT_EQ(r.n_skipped, 1u);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].ranked_ids, (std::vector<std::string>{"N1", "N2"}));
}

TEST(Summarize, OneImpressionEqualsItsMetrics) {
  const Scores s{0.3, 0.9, 0.5};
  const Labels l{1, 0, 1};
  const MetricsReport r = summarize({log_of("7", l)}, {s}, "full");
  EXPECT_EQ(r.auc, auc_of(s, l));
  EXPECT_EQ(r.mrr, mrr_of(s, l));
  EXPECT_EQ(r.ndcg5, ndcg_of(s, l, 5));
  EXPECT_EQ(r.ndcg10, ndcg_of(s, l, 10));
}

TEST(Summarize, NothingScoreableIsAContractError) {
  EXPECT_THROW(summarize({log_of("1", {1, 1})}, {{0.1, 0.2}}, "full"), ContractError);
  EXPECT_THROW(summarize({log_of("1", {1, 0})}, {}, "full"), ShapeError);
}

TEST(ReportCsv, HeaderAndRow) {
  MetricsReport r;
  r.variant = "no_abs";
  r.auc = 0.5;
  r.mrr = 0.25;
  r.ndcg5 = 1.0;
  r.ndcg10 = 0.0;
  r.n_impressions = 3;
  std::ostringstream out;
  write_report_header(out);
  write_report_row(out, r);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "variant,auc,mrr,ndcg5,ndcg10,n_impressions");
  EXPECT_EQ(text.substr(text.find('\n') + 1, 7), "no_abs,");
  EXPECT_EQ(text.back(), '\n');
}

struct World {
  TrainConfig cfg;
  Dataset data;
  SyntheticCorpus corpus;
};

World world(double rate = 0.5) {
  World w;
  SyntheticConfig syn;
  syn.n_users = 8;
  syn.n_news = 40;
  syn.clickbait_rate = rate;
  syn.seed = 11;
  w.corpus = generate_synthetic_corpus(syn);
  w.cfg.d = 16;
  w.cfg.heads = 2;
  w.cfg.attn_hidden = 16;
  w.cfg.batch_size = 8;
  w.cfg.epochs = 2;
  w.cfg.lr = 1e-3;
  std::istringstream news(w.corpus.news_tsv), beh(w.corpus.behaviors_tsv);
  w.data = load_dataset(news, beh, w.cfg);
  return w;
}

TEST(Evaluate, DeterministicReports) {
  World w = world();
  auto r = train(w.cfg, w.data.corpus, w.data.vocab.size(), w.data.impressions);
  const MetricsReport a = evaluate(r.state.params, w.data.corpus, w.data.impressions);
  const MetricsReport b = evaluate(r.state.params, w.data.corpus, w.data.impressions);
  std::ostringstream sa, sb;
  write_report_row(sa, a);
  write_report_detail(sa, a);
  write_report_row(sb, b);
  write_report_detail(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (double m : {a.auc, a.mrr, a.ndcg5, a.ndcg10}) {
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
  }
  const auto threaded = score_impressions(r.state.params, w.data.corpus, w.data.impressions, 3);
  const auto single = score_impressions(r.state.params, w.data.corpus, w.data.impressions, 1);
  EXPECT_EQ(threaded, single);
}

TEST(Ablation, FullMatchesPlainTrainAndEvaluate) {
  World w = world();
  const auto ablated = run_ablation("full", w.cfg, w.data);
  const auto split = split_holdout(w.data.impressions, w.cfg.holdout);
  auto trained = train(w.cfg, w.data.corpus, w.data.vocab.size(), split.train);
  const MetricsReport plain = evaluate(trained.state.params, w.data.corpus, split.heldout);
  EXPECT_EQ(ablated.report.auc, plain.auc);
  EXPECT_EQ(ablated.report.ndcg10, plain.ndcg10);
  EXPECT_EQ(ablated.report.variant, "full");
}

TEST(Ablation, NoC2UsesRawAbstractAtFiftyTokensWithoutContrast) {
  // Published ablation: the abstract side grows from 25 generated-title
  // tokens to 50 raw abstract tokens.
  World w = world();
  EXPECT_EQ(w.cfg.max_gen_title_len, 25u);
  EXPECT_EQ(w.cfg.max_abstract_len, 50u);
  TrainConfig cfg = w.cfg;
  cfg.variant = Variant::kNoC2;
  EXPECT_EQ(cfg.effective_lambda(), 0.0);
  EXPECT_EQ(traits_of(Variant::kNoC2).fields().back(), Field::kAbstract);
  EXPECT_EQ(traits_of(Variant::kFull).fields().back(), Field::kGenTitle);
  const auto result = run_ablation("no_c2", w.cfg, w.data);
  EXPECT_EQ(result.training.stats.projection_evaluations, 0u);
  for (const auto& e : result.training.log) EXPECT_EQ(e.l_cl, 0.0);

  NewsRecord rec;
  rec.news_id = "N1";
  rec.category = "c";
  rec.title = "t";
  for (int i = 0; i < 80; ++i) rec.abstract += "w" + std::to_string(i) + " ";
  const Vocabulary vocab = build_vocabulary({rec}, 1);
  const NewsArticle art = tokenize_news(rec, vocab, cfg.field_lengths());
  EXPECT_EQ(art.abstract_tokens.size(), 50u);
  EXPECT_EQ(art.gen_title_tokens.size(), 25u);
}

TEST(Ablation, NoAbsMergesTwoFields) {
  World w = world();
  const auto result = run_ablation("no_abs", w.cfg, w.data);
  EXPECT_EQ(result.training.state.params.field_count(), 2u);
  EXPECT_EQ(result.training.state.params.candidate_merge.projection.value.rows(), w.cfg.d);
  Tape<float> tape;
  auto params = result.training.state.params;
  const auto merged = encode_candidate_news(tape, w.data.corpus.articles()[0], params);
  EXPECT_EQ(tape.value(merged.weights).cols(), 2u);
  EXPECT_EQ(result.training.stats.projection_evaluations, 0u);
}

TEST(Ablation, UnknownVariantIsAConfigError) {
  World w = world();
  EXPECT_THROW(run_ablation("no_title", w.cfg, w.data), ConfigError);
}

TEST(InspectRanking, FlagsAndWarnings) {
  World w = world();
  auto r = train(w.cfg, w.data.corpus, w.data.vocab.size(), w.data.impressions);
  const ImpressionLog& imp = w.data.impressions.front();
  const auto plain = inspect_ranking(r.state.params, w.data.corpus, imp, {});
  ASSERT_EQ(plain.size(), imp.candidates.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_EQ(plain[i].rank, i + 1);
    EXPECT_EQ(plain[i].flag, kFlagNone);
    if (i) {
      EXPECT_GE(*plain[i - 1].score, *plain[i].score);
    }
  }
  const std::map<std::string, std::string> flags{{plain[0].news_id, kFlagClicked},
                                                 {"N9999", kFlagClickbait}};
  const auto flagged = inspect_ranking(r.state.params, w.data.corpus, imp, flags);
  ASSERT_EQ(flagged.size(), plain.size() + 1);
  EXPECT_EQ(flagged[0].flag, kFlagClicked);
  EXPECT_EQ(flagged.back().rank, 0u);
  EXPECT_EQ(flagged.back().news_id, "N9999");
  EXPECT_FALSE(flagged.back().score.has_value());
  EXPECT_EQ(flagged.back().flag.rfind("warning:", 0), 0u);
  EXPECT_EQ(*mean_flagged_rank(flagged, kFlagClicked), 1.0);
  EXPECT_FALSE(mean_flagged_rank(plain, kFlagClickbait).has_value());
  std::ostringstream out;
  write_ranking(out, flagged);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "rank,news_id,score,flag");
}

TEST(InspectRanking, TiesBreakByNewsId) {
  World w = world();
  auto params = ModelParams<float>::zeros(w.cfg.dims(w.data.vocab.size()), Variant::kFull);
  ImpressionLog imp = w.data.impressions.front();
  std::swap(imp.candidates.front(), imp.candidates.back());
  const auto rows = inspect_ranking(params, w.data.corpus, imp, {});
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i - 1].news_id, rows[i].news_id);
}

}  // namespace
}  // namespace tdnr
