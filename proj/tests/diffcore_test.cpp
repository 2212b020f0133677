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
#include <vector>

#include "support/fixtures.hpp"
#include "support/gradient_suite.hpp"
#include "support/property.hpp"
#include "tdnr/diffcore/adam.hpp"
#include "tdnr/diffcore/gradcheck.hpp"
#include "tdnr/diffcore/tape.hpp"

namespace tdnr {
namespace {

using Tf = Tensor<float>;

Tf row(std::vector<float> v) { return Tf::row(std::move(v)); }

// Copies a value off the tape; later recordings may move tape storage.
Tf value_of(Tape<float>& tape, Var v) { return tape.value(v); }

TEST(Tensor, ShapeAndIndexing) {
  Tf t = Tf::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0f);
  EXPECT_EQ(Tf::identity(2), Tf::matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_THROW(Tf::matrix(2, 2, {1, 2, 3}), ShapeError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape<float> tape;
  const Tf a = Tf::matrix(2, 2, {0.5f, -1.0f, 2.0f, 3.0f});
  EXPECT_EQ(value_of(tape, tape.matmul(tape.constant(Tf::identity(2)), tape.constant(a))), a);
}

TEST(Matmul, SmallProductMatchesHandValue) {
  Tape<float> tape;
  const Tf c = value_of(tape, tape.matmul(tape.constant(Tf::matrix(2, 2, {1, 2, 3, 4})),
                                          tape.constant(Tf::matrix(2, 1, {5, 6}))));
  EXPECT_EQ(c, Tf::matrix(2, 1, {17, 39}));
}

TEST(Matmul, ZerosGiveZeros) {
  Tape<float> tape;
  const Tf c = value_of(tape, tape.matmul(tape.constant(Tf::matrix(2, 2, {1, 2, 3, 4})),
                                          tape.constant(Tf::zeros(2, 3))));
  EXPECT_EQ(c, Tf::zeros(2, 3));
}

TEST(Matmul, MismatchNamesBothShapes) {
  Tape<float> tape;
  try {
    tape.matmul(tape.constant(Tf::zeros(2, 3)), tape.constant(Tf::zeros(2, 3)));
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2x3"), std::string::npos) << what;
  }
}

TEST(SoftmaxMasked, UniformOnEqualScores) {
  Tape<float> tape;
  const Mask all{1, 1, 1};
  const Tf y = value_of(tape, tape.softmax_masked(tape.constant(row({0, 0, 0})), all));
  for (float v : y.values()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-7f);
}

TEST(SoftmaxMasked, LogTwoAgainstZero) {
  Tape<float> tape;
  const Mask all{1, 1};
  const Tf y = value_of(tape, tape.softmax_masked(tape.constant(row({std::log(2.0f), 0})), all));
  EXPECT_NEAR(y[0], 2.0f / 3.0f, 1e-7f);
  EXPECT_NEAR(y[1], 1.0f / 3.0f, 1e-7f);
}

TEST(SoftmaxMasked, SingleUnmaskedEntryTakesAllMass) {
  Tape<float> tape;
  const Mask m{1, 0};
  const Tf y = value_of(tape, tape.softmax_masked(tape.constant(row({5, 9})), m));
  EXPECT_EQ(y[0], 1.0f);
  EXPECT_EQ(y[1], 0.0f);
}

TEST(SoftmaxMasked, FullyMaskedRowIsDegenerate) {
  Tape<float> tape;
  const Mask none{0, 0};
  EXPECT_THROW(tape.softmax_masked(tape.constant(row({1, 2})), none), DegenerateError);
}

TEST(Elementwise, Examples) {
  Tape<float> tape;
  EXPECT_EQ(value_of(tape, tape.tanh(tape.constant(Tf::scalar(0)))).item(), 0.0f);
  EXPECT_NEAR(value_of(tape, tape.log(tape.exp(tape.constant(Tf::scalar(1.5f))))).item(), 1.5f, 1e-6f);
  EXPECT_EQ(value_of(tape, tape.add(tape.constant(row({1, 2})), tape.constant(row({3, 4})))), row({4, 6}));
  EXPECT_EQ(value_of(tape, tape.mul(tape.constant(row({1, 2})), tape.constant(row({3, 4})))), row({3, 8}));
  EXPECT_EQ(value_of(tape, tape.scale(tape.constant(row({1, -2})), 3.0f)), row({3, -6}));
  EXPECT_THROW(tape.log(tape.constant(row({1, 0}))), DomainError);
  EXPECT_THROW(tape.log(tape.constant(row({-1}))), DomainError);
}

TEST(ConcatLast, Examples) {
  Tape<float> tape;
  const Var a = tape.constant(row({1, 2}));
  EXPECT_EQ(value_of(tape, tape.concat_last({a})), row({1, 2}));
  EXPECT_EQ(value_of(tape, tape.concat_last({a, tape.constant(row({3}))})), row({1, 2, 3}));
  EXPECT_THROW(tape.concat_last({tape.constant(Tf::zeros(2, 3)), tape.constant(Tf::zeros(3, 3))}),
               ShapeError);
}

TEST(L2Normalize, Examples) {
  Tape<float> tape;
  const Tf y = value_of(tape, tape.l2_normalize(tape.constant(row({3, 4}))));
  EXPECT_NEAR(y[0], 0.6f, 1e-7f);
  EXPECT_NEAR(y[1], 0.8f, 1e-7f);
  const Tf unit = row({0.6f, 0.8f});
  const Tf again = value_of(tape, tape.l2_normalize(tape.constant(unit)));
  EXPECT_NEAR(again[0], unit[0], 1e-7f);
  EXPECT_NEAR(again[1], unit[1], 1e-7f);
  EXPECT_THROW(tape.l2_normalize(tape.constant(row({0, 0}))), DegenerateError);
}

TEST(MeanPool, Examples) {
  Tape<float> tape;
  const Var rows = tape.constant(Tf::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(value_of(tape, tape.mean_pool(rows, Mask{1, 1})), row({2, 3}));
  EXPECT_EQ(value_of(tape, tape.mean_pool(rows, Mask{0, 1})), row({3, 4}));
  EXPECT_EQ(value_of(tape, tape.mean_pool(rows, Mask{0, 0})), row({0, 0}));
}

TEST(Backward, SumOfSquares) {
  Parameter<float> x("x", row({1, 2, 3}));
  Tape<float> tape;
  const Var v = tape.parameter(x);
  tape.backward(tape.sum(tape.mul(v, v)));
  EXPECT_EQ(x.grad, row({2, 4, 6}));
}

TEST(Backward, ConstantLossGivesZeroGradients) {
  Parameter<float> x("x", row({1, 2, 3}));
  Tape<float> tape;
  tape.parameter(x);
  tape.backward(tape.constant(Tf::scalar(4)));
  EXPECT_EQ(x.grad, Tf::zeros(1, 3));
}

TEST(Backward, NonScalarLossIsRejected) {
  Parameter<float> x("x", row({1, 2}));
  Tape<float> tape;
  EXPECT_THROW(tape.backward(tape.parameter(x)), ContractError);
}

TEST(Backward, GradientsAccumulateAcrossUses) {
  Parameter<float> x("x", row({2}));
  Tape<float> tape;
  const Var v = tape.parameter(x);
  tape.backward(tape.add(tape.mul(v, v), tape.scale(v, 3.0f)));
  EXPECT_EQ(x.grad, row({7}));
}

TEST(FiniteDifference, QuadraticIsExact) {
  const auto report = finite_difference_check<double>(
      [](Tape<double>& t, Var x) { return t.sum(t.mul(x, x)); }, Tensor<double>::scalar(3.0), 1e-3);
  EXPECT_LE(report.max_relative_error, 1e-5);
  EXPECT_EQ(report.coordinates, 1u);
}

TEST(FiniteDifference, FocalSoftmaxOnFiveVector) {
  Rng rng(11);
  const Tensor<double> x = testing::random_tensor<double>(rng, 1, 5, -2.0, 2.0);
  const auto report = finite_difference_check<double>(
      [](Tape<double>& t, Var s) { return recommendation_loss(t, s, LossConfig{}); }, x, 1e-3);
  EXPECT_LE(report.max_relative_error, 1e-3);
}

TEST(FiniteDifference, FullModelOnOneNewsBatch) {
  // One sample built from a single article in every role.
  Rng rng(12);
  testing::TinyWorld world = testing::tiny_world(rng, 1, 6);
  TrainConfig cfg;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.attn_hidden = 4;
  cfg.loss.negative_ratio = 1;
  ModelParams<float> params = init_params<float>(cfg, world.vocab.size(), 5);
  testing::randomize(params, rng, 0.8);
  const std::vector<TrainingSample> samples{{{0}, 0, {0}}};
  const auto fields = traits_of(cfg.variant).fields();
  const Batch batch = assemble_batch(samples, world.corpus, fields);
  ASSERT_EQ(batch.pool.size(), 1u);
  std::vector<Parameter<float>*> list = params.parameters();
  const auto report = finite_difference_check<float>(
      [&](Tape<float>& t) {
        return forward_batch(t, params, batch, cfg.loss, cfg.loss.lambda1, ContrastPool::kBatch).total;
      },
      std::span<Parameter<float>* const>(list), 1e-3);
  EXPECT_LE(report.norm_relative_error, 1e-2);
}

TEST(Adam, ZeroGradientFreshStateLeavesParameters) {
  Parameter<float> p("w", row({1, -2}));
  Parameter<float>* list[] = {&p};
  AdamState<float> state;
  adam_step(std::span<Parameter<float>* const>(list), state, AdamOptions{0.1});
  EXPECT_EQ(p.value, row({1, -2}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter<float> p("w", Tf::scalar(1.0f));
  p.grad = Tf::scalar(1.0f);
  Parameter<float>* list[] = {&p};
  AdamState<float> state;
  adam_step(std::span<Parameter<float>* const>(list), state, AdamOptions{0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(1.0 - p.value.item(), 0.1, 1e-6);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  Parameter<float> p("w", row({1, 2}));
  p.grad = row({5, -5});
  Parameter<float>* list[] = {&p};
  AdamState<float> state;
  adam_step(std::span<Parameter<float>* const>(list), state, AdamOptions{0.0});
  EXPECT_EQ(p.value, row({1, 2}));
}

TEST(Adam, ShapeMismatchIsRejected) {
  Parameter<float> p("w", row({1, 2}));
  p.grad = row({1});
  Parameter<float>* list[] = {&p};
  AdamState<float> state;
  EXPECT_THROW(adam_step(std::span<Parameter<float>* const>(list), state, AdamOptions{}), ShapeError);
}

TEST(GradientSuite, ComponentsAndFullModel) {
  for (const auto& r : testing::gradient_suite(testing::kMasterSeed)) {
    EXPECT_TRUE(r.passed()) << testing::describe(r);
  }
}

}  // namespace
}  // namespace tdnr
