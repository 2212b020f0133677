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

// Umbrella header for the whole library.

#ifndef TDNR_TDNR_HPP_
#define TDNR_TDNR_HPP_

#include "tdnr/data/batch.hpp"
#include "tdnr/data/behaviors.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/data/synthetic.hpp"
#include "tdnr/diffcore/adam.hpp"
#include "tdnr/diffcore/gradcheck.hpp"
#include "tdnr/diffcore/tape.hpp"
#include "tdnr/diffcore/tensor.hpp"
#include "tdnr/encoders.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/eval/evaluate.hpp"
#include "tdnr/eval/metrics.hpp"
#include "tdnr/objectives.hpp"
#include "tdnr/random.hpp"
#include "tdnr/training/checkpoint.hpp"
#include "tdnr/training/config.hpp"
#include "tdnr/training/trainer.hpp"

#endif  // TDNR_TDNR_HPP_
