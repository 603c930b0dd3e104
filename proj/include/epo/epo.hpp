// Copyright 2026 The EPO Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPO_EPO_HPP_
#define EPO_EPO_HPP_

#include "epo/adam.hpp"
#include "epo/checkpoint.hpp"
#include "epo/config.hpp"
#include "epo/env.hpp"
#include "epo/error.hpp"
#include "epo/evo.hpp"
#include "epo/experiment.hpp"
#include "epo/hyper_search.hpp"
#include "epo/ledger.hpp"
#include "epo/nn.hpp"
#include "epo/orchestrator.hpp"
#include "epo/ppo.hpp"
#include "epo/rng.hpp"
#include "epo/text.hpp"

#endif  // EPO_EPO_HPP_
