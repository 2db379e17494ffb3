// Copyright 2026 The edgetrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "edgetrack/core.hpp"
#include "edgetrack/drl/dqn.hpp"
#include "edgetrack/drl/mlp.hpp"
#include "edgetrack/edge.hpp"
#include "edgetrack/error.hpp"
#include "edgetrack/format.hpp"
#include "edgetrack/rng.hpp"
#include "edgetrack/sim.hpp"
#include "edgetrack/trace.hpp"
#include "edgetrack/tracker.hpp"
