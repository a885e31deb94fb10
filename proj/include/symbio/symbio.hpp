// SPDX-License-Identifier: Apache-2.0
//
// symbio: backscatter-over-OFDM link-level simulator
// Copyright (C) 2026 The symbio authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "symbio/numerics.hpp"
#include "symbio/modulation.hpp"
#include "symbio/channel.hpp"
#include "symbio/txchain.hpp"
#include "symbio/receiver.hpp"
#include "symbio/theory.hpp"
#include "symbio/harness.hpp"
#include "symbio/scenario.hpp"
#include "symbio/report.hpp"
