// Copyright 2026 The mboe Authors.
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

#include "mboe/boe_model.hpp"
#include "mboe/documents.hpp"
#include "mboe/embedding_store.hpp"
#include "mboe/encoder.hpp"
#include "mboe/entity_detection.hpp"
#include "mboe/eval_analysis.hpp"
#include "mboe/kb_dictionary.hpp"
#include "mboe/metrics.hpp"
#include "mboe/pipeline.hpp"
#include "mboe/trainer.hpp"

namespace mboe {
inline constexpr std::string_view kVersion = "0.1.0";
}  // namespace mboe
