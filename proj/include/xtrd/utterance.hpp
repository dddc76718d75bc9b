/* Copyright 2026 The xtrd Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <string>
#include <vector>

#include "xtrd/tensor.hpp"

namespace xtrd {

/// One utterance: either precomputed feature frames or raw 16 kHz samples,
/// plus the reference token ids (empty for unlabeled decode inputs).
struct Utterance {
  std::string id;
  Tensor<float> features;      // [frames x feature_dim] or empty
  std::vector<float> samples;  // PCM in [-1, 1] or empty
  std::vector<int> tokens;

  bool is_audio() const { return !samples.empty(); }
};

}  // namespace xtrd
