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

#include "xtrd/tensor.hpp"
#include "xtrd/bool_mask.hpp"
#include "xtrd/kernels.hpp"
#include "xtrd/autograd.hpp"
#include "xtrd/gradcheck.hpp"
#include "xtrd/params.hpp"
#include "xtrd/mask.hpp"
#include "xtrd/encoder.hpp"
#include "xtrd/frontend.hpp"
#include "xtrd/rnnt_loss.hpp"
#include "xtrd/transducer.hpp"
#include "xtrd/utterance.hpp"
#include "xtrd/model.hpp"
#include "xtrd/search.hpp"
#include "xtrd/optim.hpp"
#include "xtrd/trainer.hpp"
#include "xtrd/wav.hpp"
#include "xtrd/manifest.hpp"
#include "xtrd/synthetic.hpp"
#include "xtrd/tensor_file.hpp"
#include "xtrd/config.hpp"
#include "xtrd/checkpoint.hpp"
#include "xtrd/dataset.hpp"
#include "xtrd/eval.hpp"
