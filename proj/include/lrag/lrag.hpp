/* Copyright 2026 The lrag Authors. All Rights Reserved.

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

#include "lrag/dataset.hpp"
#include "lrag/error.hpp"
#include "lrag/format.hpp"
#include "lrag/linalg.hpp"
#include "lrag/logit_lens.hpp"
#include "lrag/matrix.hpp"
#include "lrag/pipeline.hpp"
#include "lrag/planted.hpp"
#include "lrag/rep_retriever.hpp"
#include "lrag/retrieval.hpp"
#include "lrag/rng.hpp"
#include "lrag/synth.hpp"
#include "lrag/td_analysis.hpp"
#include "lrag/tensor_store.hpp"
#include "lrag/tokenizer.hpp"
#include "lrag/toy_lm.hpp"
