// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "plce/csv.hpp"
#include "plce/dsp/stft.hpp"
#include "plce/dsp/wav.hpp"
#include "plce/early_exit.hpp"
#include "plce/error.hpp"
#include "plce/eval/bench.hpp"
#include "plce/eval/metrics.hpp"
#include "plce/model/config.hpp"
#include "plce/model/model.hpp"
#include "plce/model/network.hpp"
#include "plce/model/weights.hpp"
#include "plce/nn/autograd.hpp"
#include "plce/nn/init.hpp"
#include "plce/nn/layers.hpp"
#include "plce/nn/lstm.hpp"
#include "plce/nn/ops.hpp"
#include "plce/nn/tensor.hpp"
#include "plce/training/dataset.hpp"
#include "plce/training/mixing.hpp"
#include "plce/training/optim.hpp"
#include "plce/training/trainer.hpp"
