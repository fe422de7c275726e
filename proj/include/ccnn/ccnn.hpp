// Copyright 2026 The ccnn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ccnn/analysis.hpp"
#include "ccnn/backbone.hpp"
#include "ccnn/box.hpp"
#include "ccnn/checkpoint.hpp"
#include "ccnn/config.hpp"
#include "ccnn/dataset.hpp"
#include "ccnn/errors.hpp"
#include "ccnn/gradcheck.hpp"
#include "ccnn/image_io.hpp"
#include "ccnn/lstm.hpp"
#include "ccnn/model.hpp"
#include "ccnn/ops.hpp"
#include "ccnn/optim.hpp"
#include "ccnn/parallel.hpp"
#include "ccnn/proposals.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/roi_pool.hpp"
#include "ccnn/scene.hpp"
#include "ccnn/tensor.hpp"
#include "ccnn/trainer.hpp"
