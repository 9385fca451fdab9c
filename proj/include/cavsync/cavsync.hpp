// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_CAVSYNC_HPP_
#define CAVSYNC_CAVSYNC_HPP_

#include "cavsync/alignment.hpp"
#include "cavsync/downstream/probe.hpp"
#include "cavsync/downstream/retrieval.hpp"
#include "cavsync/downstream/segmentation.hpp"
#include "cavsync/downstream/temporal.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/harness/checkpoint.hpp"
#include "cavsync/harness/config.hpp"
#include "cavsync/harness/evaluate.hpp"
#include "cavsync/harness/gradcheck.hpp"
#include "cavsync/harness/manifest.hpp"
#include "cavsync/harness/pretrain.hpp"
#include "cavsync/harness/sweep.hpp"
#include "cavsync/harness/synthetic.hpp"
#include "cavsync/model/classifier.hpp"
#include "cavsync/model/encoder.hpp"
#include "cavsync/model/layers.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/numerics/attention.hpp"
#include "cavsync/numerics/cavt.hpp"
#include "cavsync/numerics/finite_diff.hpp"
#include "cavsync/numerics/ops.hpp"
#include "cavsync/numerics/tensor.hpp"
#include "cavsync/objectives.hpp"
#include "cavsync/tokenizer.hpp"
#include "cavsync/train.hpp"

#endif  // CAVSYNC_CAVSYNC_HPP_
