// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sdcsi/channel.hpp"
#include "sdcsi/checkpoint.hpp"
#include "sdcsi/codec.hpp"
#include "sdcsi/conv.hpp"
#include "sdcsi/dataset.hpp"
#include "sdcsi/error.hpp"
#include "sdcsi/harness.hpp"
#include "sdcsi/layers.hpp"
#include "sdcsi/ops.hpp"
#include "sdcsi/optim.hpp"
#include "sdcsi/quantizer.hpp"
#include "sdcsi/self_info.hpp"
#include "sdcsi/tensor.hpp"
