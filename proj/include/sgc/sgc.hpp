// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sgc/checkpoint.hpp"
#include "sgc/error.hpp"
#include "sgc/linalg.hpp"
#include "sgc/memory_model.hpp"
#include "sgc/omp.hpp"
#include "sgc/optimizer.hpp"
#include "sgc/rng.hpp"
#include "sgc/sparse_vector.hpp"
#include "sgc/sparsify.hpp"
#include "sgc/tensor.hpp"
#include "sgc/text_io.hpp"
#include "sgc/train.hpp"
