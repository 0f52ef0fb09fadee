#pragma once

#include "kpaction/error.hpp"
#include "kpaction/keypoints.hpp"
#include "kpaction/keypoints_io.hpp"
#include "kpaction/neural/adam.hpp"
#include "kpaction/neural/gradient_check.hpp"
#include "kpaction/neural/layers.hpp"
#include "kpaction/neural/model.hpp"
#include "kpaction/rng.hpp"
#include "kpaction/stream.hpp"
#include "kpaction/synthgen.hpp"
#include "kpaction/train_eval/metrics.hpp"
#include "kpaction/train_eval/model_io.hpp"
#include "kpaction/train_eval/train.hpp"
