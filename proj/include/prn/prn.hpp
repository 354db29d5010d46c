#pragma once

// Umbrella header for the whole library.

#include "prn/ablation.hpp"
#include "prn/activation.hpp"
#include "prn/checkpoint.hpp"
#include "prn/conv.hpp"
#include "prn/error.hpp"
#include "prn/eval.hpp"
#include "prn/image.hpp"
#include "prn/image_io.hpp"
#include "prn/inference.hpp"
#include "prn/init.hpp"
#include "prn/instrument.hpp"
#include "prn/metrics.hpp"
#include "prn/model.hpp"
#include "prn/patches.hpp"
#include "prn/prior.hpp"
#include "prn/resize.hpp"
#include "prn/synthetic.hpp"
#include "prn/tensor.hpp"
#include "prn/training.hpp"
