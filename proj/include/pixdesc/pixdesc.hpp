#pragma once

// Umbrella header for the dense-descriptor training lab.

#include "pixdesc/augment.hpp"
#include "pixdesc/common.hpp"
#include "pixdesc/config.hpp"
#include "pixdesc/eval.hpp"
#include "pixdesc/geometry.hpp"
#include "pixdesc/losses.hpp"
#include "pixdesc/netcore.hpp"
#include "pixdesc/pipeline.hpp"
#include "pixdesc/scenegen.hpp"
#include "pixdesc/sceneio.hpp"
#include "pixdesc/tape.hpp"
#include "pixdesc/tensor.hpp"
