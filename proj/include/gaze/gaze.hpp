#pragma once

// Umbrella header for the gaze-direction pipeline library.

#include "gaze/cascade.hpp"
#include "gaze/composer.hpp"
#include "gaze/dataset.hpp"
#include "gaze/error.hpp"
#include "gaze/evaluate.hpp"
#include "gaze/image.hpp"
#include "gaze/integral.hpp"
#include "gaze/io.hpp"
#include "gaze/net.hpp"
#include "gaze/pnm.hpp"
#include "gaze/rng.hpp"
#include "gaze/session.hpp"
#include "gaze/synth.hpp"
#include "gaze/tensor.hpp"
#include "gaze/train.hpp"
