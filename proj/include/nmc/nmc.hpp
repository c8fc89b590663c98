#pragma once

// Umbrella header for the neural matrix completion toolkit.

#include "nmc/adam.hpp"
#include "nmc/baselines.hpp"
#include "nmc/config.hpp"
#include "nmc/error.hpp"
#include "nmc/evaluator.hpp"
#include "nmc/gradcheck.hpp"
#include "nmc/layers.hpp"
#include "nmc/model.hpp"
#include "nmc/ratings.hpp"
#include "nmc/rng.hpp"
#include "nmc/split.hpp"
#include "nmc/synth.hpp"
#include "nmc/tensor.hpp"
#include "nmc/trainer.hpp"
