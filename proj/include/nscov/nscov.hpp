#pragma once

#include <nscov/chain.hpp>
#include <nscov/config.hpp>
#include <nscov/covariance.hpp>
#include <nscov/dataset.hpp>
#include <nscov/errors.hpp>
#include <nscov/io.hpp>
#include <nscov/kernels.hpp>
#include <nscov/linalg.hpp>
#include <nscov/predict.hpp>
#include <nscov/random.hpp>
#include <nscov/sampler.hpp>
#include <nscov/simulate.hpp>
#include <nscov/summaries.hpp>
#include <nscov/variogram.hpp>
#include <nscov/weights.hpp>
