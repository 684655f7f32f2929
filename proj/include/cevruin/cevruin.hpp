#pragma once

#include "model.hpp"
#include "rate_function.hpp"
#include "variational.hpp"
#include "random.hpp"
#include "montecarlo.hpp"
#include "harness.hpp"
