#pragma once

// Umbrella header: the numerical core and the lab layer.

#include "promp/env_suite.hpp"
#include "promp/estimators.hpp"
#include "promp/lab/config.hpp"
#include "promp/lab/curves.hpp"
#include "promp/lab/problem.hpp"
#include "promp/lab/train.hpp"
#include "promp/lab/variance.hpp"
#include "promp/lab/verify.hpp"
#include "promp/meta_opt.hpp"
#include "promp/policies.hpp"
#include "promp/rng.hpp"
#include "promp/rollout.hpp"
#include "promp/types.hpp"
