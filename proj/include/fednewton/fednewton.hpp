#pragma once

#include "fednewton/baselines.hpp"
#include "fednewton/config.hpp"
#include "fednewton/core.hpp"
#include "fednewton/datasets.hpp"
#include "fednewton/experiment.hpp"
#include "fednewton/federation.hpp"
#include "fednewton/formats.hpp"
#include "fednewton/glm.hpp"
#include "fednewton/parallel.hpp"
#include "fednewton/plot.hpp"
#include "fednewton/richardson.hpp"
#include "fednewton/rng.hpp"
#include "fednewton/runner.hpp"
#include "fednewton/spectral.hpp"
#include "fednewton/trace.hpp"
