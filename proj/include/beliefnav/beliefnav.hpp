#pragma once

#include "beliefnav/gaussian.hpp"
#include "beliefnav/quadform.hpp"
#include "beliefnav/collision.hpp"
#include "beliefnav/baselines.hpp"
#include "beliefnav/belief_filter.hpp"
#include "beliefnav/roadmap.hpp"
#include "beliefnav/beacon_world.hpp"
#include "beliefnav/laser_grasp.hpp"
#include "beliefnav/config.hpp"
#include "beliefnav/scenario.hpp"
#include "beliefnav/csv.hpp"
