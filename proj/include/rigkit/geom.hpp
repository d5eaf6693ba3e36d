#pragma once

#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"
