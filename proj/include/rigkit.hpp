#pragma once

// Single include for the whole toolkit. The command-line front end lives in
// rigkit/cli.hpp and is left out so library users do not also pull in the
// argument parser.

#include "rigkit/annotate.hpp"
#include "rigkit/calib.hpp"
#include "rigkit/errors.hpp"
#include "rigkit/geom.hpp"
#include "rigkit/io.hpp"
#include "rigkit/kdtree.hpp"
#include "rigkit/mesh.hpp"
#include "rigkit/point_cloud.hpp"
#include "rigkit/primitives.hpp"
#include "rigkit/registration.hpp"
#include "rigkit/render.hpp"
#include "rigkit/rng.hpp"
#include "rigkit/session_io.hpp"
#include "rigkit/sim.hpp"
#include "rigkit/sync.hpp"
#include "rigkit/threads.hpp"
#include "rigkit/trajectory.hpp"
#include "rigkit/transform.hpp"
#include "rigkit/verify.hpp"
