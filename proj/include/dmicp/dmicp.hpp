// Umbrella header.
#pragma once

#include "dmicp/cloud.hpp"
#include "dmicp/core.hpp"
#include "dmicp/degeneracy.hpp"
#include "dmicp/experiment.hpp"
#include "dmicp/icp.hpp"
#include "dmicp/kdtree.hpp"
#include "dmicp/linalg.hpp"
#include "dmicp/linearize.hpp"
#include "dmicp/matching.hpp"
#include "dmicp/metrics.hpp"
#include "dmicp/mitigation.hpp"
#include "dmicp/ply_io.hpp"
#include "dmicp/point_cloud.hpp"
#include "dmicp/qp.hpp"
#include "dmicp/rng.hpp"
#include "dmicp/serialize.hpp"
#include "dmicp/simulation.hpp"
