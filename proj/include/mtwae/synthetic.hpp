#pragma once

#include <vector>

#include "mtwae/topology.hpp"

namespace mtwae {

/// Normalized two-branch BDTs whose branches travel along circles in the
/// birth-death plane as the angle sweeps [0, 2pi). The second branch runs
/// at twice the angular speed of the first.
std::vector<BDT> circle_ensemble(int n);

}  // namespace mtwae
