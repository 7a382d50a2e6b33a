#pragma once

#include "rmsmtc/channel.hpp"
#include "rmsmtc/params.hpp"
#include "rmsmtc/sysmodel.hpp"

namespace rmsmtc {

// Brute-force reference for subproblem 1 on tiny instances (K <= 2, N <= 2):
// exhaustive enumeration of binary subcarrier ownership together with
// geometric per-subcarrier power grids. Returns the best feasible transmit
// energy for the fixed split/slots/transmissive vector in `fixed`, or +inf.
// Deliberately built on the direct rate formulas only, independent of the
// conic solver path it cross-checks.
double oracle_p2_grid(const SystemParams& params, const ChannelSet& ch,
                      const Allocation& fixed, int grid_levels);

}  // namespace rmsmtc
