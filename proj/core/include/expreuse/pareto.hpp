#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace expreuse {

/// One candidate of a two-objective comparison: `cost` is minimised, `gain` maximised.
struct Objective {
  double cost = 0.0;
  double gain = 0.0;
};

/// a dominates b: no worse in both objectives and strictly better in one.
inline bool dominates(const Objective& a, const Objective& b) {
  return a.cost <= b.cost && a.gain >= b.gain && (a.cost < b.cost || a.gain > b.gain);
}

/// Indices of the non-dominated points, ascending. Equal points are all kept; points
/// with NaN objectives are dropped. O(n log n).
std::vector<std::size_t> pareto_front(std::span<const Objective> points);

}  // namespace expreuse
