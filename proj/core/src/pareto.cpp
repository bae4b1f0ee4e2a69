#include <expreuse/pareto.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace expreuse {

std::vector<std::size_t> pareto_front(std::span<const Objective> points) {
  std::vector<std::size_t> order;
  order.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!std::isnan(points[i].cost) && !std::isnan(points[i].gain)) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return points[a].gain > points[b].gain;
  });

  std::vector<std::size_t> front;
  double best = -std::numeric_limits<double>::infinity();  // best gain at strictly lower cost
  bool any = false;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const double cost = points[order[i]].cost;
    while (j < order.size() && points[order[j]].cost == cost) ++j;
    const double top = points[order[i]].gain;  // group is sorted by gain, descending
    if (!any || top > best) {
      for (std::size_t k = i; k < j && points[order[k]].gain == top; ++k) front.push_back(order[k]);
    }
    if (!any || top > best) best = top;
    any = true;
    i = j;
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace expreuse
