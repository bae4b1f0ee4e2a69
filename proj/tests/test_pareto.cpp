#include <doctest.h>

#include <expreuse/pareto.hpp>

#include "oracles.hpp"

#include <random>

using namespace expreuse;

namespace {

std::vector<std::size_t> front_of(const std::vector<oracle::Point>& pts) {
  std::vector<Objective> obj;
  for (const auto& p : pts) obj.push_back({p.cost, p.gain});
  return pareto_front(obj);
}

}  // namespace

TEST_CASE("empty and single inputs") {
  CHECK(pareto_front({}).empty());
  const Objective one[] = {{1, 1}};
  CHECK(pareto_front(one) == std::vector<std::size_t>{0});
}

TEST_CASE("equal points are all kept") {
  const Objective pts[] = {{1, 1}, {1, 1}, {2, 0}};
  CHECK(pareto_front(pts) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("NaN objectives are dropped") {
  const Objective pts[] = {{std::nan(""), 1}, {1, 1}, {0.5, std::nan("")}};
  CHECK(pareto_front(pts) == std::vector<std::size_t>{1});
}

TEST_CASE("matches the quadratic filter on random inputs") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 1 + rng() % 300;
    std::vector<oracle::Point> pts;
    // Coarse values force ties in one coordinate.
    std::uniform_int_distribution<int> coarse(0, 20);
    std::uniform_real_distribution<double> fine(0, 1);
    for (std::size_t i = 0; i < n; ++i) {
      if (round % 2)
        pts.push_back({static_cast<double>(coarse(rng)), static_cast<double>(coarse(rng))});
      else
        pts.push_back({fine(rng), fine(rng)});
    }
    CHECK(front_of(pts) == oracle::nondominated(pts));
  }
}

TEST_CASE("matches the quadratic filter on 10^4 points") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<oracle::Point> pts;
  for (int i = 0; i < 10000; ++i) {
    const double c = u(rng);
    pts.push_back({c, c + 0.05 * u(rng)});  // correlated, so the front is not tiny
  }
  CHECK(front_of(pts) == oracle::nondominated(pts));
}
