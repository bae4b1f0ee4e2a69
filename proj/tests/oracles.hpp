#pragma once

// Reference computations written from the domain definitions alone. None of these
// call into the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr long double kPi = 3.141592653589793238462643383279502884L;

/// u^2 / (2 (F_B + m g (sin th + mu cos th))) with u = v / 3.6, long double throughout.
inline double stop_distance(double m, double fb, double v_kmh, double mu, double theta_deg) {
  const long double u = static_cast<long double>(v_kmh) / 3.6L;
  if (u == 0.0L) return 0.0;
  const long double th = static_cast<long double>(theta_deg) * kPi / 180.0L;
  const long double a = fb + m * 9.81L * (std::sin(th) + mu * std::cos(th));
  if (a <= 0.0L) return kInf;
  return static_cast<double>(u * u / (2.0L * a));
}

/// Time to rest u / a; infinity when the train never stops.
inline double stop_time(double m, double fb, double v_kmh, double mu, double theta_deg) {
  const long double u = static_cast<long double>(v_kmh) / 3.6L;
  if (u == 0.0L) return 0.0;
  const long double th = static_cast<long double>(theta_deg) * kPi / 180.0L;
  const long double a = fb + m * 9.81L * (std::sin(th) + mu * std::cos(th));
  if (a <= 0.0L) return kInf;
  return static_cast<double>(u / a);
}

/// Simulations stop at 600 s; a train still moving then counts as never stopping.
inline constexpr double kTimeCap = 600.0;

inline bool safe(double m, double fb, double v, double mu, double theta, double dist) {
  return stop_time(m, fb, v, mu, theta) <= kTimeCap && stop_distance(m, fb, v, mu, theta) < dist;
}

struct Situation {
  double v, mu, theta, dist;
};

/// A train is fit for sale when it is safe in every situation considered.
inline bool sale_verdict(double m, double fb, const std::vector<Situation>& situations) {
  for (const auto& s : situations)
    if (!safe(m, fb, s.v, s.mu, s.theta, s.dist)) return false;
  return true;
}

struct BatteryRun {
  double min_soc = 100.0;
  double final_soc = 100.0;
  double tbl = 0.0;
};

/// Surrogate battery over the 1800 s sine cycle at 1 s.
inline BatteryRun battery(double V, double T, double R) {
  const long double C = 3.6e8L;
  long double E = 0.0L;
  long double losses = 0.0L;
  BatteryRun r;
  for (int k = 0; k < 1800; ++k) {
    const long double P = 50000.0L + 30000.0L * std::sin(2.0L * kPi * k / 300.0L);
    const long double I = P / V;
    const long double overload = P / 100.0L - T;
    const long double loss = I * I * R + 2.0L * (overload > 0 ? overload : 0.0L) * 100.0L;
    E += (P + loss);
    losses += loss;
    const double soc = static_cast<double>(100.0L * (1.0L - E / C));
    r.min_soc = std::min(r.min_soc, soc);
    r.final_soc = soc;
  }
  r.tbl = static_cast<double>(losses);
  return r;
}

struct Point {
  double cost;  // minimised
  double gain;  // maximised
};

/// O(n^2) non-dominated filter; indices ascending.
inline std::vector<std::size_t> nondominated(const std::vector<Point>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::isnan(pts[i].cost) || std::isnan(pts[i].gain)) continue;
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (i == j || std::isnan(pts[j].cost) || std::isnan(pts[j].gain)) continue;
      dominated = pts[j].cost <= pts[i].cost && pts[j].gain >= pts[i].gain &&
                  (pts[j].cost < pts[i].cost || pts[j].gain > pts[i].gain);
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

/// Lattice min + n step below (or up to) max, counted by brute enumeration.
inline std::size_t lattice_count(double min, double max, double step, bool include_max) {
  std::size_t n = 0;
  for (std::size_t k = 0;; ++k) {
    const double x = min + static_cast<double>(k) * step;
    const bool in = include_max ? x <= max + 1e-9 : x < max - 1e-9;
    if (!in) break;
    ++n;
  }
  return n;
}

}  // namespace oracle
