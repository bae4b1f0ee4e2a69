#include <expreuse/clock.hpp>

#include <chrono>

namespace expreuse {

double SystemClock::now() const {
  using namespace std::chrono;
  const double t = duration<double>(system_clock::now().time_since_epoch()).count();
  double prev = last_.load();
  while (t > prev && !last_.compare_exchange_weak(prev, t)) {
  }
  return t > prev ? t : prev;
}

}  // namespace expreuse
