#pragma once

#include <atomic>

namespace expreuse {

/// Monotone timestamp source, in seconds.
class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual double now() const = 0;
};

/// Wall-clock seconds since the epoch, never going backwards.
class SystemClock final : public Clock {
 public:
  [[nodiscard]] double now() const override;

 private:
  mutable std::atomic<double> last_{0.0};
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(double start = 0.0) : t_(start) {}
  [[nodiscard]] double now() const override { return t_.load(); }
  void set(double t) { t_.store(t); }
  void advance(double dt) { t_.store(t_.load() + dt); }

 private:
  std::atomic<double> t_;
};

}  // namespace expreuse
