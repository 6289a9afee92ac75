// Copyright 2026 The faasfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>

namespace faasfl {

// Seconds on some epoch. Every time-dependent component takes one of these.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class WallClock final : public Clock {
 public:
  double now() const override;
};

/// Manually driven clock for simulation and tests.
class SimClock final : public Clock {
 public:
  explicit SimClock(double start = 0.0) : now_(start) {}

  double now() const override { return now_.load(); }
  void set(double t) { now_.store(t); }
  void advance(double dt) {
    double cur = now_.load();
    while (!now_.compare_exchange_weak(cur, cur + dt)) {
    }
  }

 private:
  std::atomic<double> now_;
};

}  // namespace faasfl
