// Copyright 2026 The l2b Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace l2b {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceEvent {
  std::int64_t clock = 0;
  double bound = 0.0;  // global dual bound z* from this clock on
  bool operator==(const TraceEvent&) const = default;
};

// Piecewise-constant dual bound over [0, horizon]. The first event, when
// present, is at clock 0; an empty trace means z* == opt_value throughout.
struct DualTrace {
  std::vector<TraceEvent> events;
  std::int64_t horizon = 0;
  double opt_value = 0.0;

  // Appends (clock, bound). A bound at the same clock as the last event
  // replaces it. Throws TraceError on a decreasing clock or bound.
  void record(std::int64_t clock, double bound);

  bool operator==(const DualTrace&) const = default;
};

// Throws TraceError unless clocks strictly increase from 0 and bounds never
// decrease.
void check_trace(const DualTrace& trace);

// T * opt - integral of z* over [0, T], accumulated segment by segment as
// sum (opt - z*) * dt so a trace sitting at opt integrates to exactly 0.
double dual_integral(const DualTrace& trace);

// Integral of (opt - z*) over [t0, t1] clipped to [0, T].
double gap_area(const DualTrace& trace, double t0, double t1);

// Integral of z* over [t0, t1] clipped to [0, T].
double bound_area(const DualTrace& trace, double t0, double t1);

// constant - dual_integral(trace).
double cumulative_reward(const DualTrace& trace, double constant);

// Per-instance constant T * opt, which makes the cumulative reward equal to
// the integral of z* over the horizon.
inline double default_reward_constant(const DualTrace& trace) {
  return static_cast<double>(trace.horizon) * trace.opt_value;
}

}  // namespace l2b
