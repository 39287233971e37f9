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

#include "l2b/trace.hpp"

#include <algorithm>
#include <string>

namespace l2b {

void DualTrace::record(std::int64_t clock, double bound) {
  if (!events.empty()) {
    const TraceEvent& last = events.back();
    if (clock < last.clock) {
      throw TraceError("trace clock went backwards: " + std::to_string(clock) + " < " + std::to_string(last.clock));
    }
    if (bound < last.bound) {
      throw TraceError("dual bound decreased at clock " + std::to_string(clock));
    }
    if (clock == last.clock) {
      events.back().bound = bound;
      return;
    }
  } else if (clock != 0) {
    throw TraceError("first trace event must be at clock 0");
  }
  events.push_back({clock, bound});
}

void check_trace(const DualTrace& trace) {
  if (trace.horizon < 0) throw TraceError("negative trace horizon");
  for (std::size_t k = 0; k < trace.events.size(); ++k) {
    if (k == 0) {
      if (trace.events[0].clock != 0) throw TraceError("first trace event must be at clock 0");
      continue;
    }
    if (trace.events[k].clock <= trace.events[k - 1].clock) {
      throw TraceError("trace clocks not strictly increasing at event " + std::to_string(k));
    }
    if (trace.events[k].bound < trace.events[k - 1].bound) {
      throw TraceError("trace dual bound decreases at event " + std::to_string(k));
    }
  }
}

namespace {

template <typename F>
double integrate(const DualTrace& trace, double t0, double t1, F&& integrand) {
  const double horizon = static_cast<double>(trace.horizon);
  t0 = std::max(t0, 0.0);
  t1 = std::min(t1, horizon);
  if (t1 <= t0) return 0.0;
  double area = 0.0;
  const auto& ev = trace.events;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    const double a = std::max(static_cast<double>(ev[k].clock), t0);
    const double b = std::min(k + 1 < ev.size() ? static_cast<double>(ev[k + 1].clock) : horizon, t1);
    if (b > a) area += integrand(ev[k].bound) * (b - a);
  }
  return area;
}

}  // namespace

double gap_area(const DualTrace& trace, double t0, double t1) {
  const double opt = trace.opt_value;
  return integrate(trace, t0, t1, [opt](double z) { return opt - z; });
}

double bound_area(const DualTrace& trace, double t0, double t1) {
  if (trace.events.empty()) {
    const double a = std::max(t0, 0.0), b = std::min(t1, static_cast<double>(trace.horizon));
    return b > a ? trace.opt_value * (b - a) : 0.0;
  }
  return integrate(trace, t0, t1, [](double z) { return z; });
}

double dual_integral(const DualTrace& trace) {
  check_trace(trace);
  return gap_area(trace, 0.0, static_cast<double>(trace.horizon));
}

double cumulative_reward(const DualTrace& trace, double constant) { return constant - dual_integral(trace); }

}  // namespace l2b
