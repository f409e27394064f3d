#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "difftraffic/errors.hpp"
#include "difftraffic/idm.hpp"

namespace difftraffic {

struct LearningRate {
  double initial = 0.1;
  double final = 0.01;
};

/// Linear decay from `rate.initial` at step 0 to `rate.final` at step
/// total - 1.
inline double lr_schedule(std::size_t step, std::size_t total, LearningRate rate = {}) {
  if (total == 0 || step >= total) throw InvalidArgument("lr_schedule: step out of range");
  if (total == 1) return rate.initial;
  const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
  return rate.initial + (rate.final - rate.initial) * frac;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, std::span<double> values, std::span<const double> grads,
                      double lr) {
  if (values.size() != grads.size() || state.m.size() != values.size() ||
      state.v.size() != values.size()) {
    throw InvalidArgument("adam_step: shape mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NumericalFailure("adam_step: non-finite gradient", i);
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < values.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    values[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

struct Bound {
  double low;
  double high;
};

/// Box constraints on the optimized parameters, in ParamIndex order.
struct BoxConstraints {
  std::array<Bound, kOptimizedParams> bounds{{
      {5.0, 10.0},   // a_max
      {0.1, 5.0},    // a_pref
      {0.1, 5.0},    // t_pref
      {1.0, 10.0},   // s_min
      {20.0, 60.0},  // v_targ
  }};

  void validate() const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (!(bounds[i].low < bounds[i].high)) {
        throw InvalidArgument("box constraints: low >= high for parameter " + std::to_string(i));
      }
    }
  }

  bool contains(const ParamArray& values) const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (values[i] < bounds[i].low || values[i] > bounds[i].high) return false;
    }
    return true;
  }
};

inline void project(std::span<double, kOptimizedParams> values, const BoxConstraints& box) {
  for (std::size_t i = 0; i < kOptimizedParams; ++i) {
    values[i] = std::clamp(values[i], box.bounds[i].low, box.bounds[i].high);
  }
}

inline ParamArray project(ParamArray values, const BoxConstraints& box) {
  project(std::span<double, kOptimizedParams>(values), box);
  return values;
}

}  // namespace difftraffic
