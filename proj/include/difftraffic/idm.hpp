#pragma once

// Intelligent Driver Model acceleration kernel with softplus lower bounds on
// the desired spacing and on the acceleration, and its analytic partials.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "difftraffic/errors.hpp"

namespace difftraffic {

/// Smallest bumper-to-bumper gap the kernel divides by.
inline constexpr double kMinGap = 0.1;

struct IdmParams {
  double a_max = 10.0;   // maximum acceleration (m/s^2)
  double a_pref = 2.0;   // comfortable deceleration (m/s^2)
  double s_min = 5.0;    // jam distance (m)
  double t_pref = 1.0;   // desired time headway (s)
  double v_targ = 50.0;  // desired speed (m/s)
  double delta = 4.0;    // free-road exponent, not optimized
  double a_min = -10.0;  // deceleration floor, not optimized

  bool valid() const {
    return a_max > 0 && a_pref > 0 && s_min > 0 && t_pref > 0 && v_targ > 0 &&
           a_min < 0 && std::isfinite(delta);
  }
};

struct IdmInput {
  double v = 0.0;   // speed (m/s)
  double dp = 0.0;  // gap to leader (m)
  double dv = 0.0;  // own speed minus leader speed (m/s)
  double dt = 0.1;  // step (s)
};

/// Partials of the bounded acceleration with respect to inputs and the five
/// optimized parameters.
struct IdmGradient {
  double d_v = 0.0;
  double d_dp = 0.0;
  double d_dv = 0.0;
  double d_amax = 0.0;
  double d_apref = 0.0;
  double d_smin = 0.0;
  double d_tpref = 0.0;
  double d_vtarg = 0.0;
};

/// Packed order of the optimized parameters wherever they appear as a flat
/// array (gradients, bounds, CSV columns).
enum ParamIndex : std::size_t { kAMax = 0, kAPref, kTPref, kSMin, kVTarg };
inline constexpr std::size_t kOptimizedParams = 5;
using ParamArray = std::array<double, kOptimizedParams>;

inline ParamArray to_array(const IdmParams& p) {
  return {p.a_max, p.a_pref, p.t_pref, p.s_min, p.v_targ};
}

/// Overwrites the optimized fields; delta and a_min are kept from `base`.
inline IdmParams from_array(const ParamArray& a, IdmParams base = {}) {
  base.a_max = a[kAMax];
  base.a_pref = a[kAPref];
  base.t_pref = a[kTPref];
  base.s_min = a[kSMin];
  base.v_targ = a[kVTarg];
  return base;
}

inline ParamArray to_array(const IdmGradient& g) {
  return {g.d_amax, g.d_apref, g.d_tpref, g.d_smin, g.d_vtarg};
}

/// log(1 + exp(x)) without overflow in either tail.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Raw desired spacing; can be negative when closing speed is large and
/// negative.
inline double optimal_spacing(const IdmParams& p, double v, double dv) {
  return p.s_min + v * p.t_pref + v * dv / (2.0 * std::sqrt(p.a_max * p.a_pref));
}

namespace detail {

inline void check_input(const IdmParams& p, const IdmInput& in) {
  if (!std::isfinite(in.v) || !std::isfinite(in.dp) || !std::isfinite(in.dv) ||
      !std::isfinite(in.dt)) {
    throw InvalidArgument("idm: non-finite input");
  }
  if (!std::isfinite(p.a_max) || !std::isfinite(p.a_pref) ||
      !std::isfinite(p.s_min) || !std::isfinite(p.t_pref) ||
      !std::isfinite(p.v_targ) || !std::isfinite(p.a_min)) {
    throw InvalidArgument("idm: non-finite parameter");
  }
  if (in.v < 0.0) throw InvalidArgument("idm: negative speed " + std::to_string(in.v));
  if (in.dt <= 0.0) throw InvalidArgument("idm: non-positive time step");
}

// Tie goes to the a_min branch.
inline bool speed_floor_active(const IdmParams& p, const IdmInput& in) {
  return -in.v / in.dt > p.a_min;
}

}  // namespace detail

inline double idm_acceleration(const IdmParams& p, const IdmInput& in) {
  detail::check_input(p, in);
  const double gap = std::max(in.dp, kMinGap);
  const double spacing = softplus(optimal_spacing(p, in.v, in.dv));
  const double ratio = spacing / gap;
  const double a_raw =
      p.a_max * (1.0 - std::pow(in.v / p.v_targ, p.delta) - ratio * ratio);
  const double a_lb = detail::speed_floor_active(p, in) ? -in.v / in.dt : p.a_min;
  return a_lb + softplus(a_raw - a_lb);
}

/// Same value as idm_acceleration, plus every partial by the chain rule.
inline double idm_acceleration_grad(const IdmParams& p, const IdmInput& in,
                                    IdmGradient& grad) {
  detail::check_input(p, in);
  const bool gap_clamped = in.dp < kMinGap;
  const double gap = gap_clamped ? kMinGap : in.dp;

  const double root = std::sqrt(p.a_max * p.a_pref);
  const double s_opt = optimal_spacing(p, in.v, in.dv);
  const double spacing = softplus(s_opt);
  const double d_spacing = sigmoid(s_opt);
  const double ratio = spacing / gap;

  const double speed_ratio = in.v / p.v_targ;
  const double free_term = std::pow(speed_ratio, p.delta);
  const double a_raw = p.a_max * (1.0 - free_term - ratio * ratio);

  const bool floor_active = detail::speed_floor_active(p, in);
  const double a_lb = floor_active ? -in.v / in.dt : p.a_min;
  const double out = a_lb + softplus(a_raw - a_lb);
  const double w_raw = sigmoid(a_raw - a_lb);
  const double w_lb = 1.0 - w_raw;

  // d a_raw / d s_opt
  const double draw_ds = -2.0 * p.a_max * ratio * d_spacing / gap;
  // d free_term / dv and / dv_targ; pow(0, delta - 1) is finite for delta >= 1.
  const double dfree_dv =
      in.v > 0.0 ? p.delta * free_term / in.v
                 : p.delta * std::pow(0.0, p.delta - 1.0) / p.v_targ;
  const double dfree_dvtarg = -p.delta * free_term / p.v_targ;

  const double ds_dv = p.t_pref + in.dv / (2.0 * root);
  const double ds_ddv = in.v / (2.0 * root);
  const double vdv = in.v * in.dv;
  const double ds_damax = -vdv / (4.0 * p.a_max * root);
  const double ds_dapref = -vdv / (4.0 * p.a_pref * root);

  const double draw_dv = -p.a_max * dfree_dv + draw_ds * ds_dv;
  const double dlb_dv = floor_active ? -1.0 / in.dt : 0.0;

  grad.d_v = w_raw * draw_dv + w_lb * dlb_dv;
  grad.d_dp =
      gap_clamped ? 0.0 : w_raw * (2.0 * p.a_max * ratio * ratio / gap);
  grad.d_dv = w_raw * draw_ds * ds_ddv;
  grad.d_amax = w_raw * ((1.0 - free_term - ratio * ratio) + draw_ds * ds_damax);
  grad.d_apref = w_raw * draw_ds * ds_dapref;
  grad.d_smin = w_raw * draw_ds;
  grad.d_tpref = w_raw * draw_ds * in.v;
  grad.d_vtarg = w_raw * (-p.a_max * dfree_dvtarg);
  return out;
}

}  // namespace difftraffic
