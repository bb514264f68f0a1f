#pragma once

// Intelligent Driver Model car-following law.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "avsim/error.hpp"

namespace avsim {

struct IdmParams {
  double v0 = 30.0;    ///< desired speed, m/s
  double T = 1.5;      ///< desired time headway, s
  double s0 = 2.0;     ///< jam distance, m
  double a_max = 1.5;  ///< maximum acceleration, m/s^2
  double b = 2.0;      ///< comfortable deceleration, m/s^2 (positive)
  double delta = 4.0;  ///< acceleration exponent

  void validate() const {
    if (!(v0 > 0.0 && T > 0.0 && s0 > 0.0 && a_max > 0.0 && b > 0.0))
      throw ValidationError("IDM parameters must be strictly positive");
    if (!(delta >= 1.0)) throw ValidationError("IDM exponent must be >= 1");
  }

  friend bool operator==(const IdmParams&, const IdmParams&) = default;
};

/// Dynamic desired gap s*(v, dv).
inline double idm_desired_gap(double v, double dv, const IdmParams& p) {
  return p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b)));
}

/// IDM acceleration. `gap` is the bumper-to-bumper distance to the leader
/// (nullopt on a free road); `dv` is the approach rate v - v_leader.
inline double idm_acceleration(double v, std::optional<double> gap, double dv, const IdmParams& p) {
  const double free_term = 1.0 - std::pow(v / p.v0, p.delta);
  if (!gap) return p.a_max * free_term;
  if (!(*gap > 0.0))
    throw DegenerateGapError("non-positive gap " + std::to_string(*gap) + " m");
  const double ratio = idm_desired_gap(v, dv, p) / *gap;
  return p.a_max * (free_term - ratio * ratio);
}

/// Steady-state gap at which a follower at speed v (0 <= v < v0) behind an
/// equally fast leader has zero acceleration.
inline double idm_equilibrium_gap(double v, const IdmParams& p) {
  return idm_desired_gap(v, 0.0, p) / std::sqrt(1.0 - std::pow(v / p.v0, p.delta));
}

}  // namespace avsim
