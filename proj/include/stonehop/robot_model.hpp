#pragma once

#include <string>

#include "stonehop/types.hpp"

namespace stonehop {

// Planar sagittal model of a quadruped: a trunk plus one lumped front leg and one
// lumped rear leg (left/right pairs merged, so link masses and torque limits are
// doubled). Loaded from a versioned key = value parameter file; unknown or missing
// keys are rejected.
struct RobotModel {
  // Table-level parameters.
  double total_mass = 12.0;      // m, whole robot [kg]
  double tau_max = 67.0;         // per lumped joint, 2 x 33.5 [N m]
  double qd_max = 21.0;          // joint velocity limit [rad/s]
  double trunk_length = 0.361;   // l, hip-to-hip [m]
  double trunk_inertia = 0.056;  // I_yy about trunk COM [kg m^2]
  double l1 = 0.2;               // thigh length [m]
  double l2 = 0.2;               // shank length [m]
  double foot_spacing = 0.361;   // d, front-to-rear foot pin spacing [m]
  double gravity = 9.81;

  // Link-level mass distribution (lumped left+right pairs).
  double m_trunk = 8.0;
  double m_thigh = 1.4;
  double m_shank = 0.6;
  double I_thigh = 0.0047;
  double I_shank = 0.002;
  Vec2 c_trunk = Vec2(0.0, 0.08);  // trunk COM in trunk frame
  double c_thigh = 0.1;            // COM distance from hip along thigh
  double c_shank = 0.1;            // COM distance from knee along shank

  // Joint limits, ordered [front hip, front knee, rear hip, rear knee].
  Vec4 qj_min = Vec4(-1.6, -2.6, -1.6, -2.6);
  Vec4 qj_max = Vec4(1.6, -0.1, 1.6, -0.1);

  // Joint friction (viscous + smoothed Coulomb); zero by default.
  double b_viscous = 0.0;
  double b_coulomb = 0.0;

  // Payload rigidly attached to the trunk (simulation-side disturbances). Adds to
  // trunk mass and trunk inertia; zero in the controller-side model.
  double payload_mass = 0.0;
  double payload_inertia = 0.0;

  double hip_x(Foot f) const {
    return f == Foot::kFront ? 0.5 * trunk_length : -0.5 * trunk_length;
  }
  double trunk_mass() const { return m_trunk + payload_mass; }
  double trunk_pitch_inertia() const { return trunk_inertia + payload_inertia; }
  double mass_with_payload() const { return total_mass + payload_mass; }

  // Returns a copy with a payload attached (payload inertia modeled as a compact
  // box, gyration radius^2 = 0.002 m^2).
  RobotModel with_payload(double mass) const;

  // Throws std::invalid_argument when physical parameters are inconsistent
  // (non-positive masses/lengths, inverted joint limits, link masses that do not
  // sum to the total).
  void validate() const;

  static RobotModel load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace stonehop
