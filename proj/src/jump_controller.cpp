#include "stonehop/jump_controller.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stonehop/dynamics.hpp"
#include "stonehop/kinematics.hpp"

namespace stonehop {
namespace {

constexpr double kSingularGuard = 0.03;  // smallest leg-Jacobian singular value
constexpr double kAbortPitch = 1.1;
constexpr double kAbortHeight = 0.10;      // trunk height above the gait origin
constexpr double kAbortDeviation = 0.8;    // trunk x error vs reference

int leg_joint_index(Foot foot) { return foot == Foot::kFront ? 0 : 2; }

}  // namespace

JumpController::JumpController(JumpControllerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.model.validate();
  if (cfg_.terrain.stones.empty()) {
    throw std::invalid_argument("JumpController: terrain has no stones");
  }
  if (cfg_.library.gaits.empty()) {
    throw std::invalid_argument("JumpController: gait library is empty");
  }
  if (cfg_.mpc_horizon < 1 || cfg_.mpc_interval_ticks < 1 || !(cfg_.tick_dt > 0.0)) {
    throw std::invalid_argument("JumpController: bad timing configuration");
  }

  const Stone& s0 = cfg_.terrain.stones.front();
  anchor_ = Vec2(s0.center_x + 0.5 * cfg_.model.foot_spacing, s0.top_z);
  prev_contacts_ = {true, true};
  resynced_ = true;  // the scenario starts in double stance

  if (cfg_.terrain.stones.size() >= 2) {
    const double d1 = cfg_.terrain.stones[1].center_x - s0.center_x;
    gait_ = cfg_.library.interpolate(d1);
    clock_ = gait_.schedule.rear_touchdown * gait_.schedule.dt;
    phase_ = JumpPhase::kCycle;
  } else {
    gait_ = cfg_.library.gaits.front();
    enter_settle();
  }
}

Vec7 JumpController::initial_q() const {
  if (phase_ == JumpPhase::kSettle) return settle_q_;
  Vec7 q = gait_.q[gait_.schedule.rear_touchdown];
  q[0] += anchor_.x();
  q[1] += anchor_.y();
  return q;
}

double JumpController::next_stone_height_delta() const {
  const int next = stone_index_ + 1;
  if (next >= static_cast<int>(cfg_.terrain.stones.size())) return 0.0;
  return cfg_.terrain.stones[next].top_z - cfg_.terrain.stones[stone_index_].top_z;
}

void JumpController::select_next_gait() {
  const int from = stone_index_ + 1;  // stone we are about to land on
  if (from + 1 >= static_cast<int>(cfg_.terrain.stones.size())) {
    next_gait_.reset();
    return;
  }
  const double d =
      cfg_.terrain.stones[from + 1].center_x - cfg_.terrain.stones[from].center_x;
  next_gait_ = cfg_.library.interpolate(d);
}

void JumpController::advance_cycle(const SimState&) {
  if (!prelanding_armed_) select_next_gait();
  ++stone_index_;
  const Stone& st = cfg_.terrain.stones[stone_index_];
  anchor_ = Vec2(st.center_x + 0.5 * cfg_.model.foot_spacing, st.top_z);
  resynced_ = false;
  prelanding_armed_ = false;
  mpc_due_ = true;
  mpc_wrench_ = ContactWrench{};
  if (next_gait_.has_value()) {
    gait_ = *next_gait_;
    next_gait_.reset();
    clock_ = 0.0;
  } else {
    enter_settle();
  }
}

void JumpController::enter_settle() {
  phase_ = JumpPhase::kSettle;
  const Stone& st = cfg_.terrain.stones[stone_index_];
  settle_q_ << st.center_x, st.top_z + standing_trunk_height(cfg_.model), 0.0,
      nominal_posture();
  mpc_due_ = true;
  mpc_wrench_ = ContactWrench{};
}

bool JumpController::envelope_exceeded(const SimState& s) const {
  if (std::abs(s.q[2]) > kAbortPitch) return true;
  if (s.q[1] < anchor_.y() + kAbortHeight) return true;
  const double x_ref = phase_ == JumpPhase::kSettle
                           ? settle_q_[0]
                           : gait_.q_at(clock_)[0] + anchor_.x();
  return std::abs(s.q[0] - x_ref) > kAbortDeviation;
}

std::vector<MpcStep> JumpController::build_cycle_steps(const SimState& s) const {
  const double d = cfg_.model.foot_spacing;
  std::vector<MpcStep> steps(cfg_.mpc_horizon);
  for (int i = 0; i < cfg_.mpc_horizon; ++i) {
    MpcStep& st = steps[i];
    const double t_mode = clock_ + i * cfg_.mpc.dt;
    const double t_end = clock_ + (i + 1) * cfg_.mpc.dt;
    st.mode = i == 0 ? s.contacts : gait_.schedule.at_time(t_mode);
    st.front_anchor = Vec2(0.0, 0.0);
    st.rear_anchor = Vec2(-d, 0.0);
    if (i == 0) {
      if (st.mode.front) st.front_anchor = s.front_anchor - anchor_;
      if (st.mode.rear) st.rear_anchor = s.rear_anchor - anchor_;
    }
    st.x_ref = srb_state(cfg_.model, GenCoords::from(gait_.q_at(t_end)),
                         gait_.qd_at(t_end));
    const ContactWrench ref = gait_.force_at(t_mode);
    st.f_ref = VecX::Zero(2 * st.mode.count());
    int col = 0;
    for (Foot foot : {Foot::kFront, Foot::kRear}) {
      if (!st.mode.has(foot)) continue;
      if (ref.set.has(foot)) {
        st.f_ref.segment<2>(col) =
            foot == Foot::kFront ? ref.front() : ref.rear();
      }
      col += 2;
    }
  }
  return steps;
}

std::vector<MpcStep> JumpController::build_settle_steps(const SimState& s) const {
  const double d = cfg_.model.foot_spacing;
  const double weight = cfg_.model.total_mass * cfg_.model.gravity;
  SrbState x_ref;
  x_ref << settle_q_[0] - anchor_.x(), settle_q_[1] - anchor_.y(), 0.0, 0.0, 0.0, 0.0,
      cfg_.model.gravity;
  std::vector<MpcStep> steps(cfg_.mpc_horizon);
  for (int i = 0; i < cfg_.mpc_horizon; ++i) {
    MpcStep& st = steps[i];
    st.mode = i == 0 ? s.contacts : ContactSet{true, true};
    st.front_anchor = Vec2(0.0, 0.0);
    st.rear_anchor = Vec2(-d, 0.0);
    if (i == 0) {
      if (st.mode.front) st.front_anchor = s.front_anchor - anchor_;
      if (st.mode.rear) st.rear_anchor = s.rear_anchor - anchor_;
    }
    st.x_ref = x_ref;
    st.f_ref = VecX::Zero(2 * st.mode.count());
    for (int k = 0; k < st.mode.count(); ++k) st.f_ref[2 * k + 1] = 0.5 * weight;
  }
  return steps;
}

void JumpController::run_mpc(const SimState& s) {
  Vec7 q_local = s.q;
  q_local[0] -= anchor_.x();
  q_local[1] -= anchor_.y();
  const SrbState x0 = srb_state(cfg_.model, GenCoords::from(q_local), s.qd);
  const std::vector<MpcStep> steps = phase_ == JumpPhase::kSettle
                                         ? build_settle_steps(s)
                                         : build_cycle_steps(s);
  const MpcSolution sol = solve_srb_mpc(cfg_.model, x0, steps, cfg_.mpc);
  mpc_wrench_ = sol.wrench;
  mpc_status_ = sol.status;
}

Vec2 JumpController::mapped_leg_torque(const Vec7& q, Foot foot, const Vec2& force,
                                       bool* guarded) const {
  const Mat2 J = leg_jacobian(cfg_.model, q, foot);
  const Eigen::JacobiSVD<Mat2> svd(J);
  const double sigma_min = svd.singularValues()[1];
  double scale = 1.0;
  if (sigma_min < kSingularGuard) {
    scale = std::max(sigma_min, 0.0) / kSingularGuard;
    if (guarded != nullptr) *guarded = true;
  }
  return J.transpose() * (scale * force);
}

void JumpController::stance_torque(const SimState& s, Foot foot,
                                   ControlOutput& out) const {
  const int j = leg_joint_index(foot);
  const Vec4 tau_g = gait_.tau_at(clock_);
  const Vec7 q_ref = gait_.q_at(clock_);
  const Vec7 qd_ref = gait_.qd_at(clock_);

  Vec2 tau = tau_g.segment<2>(j);
  tau += cfg_.gains.stance_kp *
             (q_ref.segment<2>(3 + j) - s.q.segment<2>(3 + j)) +
         cfg_.gains.stance_kd * (qd_ref.segment<2>(3 + j) - s.qd.segment<2>(3 + j));

  if (cfg_.use_mpc && mpc_wrench_.set.has(foot)) {
    const ContactWrench ref = gait_.force_at(clock_);
    const Vec2 f_des =
        foot == Foot::kFront ? mpc_wrench_.front() : mpc_wrench_.rear();
    Vec2 f_ref = Vec2::Zero();
    if (ref.set.has(foot)) {
      f_ref = foot == Foot::kFront ? ref.front() : ref.rear();
    }
    bool guarded = false;
    tau += mapped_leg_torque(s.q, foot, Vec2(-(f_des - f_ref)), &guarded);
    out.singular_guard = out.singular_guard || guarded;
  }
  out.tau.segment<2>(j) = tau;
}

void JumpController::swing_torque(const SimState& s, Foot foot,
                                  ControlOutput& out) const {
  const int j = leg_joint_index(foot);
  const double onset =
      gait_.schedule.period() - kPrelandingKnots * gait_.schedule.dt;

  if (cfg_.use_prelanding && clock_ >= onset) {
    // Cartesian foot placement toward the gait's landing approach, lifted to
    // the next stone's height.
    const Vec7 q_ref = gait_.q_at(clock_);
    const Vec7 qd_ref = gait_.qd_at(clock_);
    const PointKin ref = foot_kin(cfg_.model, q_ref, qd_ref, foot);
    const PointKin act = foot_kin(cfg_.model, s.q, s.qd, foot);
    Vec2 target = ref.p + anchor_;
    target.y() += next_stone_height_delta();
    const Vec2 force = cfg_.gains.landing_kp * (target - act.p) +
                       cfg_.gains.landing_kd * (ref.v - act.v);
    bool guarded = false;
    out.tau.segment<2>(j) = mapped_leg_torque(s.q, foot, force, &guarded);
    out.singular_guard = out.singular_guard || guarded;
    return;
  }

  const Vec4 tau_g = gait_.tau_at(clock_);
  const Vec7 q_ref = gait_.q_at(clock_);
  const Vec7 qd_ref = gait_.qd_at(clock_);
  out.tau.segment<2>(j) =
      tau_g.segment<2>(j) +
      cfg_.gains.swing_kp * (q_ref.segment<2>(3 + j) - s.q.segment<2>(3 + j)) +
      cfg_.gains.swing_kd * (qd_ref.segment<2>(3 + j) - s.qd.segment<2>(3 + j));
}

void JumpController::settle_torques(const SimState& s, ControlOutput& out) const {
  const double share = 0.5 * cfg_.model.total_mass * cfg_.model.gravity;
  const Vec7 zero = Vec7::Zero();
  Vec7 rhs = bias_forces(cfg_.model, s.q, zero);
  for (Foot foot : {Foot::kFront, Foot::kRear}) {
    if (!s.contacts.has(foot)) continue;
    const Mat27 J = foot_kin(cfg_.model, s.q, zero, foot).J;
    rhs -= J.transpose() * Vec2(0.0, share);
  }

  for (Foot foot : {Foot::kFront, Foot::kRear}) {
    const int j = leg_joint_index(foot);
    if (s.contacts.has(foot)) {
      Vec2 tau = rhs.segment<2>(3 + j);
      tau += cfg_.gains.settle_kp *
                 (settle_q_.segment<2>(3 + j) - s.q.segment<2>(3 + j)) -
             cfg_.gains.settle_kd * s.qd.segment<2>(3 + j);
      if (cfg_.use_mpc && mpc_wrench_.set.has(foot)) {
        const Vec2 f_des =
            foot == Foot::kFront ? mpc_wrench_.front() : mpc_wrench_.rear();
        bool guarded = false;
        tau += mapped_leg_torque(s.q, foot, Vec2(-(f_des - Vec2(0.0, share))),
                                 &guarded);
        out.singular_guard = out.singular_guard || guarded;
      }
      out.tau.segment<2>(j) = tau;
    } else {
      const Stone& st = cfg_.terrain.stones[stone_index_];
      const double off = foot == Foot::kFront ? 0.5 * cfg_.model.foot_spacing
                                              : -0.5 * cfg_.model.foot_spacing;
      const Vec2 target(st.center_x + off, st.top_z);
      const PointKin act = foot_kin(cfg_.model, s.q, s.qd, foot);
      const Vec2 force = cfg_.gains.landing_kp * (target - act.p) -
                         cfg_.gains.landing_kd * act.v;
      bool guarded = false;
      out.tau.segment<2>(j) = mapped_leg_torque(s.q, foot, force, &guarded);
      out.singular_guard = out.singular_guard || guarded;
    }
  }
}

ControlOutput JumpController::tick(const SimState& s) {
  ControlOutput out;
  out.stone_index = stone_index_;
  out.clock = clock_;
  out.gait_distance = gait_.jump_distance;
  out.mpc_status = mpc_status_;

  if (s.crashed) phase_ = JumpPhase::kAborted;
  if (phase_ == JumpPhase::kAborted) {
    out.phase = phase_;
    out.commanded = {true, true};
    prev_contacts_ = s.contacts;
    ++tick_count_;
    return out;
  }

  // Contact-edge driven transitions.
  const ContactSet now = s.contacts;
  const bool front_td = now.front && !prev_contacts_.front;
  const bool all_down_edge =
      now.front && now.rear && !(prev_contacts_.front && prev_contacts_.rear);
  if (phase_ == JumpPhase::kCycle) {
    const double period = gait_.schedule.period();
    if (front_td && clock_ >= 0.8 * period) {
      advance_cycle(s);
    } else if (all_down_edge && clock_ < 0.35 * period && !resynced_) {
      clock_ = gait_.schedule.rear_touchdown * gait_.schedule.dt;
      resynced_ = true;
    }
  }
  if (phase_ == JumpPhase::kCycle && !prelanding_armed_) {
    const double onset =
        gait_.schedule.period() - kPrelandingKnots * gait_.schedule.dt;
    if (clock_ >= onset) {
      select_next_gait();
      prelanding_armed_ = true;
    }
  }

  if (envelope_exceeded(s)) {
    phase_ = JumpPhase::kAborted;
    out.phase = phase_;
    out.commanded = {true, true};
    prev_contacts_ = s.contacts;
    ++tick_count_;
    return out;
  }

  if (cfg_.use_mpc && (mpc_due_ || tick_count_ % cfg_.mpc_interval_ticks == 0)) {
    run_mpc(s);
    mpc_due_ = false;
    out.mpc_solved = true;
  }

  if (phase_ == JumpPhase::kCycle) {
    out.commanded = gait_.schedule.at_time(clock_);
    for (Foot foot : {Foot::kFront, Foot::kRear}) {
      if (out.commanded.has(foot) && s.contacts.has(foot)) {
        stance_torque(s, foot, out);
      } else {
        swing_torque(s, foot, out);
      }
    }
  } else {
    out.commanded = {true, true};
    settle_torques(s, out);
  }

  out.tau = out.tau.cwiseMax(-cfg_.model.tau_max).cwiseMin(cfg_.model.tau_max);
  out.phase = phase_;
  out.stone_index = stone_index_;
  out.clock = clock_;
  out.gait_distance = gait_.jump_distance;
  out.mpc_status = mpc_status_;
  out.mpc_wrench = mpc_wrench_;

  clock_ += cfg_.tick_dt;
  ++tick_count_;
  prev_contacts_ = now;
  return out;
}

}  // namespace stonehop
