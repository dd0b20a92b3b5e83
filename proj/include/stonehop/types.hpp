#pragma once

#include <Eigen/Core>

namespace stonehop {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat7 = Eigen::Matrix<double, 7, 7>;
using Mat27 = Eigen::Matrix<double, 2, 7>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// 90-degree counterclockwise rotation of a planar vector; the Jacobian column of a
// revolute joint is perp(point - pivot).
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

inline Mat2 rot(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat2 R;
  R << c, -s, s, c;
  return R;
}

enum class Foot { kFront = 0, kRear = 1 };

// Which feet are in contact. Wrench and Jacobian rows are always ordered front
// before rear.
struct ContactSet {
  bool front = false;
  bool rear = false;

  int count() const { return (front ? 1 : 0) + (rear ? 1 : 0); }
  bool any() const { return front || rear; }
  bool has(Foot f) const { return f == Foot::kFront ? front : rear; }
  bool operator==(const ContactSet&) const = default;
};

// Stacked planar contact forces (fx, fz per contacting foot), 2*k entries.
struct ContactWrench {
  ContactSet set;
  VecX f;  // size 2 * set.count(), front rows first

  static ContactWrench zero(ContactSet s) {
    ContactWrench w;
    w.set = s;
    w.f = VecX::Zero(2 * s.count());
    return w;
  }
  Vec2 front() const { return set.front ? Vec2(f.segment<2>(0)) : Vec2::Zero(); }
  Vec2 rear() const {
    if (!set.rear) return Vec2::Zero();
    return Vec2(f.segment<2>(set.front ? 2 : 0));
  }
};

// Generalized coordinates of the planar model: trunk position, pitch, and the four
// actuated joints ordered [front hip, front knee, rear hip, rear knee].
struct GenCoords {
  double x = 0.0;
  double z = 0.0;
  double pitch = 0.0;
  Vec4 qj = Vec4::Zero();

  Vec7 vec() const {
    Vec7 v;
    v << x, z, pitch, qj;
    return v;
  }
  static GenCoords from(const Vec7& v) {
    GenCoords q;
    q.x = v[0];
    q.z = v[1];
    q.pitch = v[2];
    q.qj = v.segment<4>(3);
    return q;
  }
};

}  // namespace stonehop
