#pragma once

#include <Eigen/Dense>

namespace splatsim {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Deviatoric part, dev(M) = M - (tr(M)/3) I.
inline Mat3 deviatoric(const Mat3& m) {
    return m - Mat3::Identity() * (m.trace() / 3.0);
}

inline Vec3 deviatoric(const Vec3& v) {
    return v - Vec3::Constant(v.sum() / 3.0);
}

struct Box3 {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    bool intersects(const Box3& o) const {
        return (min.array() <= o.max.array()).all() && (max.array() >= o.min.array()).all();
    }
    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extent() const { return max - min; }
    bool valid() const { return (min.array() <= max.array()).all(); }
};

} // namespace splatsim
