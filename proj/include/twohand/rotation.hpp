#pragma once

#include <array>

#include "twohand/types.hpp"

namespace twohand {

/// Skew-symmetric cross-product matrix, skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& a);

/// Axis-angle to rotation matrix. The zero vector maps to the identity.
Mat3 rodrigues(const Vec3& axis_angle);

/// Partial derivatives dR/dv_k of rodrigues(v), k = 0..2.
///
/// Uses the closed form R = I + A(t) K + B(t) K^2 with t = |v| and K = skew(v),
/// switching to Taylor series for the coefficient functions near t = 0, so the
/// result is smooth through the origin.
std::array<Mat3, 3> rodrigues_derivatives(const Vec3& axis_angle);

/// Rotation matrix to axis-angle with angle in [0, pi].
Vec3 rotation_log(const Mat3& rotation);

/// Minimal (twist-free) rotation taking direction `from` onto direction `to`,
/// returned as axis-angle. Throws DegenerateInput for zero-length inputs.
Vec3 swing_between(const Vec3& from, const Vec3& to);

}  // namespace twohand
