#include "twohand/rotation.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace twohand {
namespace {

// Coefficients of R = I + a K + b K^2 and their scaled derivatives
// c = a'(t)/t, d = b'(t)/t.
struct RodriguesCoefficients {
    double a, b, c, d;
};

RodriguesCoefficients coefficients(double t2)
{
    RodriguesCoefficients k{};
    if (t2 < 1e-4) {
        k.a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
        k.b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
        k.c = -1.0 / 3.0 + t2 / 30.0 - t2 * t2 / 840.0;
        k.d = -1.0 / 12.0 + t2 / 180.0 - t2 * t2 / 6720.0;
        return k;
    }
    const double t = std::sqrt(t2);
    const double s = std::sin(t);
    const double co = std::cos(t);
    k.a = s / t;
    k.b = (1.0 - co) / t2;
    k.c = (t * co - s) / (t2 * t);
    k.d = (t * s - 2.0 * (1.0 - co)) / (t2 * t2);
    return k;
}

}  // namespace

Mat3 skew(const Vec3& a)
{
    Mat3 k;
    k << 0.0, -a.z(), a.y(),
         a.z(), 0.0, -a.x(),
         -a.y(), a.x(), 0.0;
    return k;
}

Mat3 rodrigues(const Vec3& axis_angle)
{
    const auto k = coefficients(axis_angle.squaredNorm());
    const Mat3 kx = skew(axis_angle);
    return Mat3::Identity() + k.a * kx + k.b * kx * kx;
}

std::array<Mat3, 3> rodrigues_derivatives(const Vec3& axis_angle)
{
    const auto k = coefficients(axis_angle.squaredNorm());
    const Mat3 kx = skew(axis_angle);
    const Mat3 kx2 = kx * kx;
    std::array<Mat3, 3> out;
    for (int i = 0; i < 3; ++i) {
        const Mat3 e = skew(Vec3::Unit(i));
        const double vi = axis_angle[i];
        out[i] = k.c * vi * kx + k.a * e + k.d * vi * kx2 + k.b * (e * kx + kx * e);
    }
    return out;
}

Vec3 rotation_log(const Mat3& rotation)
{
    Eigen::AngleAxisd aa(rotation);
    double angle = aa.angle();
    Vec3 axis = aa.axis();
    if (angle > M_PI) {
        angle = 2.0 * M_PI - angle;
        axis = -axis;
    }
    return axis * angle;
}

Vec3 swing_between(const Vec3& from, const Vec3& to)
{
    const double nf = from.norm();
    const double nt = to.norm();
    if (!(nf > 0.0) || !(nt > 0.0))
        throw DegenerateInput("swing_between: zero-length direction");
    const Vec3 a = from / nf;
    const Vec3 b = to / nt;
    const Vec3 c = a.cross(b);
    const double sn = c.norm();
    const double cs = a.dot(b);
    const double angle = std::atan2(sn, cs);
    if (sn < 1e-15) {
        if (cs > 0.0)
            return Vec3::Zero();
        // Antiparallel: any axis orthogonal to `from` works.
        Vec3 axis = a.cross(Vec3::UnitX());
        if (axis.norm() < 1e-6)
            axis = a.cross(Vec3::UnitY());
        return axis.normalized() * M_PI;
    }
    return c / sn * angle;
}

}  // namespace twohand
