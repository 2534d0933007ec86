#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. None of these call into the library code they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "twohand/hand_model.hpp"
#include "twohand/objectives.hpp"

namespace oracle {

using twohand::Mat3;
using twohand::Points;
using twohand::Vec3;

inline Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b)
{
    // (w, x, y, z)
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

/// Rotates v by the axis-angle vector using unit quaternions q v q*.
inline Vec3 quat_rotate(const Vec3& axis_angle, const Vec3& v)
{
    const double angle = axis_angle.norm();
    if (angle == 0.0)
        return v;
    const Vec3 axis = axis_angle / angle;
    const Eigen::Vector4d q(std::cos(angle / 2), std::sin(angle / 2) * axis[0], std::sin(angle / 2) * axis[1],
                            std::sin(angle / 2) * axis[2]);
    const Eigen::Vector4d qc(q[0], -q[1], -q[2], -q[3]);
    const Eigen::Vector4d r = quat_mul(quat_mul(q, Eigen::Vector4d(0, v[0], v[1], v[2])), qc);
    return {r[1], r[2], r[3]};
}

inline Mat3 quat_matrix(const Vec3& axis_angle)
{
    Mat3 m;
    for (int c = 0; c < 3; ++c)
        m.col(c) = quat_rotate(axis_angle, Vec3::Unit(c));
    return m;
}

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

/// Distance from p to triangle abc: plane projection when it falls inside,
/// otherwise the nearest edge.
inline double triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 n = (b - a).cross(c - a);
    const double n2 = n.squaredNorm();
    if (n2 > 0.0) {
        const Vec3 q = p - n * ((p - a).dot(n) / n2);
        const double s0 = (b - a).cross(q - a).dot(n);
        const double s1 = (c - b).cross(q - b).dot(n);
        const double s2 = (a - c).cross(q - c).dot(n);
        if (s0 >= 0 && s1 >= 0 && s2 >= 0)
            return (p - q).norm();
    }
    return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

inline double mesh_distance(const Vec3& p, const Points& v, const twohand::Faces& faces)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : faces)
        best = std::min(best, triangle_distance(p, v.row(f[0]).transpose(), v.row(f[1]).transpose(),
                                                v.row(f[2]).transpose()));
    return best;
}

/// Inside test for a closed convex mesh with outward faces.
inline bool inside_convex(const Vec3& p, const Points& v, const twohand::Faces& faces)
{
    for (const auto& f : faces) {
        const Vec3 a = v.row(f[0]).transpose();
        const Vec3 n = (v.row(f[1]).transpose() - a).cross(v.row(f[2]).transpose() - a);
        if ((p - a).dot(n) >= 0.0)
            return false;
    }
    return true;
}

/// Brute-force sum over `queries` of the depth inside a convex mesh.
inline double convex_penetration_sum(const Points& queries, const Points& v, const twohand::Faces& faces)
{
    double sum = 0.0;
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Vec3 p = queries.row(i).transpose();
        if (inside_convex(p, v, faces))
            sum += mesh_distance(p, v, faces);
    }
    return sum;
}

/// Posed vertices of one hand from explicit 4x4 bone transforms, dense skin
/// weights and quaternion rotations.
inline Points naive_skinning(const twohand::HandTemplate& tmpl, twohand::Side side, const twohand::HandParams& params,
                             const Vec3& translation)
{
    using namespace twohand;
    const SideGeometry& g = tmpl.side(side);
    const int nv = tmpl.vertex_count();
    Points rest(nv, 3);
    for (int i = 0; i < nv; ++i)
        for (int a = 0; a < 3; ++a) {
            double x = g.rest_vertices(i, a);
            for (int k = 0; k < kShapeDim; ++k)
                x += g.vertex_shape_dirs(3 * i + a, k) * params.shape.coefficients[k];
            rest(i, a) = x;
        }
    std::array<Eigen::Matrix4d, kJointCount> bone;
    bone[0].setIdentity();
    for (int j = 1; j < kJointCount; ++j) {
        Vec3 pivot;
        for (int a = 0; a < 3; ++a) {
            double x = g.rest_joints(j, a);
            for (int k = 0; k < kShapeDim; ++k)
                x += g.joint_shape_dirs(3 * j + a, k) * params.shape.coefficients[k];
            pivot[a] = x;
        }
        Eigen::Matrix4d to = Eigen::Matrix4d::Identity(), from = Eigen::Matrix4d::Identity(),
                        rot = Eigen::Matrix4d::Identity();
        to.block<3, 1>(0, 3) = pivot;
        from.block<3, 1>(0, 3) = -pivot;
        rot.block<3, 3>(0, 0) = quat_matrix(params.fingers.joint_rotations.row(j - 1).transpose());
        bone[j] = bone[kParents[j]] * to * rot * from;
    }
    const Eigen::MatrixXd w = tmpl.skin_weight_matrix();
    const Vec3 phi = params.orientation.axis_angle;
    Points out(nv, 3);
    for (int i = 0; i < nv; ++i) {
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        const Eigen::Vector4d r(rest(i, 0), rest(i, 1), rest(i, 2), 1.0);
        for (int b = 0; b < kJointCount; ++b)
            acc += w(i, b) * (bone[b] * r);
        out.row(i) = (quat_rotate(phi, acc.head<3>()) + translation).transpose();
    }
    return out;
}

/// Numeric minimization of sum |s p + t - g|^2 by compass search over (s, t),
/// then the mean residual distance in mm.
inline double numeric_scale_translation_error_mm(const Points& pred, const Points& gt)
{
    auto cost = [&](const Eigen::Vector4d& x) {
        double c = 0.0;
        for (Eigen::Index i = 0; i < pred.rows(); ++i)
            c += (x[0] * pred.row(i) + x.tail<3>().transpose() - gt.row(i)).squaredNorm();
        return c;
    };
    Eigen::Vector4d x(1.0, 0.0, 0.0, 0.0);
    double best = cost(x);
    for (double step = 1.0; step > 1e-13;) {
        bool improved = false;
        for (int k = 0; k < 4; ++k)
            for (double dir : {1.0, -1.0}) {
                Eigen::Vector4d y = x;
                y[k] += dir * step;
                y[0] = std::max(y[0], 0.0);  // the alignment never reflects
                const double c = cost(y);
                if (c < best) {
                    best = c;
                    x = y;
                    improved = true;
                }
            }
        if (!improved)
            step *= 0.5;
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        sum += (x[0] * pred.row(i) + x.tail<3>().transpose() - gt.row(i)).norm();
    return 1000.0 * sum / static_cast<double>(pred.rows());
}

/// Random parameters with angles kept well below pi.
inline twohand::TwoHandParams random_params(std::mt19937_64& rng, double orient = 0.5, double fingers = 0.3,
                                            double shape = 0.5, double translation = 0.05)
{
    std::normal_distribution<double> n(0.0, 1.0);
    twohand::TwoHandParams p;
    for (int a = 0; a < 3; ++a) {
        p.translation[a] = translation * n(rng);
        p.left.orientation.axis_angle[a] = orient * n(rng);
        p.right.orientation.axis_angle[a] = orient * n(rng);
    }
    for (int j = 0; j < twohand::kPoseJointCount; ++j)
        for (int a = 0; a < 3; ++a) {
            p.left.fingers.joint_rotations(j, a) = fingers * n(rng);
            p.right.fingers.joint_rotations(j, a) = fingers * n(rng);
        }
    for (int k = 0; k < twohand::kShapeDim; ++k) {
        p.left.shape.coefficients[k] = shape * n(rng);
        p.right.shape.coefficients[k] = shape * n(rng);
    }
    return p;
}

/// Swing-only finger pose: each rotation axis is perpendicular to its bone.
inline twohand::FingerPose random_swing_pose(std::mt19937_64& rng, const twohand::HandTemplate& tmpl,
                                             twohand::Side side, double angle = 0.4)
{
    using namespace twohand;
    std::normal_distribution<double> n(0.0, 1.0);
    const auto rest = tmpl.rest_keypoints(side);
    FingerPose pose;
    for (const auto& chain : kFingerChains)
        for (int s = 3; s >= 1; --s) {
            const int j = chain[s];
            const Vec3 bone = (rest.row(chain[s - 1]) - rest.row(j)).transpose();
            const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).cross(bone).normalized();
            pose.joint_rotations.row(j - 1) = (angle * std::abs(n(rng)) * axis).transpose();
        }
    return pose;
}

}  // namespace oracle
