#include <Eigen/SVD>

#include "twohand/hand_model.hpp"
#include "twohand/rotation.hpp"

namespace twohand {

HandOrientation orientation_from_joints(const Eigen::Matrix<double, kKeypointCount, 3>& joints, const HandTemplate& tmpl,
                                        Side side, const HandShape& shape)
{
    if (!joints.allFinite())
        throw NonFiniteValue("observed joints contain non-finite values");
    const auto rest = tmpl.rest_keypoints(side, shape);
    const Vec3 rest_wrist = rest.row(0).transpose();
    const Vec3 obs_wrist = joints.row(0).transpose();

    // Cross-covariance about the wrist; the wrist itself contributes nothing.
    Mat3 h = Mat3::Zero();
    for (int k : kPalmKeypoints) {
        const Vec3 p = rest.row(k).transpose() - rest_wrist;
        const Vec3 q = joints.row(k).transpose() - obs_wrist;
        h += p * q.transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv[0] > 1e-12) || sv[1] < 1e-9 * sv[0])
        throw DegenerateInput("palm keypoints are collinear or coincident");
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    Mat3 fix = Mat3::Identity();
    if ((v * u.transpose()).determinant() < 0)
        fix(2, 2) = -1.0;
    HandOrientation out;
    out.axis_angle = rotation_log(v * fix * u.transpose());
    return out;
}

FingerPose swing_from_joints(const Eigen::Matrix<double, kKeypointCount, 3>& joints, const HandOrientation& orientation,
                             const HandTemplate& tmpl, Side side, const HandShape& shape)
{
    if (!joints.allFinite())
        throw NonFiniteValue("observed joints contain non-finite values");
    const auto rest = tmpl.rest_keypoints(side, shape);
    const Mat3 global = rodrigues(orientation.axis_angle);
    std::array<Mat3, kJointCount> accumulated;
    accumulated[0] = global;
    FingerPose pose;
    for (const auto& chain : kFingerChains) {
        // chain is tip, distal, middle, base; walk base to tip
        for (int step = 3; step >= 1; --step) {
            const int j = chain[step];
            const int child = chain[step - 1];
            const Vec3 rest_dir = rest.row(child).transpose() - rest.row(j).transpose();
            const Vec3 obs_dir = joints.row(child).transpose() - joints.row(j).transpose();
            if (obs_dir.norm() < 1e-12)
                throw DegenerateInput("observed bone " + std::to_string(j) + " has zero length");
            const Mat3& parent = accumulated[kParents[j]];
            const Vec3 swing = swing_between(rest_dir, parent.transpose() * obs_dir);
            pose.joint_rotations.row(j - 1) = swing.transpose();
            accumulated[j] = parent * rodrigues(swing);
        }
    }
    return pose;
}

}  // namespace twohand
