#include <cmath>

#include "twohand/hand_model.hpp"
#include "twohand/rotation.hpp"

namespace twohand {
namespace {

Points shaped(const Points& rest, const Eigen::MatrixXd& dirs, const Eigen::Matrix<double, kShapeDim, 1>& beta)
{
    const Eigen::VectorXd flat = dirs * beta;
    Points out = rest;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        out.row(i) += flat.segment<3>(3 * i).transpose();
    return out;
}

}  // namespace

bool TwoHandParams::all_finite() const
{
    auto hand_ok = [](const HandParams& h) {
        return h.shape.coefficients.allFinite() && h.orientation.axis_angle.allFinite()
            && h.fingers.joint_rotations.allFinite();
    };
    return hand_ok(left) && hand_ok(right) && translation.allFinite();
}

FactorSlice factor_slice(Factor f)
{
    switch (f) {
    case Factor::Translation: return {0, 3};
    case Factor::Orientation: return {3, 6};
    case Factor::Fingers: return {9, 90};
    case Factor::Shape: return {99, 20};
    }
    return {0, 0};
}

const char* factor_name(Factor f)
{
    switch (f) {
    case Factor::Translation: return "tau";
    case Factor::Orientation: return "phi";
    case Factor::Fingers: return "theta";
    case Factor::Shape: return "beta";
    }
    return "?";
}

std::optional<Factor> parse_factor(const std::string& name)
{
    for (Factor f : kAllFactors)
        if (name == factor_name(f))
            return f;
    return std::nullopt;
}

Eigen::VectorXd pack(const TwoHandParams& p)
{
    Eigen::VectorXd v(kParamCount);
    v.segment<3>(0) = p.translation;
    v.segment<3>(3) = p.left.orientation.axis_angle;
    v.segment<3>(6) = p.right.orientation.axis_angle;
    for (int j = 0; j < kPoseJointCount; ++j) {
        v.segment<3>(9 + 3 * j) = p.left.fingers.joint_rotations.row(j).transpose();
        v.segment<3>(54 + 3 * j) = p.right.fingers.joint_rotations.row(j).transpose();
    }
    v.segment<kShapeDim>(99) = p.left.shape.coefficients;
    v.segment<kShapeDim>(109) = p.right.shape.coefficients;
    return v;
}

TwoHandParams unpack(const Eigen::VectorXd& v)
{
    if (v.size() != kParamCount)
        throw DimensionMismatch("parameter vector must have " + std::to_string(kParamCount) + " entries");
    TwoHandParams p;
    p.translation = v.segment<3>(0);
    p.left.orientation.axis_angle = v.segment<3>(3);
    p.right.orientation.axis_angle = v.segment<3>(6);
    for (int j = 0; j < kPoseJointCount; ++j) {
        p.left.fingers.joint_rotations.row(j) = v.segment<3>(9 + 3 * j).transpose();
        p.right.fingers.joint_rotations.row(j) = v.segment<3>(54 + 3 * j).transpose();
    }
    p.left.shape.coefficients = v.segment<kShapeDim>(99);
    p.right.shape.coefficients = v.segment<kShapeDim>(109);
    return p;
}

TwoHandParams replace_factor(const TwoHandParams& base, const TwoHandParams& source, Factor f)
{
    TwoHandParams out = base;
    switch (f) {
    case Factor::Translation:
        out.translation = source.translation;
        break;
    case Factor::Orientation:
        out.left.orientation = source.left.orientation;
        out.right.orientation = source.right.orientation;
        break;
    case Factor::Fingers:
        out.left.fingers = source.left.fingers;
        out.right.fingers = source.right.fingers;
        break;
    case Factor::Shape:
        out.left.shape = source.left.shape;
        out.right.shape = source.right.shape;
        break;
    }
    return out;
}

HandPoseState pose_hand(const HandTemplate& tmpl, Side side, const HandParams& params, const Vec3& translation)
{
    const SideGeometry& g = tmpl.side(side);
    HandPoseState s;
    s.side = side;
    s.params = params;
    s.shaped_rest = shaped(g.rest_vertices, g.vertex_shape_dirs, params.shape.coefficients);
    const Eigen::Matrix<double, 3 * kJointCount, 1> jflat = g.joint_shape_dirs * params.shape.coefficients;
    for (int j = 0; j < kJointCount; ++j)
        s.shaped_joints.row(j) = g.rest_joints.row(j) + jflat.segment<3>(3 * j).transpose();

    s.local_rotation[0] = Mat3::Identity();
    s.bone_rotation[0] = Mat3::Identity();
    s.bone_translation[0] = Vec3::Zero();
    for (int j = 1; j < kJointCount; ++j) {
        const int p = kParents[j];
        const Mat3 r = rodrigues(params.fingers.joint_rotations.row(j - 1).transpose());
        const Vec3 pivot = s.shaped_joints.row(j).transpose();
        s.local_rotation[j] = r;
        s.bone_rotation[j] = s.bone_rotation[p] * r;
        s.bone_translation[j] = s.bone_rotation[p] * (pivot - r * pivot) + s.bone_translation[p];
    }

    const int nv = tmpl.vertex_count();
    s.local_vertices.resize(nv, 3);
    for (int i = 0; i < nv; ++i) {
        const Vec3 rest = s.shaped_rest.row(i).transpose();
        Vec3 acc = Vec3::Zero();
        for (int k = tmpl.skin_offsets[i]; k < tmpl.skin_offsets[i + 1]; ++k) {
            const auto& inf = tmpl.skin[k];
            acc += inf.weight * (s.bone_rotation[inf.bone] * rest + s.bone_translation[inf.bone]);
        }
        s.local_vertices.row(i) = acc.transpose();
    }
    s.orientation = rodrigues(params.orientation.axis_angle);
    s.translation = translation;
    s.world_vertices = s.local_vertices * s.orientation.transpose();
    s.world_vertices.rowwise() += translation.transpose();
    return s;
}

TwoHandMesh forward(const HandTemplate& tmpl, const TwoHandParams& params)
{
    TwoHandMesh mesh;
    auto left = pose_hand(tmpl, Side::Left, params.left, params.translation);
    auto right = pose_hand(tmpl, Side::Right, params.right, Vec3::Zero());
    mesh.left_vertices = std::move(left.world_vertices);
    mesh.right_vertices = std::move(right.world_vertices);
    // Aliasing constructor: the faces live as long as the caller's template.
    mesh.left_faces = std::shared_ptr<const Faces>(std::shared_ptr<const Faces>{}, &tmpl.side(Side::Left).faces);
    mesh.right_faces = std::shared_ptr<const Faces>(std::shared_ptr<const Faces>{}, &tmpl.side(Side::Right).faces);
    mesh.joints_3d = regress_joints(tmpl, mesh);
    mesh.frame_rotation = {left.orientation, right.orientation};
    mesh.frame_translation = {left.translation, right.translation};
    return mesh;
}

Eigen::Matrix<double, kTwoHandKeypoints, 3> regress_joints(const HandTemplate& tmpl, const TwoHandMesh& mesh)
{
    const int nv = tmpl.vertex_count();
    if (mesh.left_vertices.rows() != nv || mesh.right_vertices.rows() != nv)
        throw DimensionMismatch("mesh vertex count does not match the template");
    Eigen::Matrix<double, kTwoHandKeypoints, 3> joints;
    joints.topRows<kKeypointCount>() = tmpl.joint_regressor * mesh.left_vertices;
    joints.bottomRows<kKeypointCount>() = tmpl.joint_regressor * mesh.right_vertices;
    return joints;
}

Points2 project_weak_perspective(const Points& joints_3d, const WeakPerspectiveCamera& camera)
{
    Points2 out = camera.scale * joints_3d.leftCols<2>();
    out.rowwise() += camera.translation.transpose();
    return out;
}

HandGradient backprop_hand(const HandTemplate& tmpl, const HandPoseState& state, const HandAdjoint& adjoint,
                           bool want_shape, bool want_fingers)
{
    const SideGeometry& g = tmpl.side(state.side);
    const int nv = tmpl.vertex_count();
    HandGradient out;
    out.orientation = adjoint.orientation;
    out.translation = adjoint.translation;
    out.shape = adjoint.shape;

    Points local_adj = Points::Zero(nv, 3);
    if (adjoint.world_vertices.rows() == nv) {
        // world = R * local + t
        local_adj = adjoint.world_vertices * state.orientation;
        out.translation += adjoint.world_vertices.colwise().sum().transpose();
    }
    Mat3 m = adjoint.rotation;
    if (adjoint.world_vertices.rows() == nv)
        m += adjoint.world_vertices.transpose() * state.local_vertices;
    if (!m.isZero(0.0)) {
        const auto dr = rodrigues_derivatives(state.params.orientation.axis_angle);
        for (int k = 0; k < 3; ++k)
            out.orientation[k] += (dr[k].array() * m.array()).sum();
    }
    if (adjoint.local_vertices.rows() == nv)
        local_adj += adjoint.local_vertices;
    if (!want_shape && !want_fingers)
        return out;

    // Skinning: u_i = sum_b w_ib (Rot_b * rest_i + t_b)
    std::array<Mat3, kJointCount> d_rot;
    std::array<Vec3, kJointCount> d_trans;
    for (int b = 0; b < kJointCount; ++b) {
        d_rot[b].setZero();
        d_trans[b].setZero();
    }
    Points d_rest;
    if (want_shape)
        d_rest = Points::Zero(nv, 3);
    for (int i = 0; i < nv; ++i) {
        const Vec3 gi = local_adj.row(i).transpose();
        if (gi.isZero(0.0))
            continue;
        const Vec3 rest = state.shaped_rest.row(i).transpose();
        for (int k = tmpl.skin_offsets[i]; k < tmpl.skin_offsets[i + 1]; ++k) {
            const auto& inf = tmpl.skin[k];
            d_rot[inf.bone].noalias() += inf.weight * gi * rest.transpose();
            d_trans[inf.bone] += inf.weight * gi;
            if (want_shape)
                d_rest.row(i) += inf.weight * (state.bone_rotation[inf.bone].transpose() * gi).transpose();
        }
    }

    // Chain: Rot_j = Rot_p R_j, t_j = Rot_p (J_j - R_j J_j) + t_p
    Eigen::Matrix<double, kJointCount, 3> d_joints = Eigen::Matrix<double, kJointCount, 3>::Zero();
    for (int j = kJointCount - 1; j >= 1; --j) {
        const int p = kParents[j];
        const Mat3& r = state.local_rotation[j];
        const Vec3 pivot = state.shaped_joints.row(j).transpose();
        const Vec3 kt = pivot - r * pivot;
        d_rot[p] += d_rot[j] * r.transpose() + d_trans[j] * kt.transpose();
        d_trans[p] += d_trans[j];
        const Mat3 d_krot = state.bone_rotation[p].transpose() * d_rot[j];
        const Vec3 d_kt = state.bone_rotation[p].transpose() * d_trans[j];
        if (want_fingers) {
            const Mat3 d_r = d_krot - d_kt * pivot.transpose();
            const auto dr = rodrigues_derivatives(state.params.fingers.joint_rotations.row(j - 1).transpose());
            for (int k = 0; k < 3; ++k)
                out.fingers(j - 1, k) = (dr[k].array() * d_r.array()).sum();
        }
        if (want_shape)
            d_joints.row(j) += (d_kt - r.transpose() * d_kt).transpose();
    }

    if (want_shape) {
        Eigen::VectorXd flat(3 * nv);
        for (int i = 0; i < nv; ++i)
            flat.segment<3>(3 * i) = d_rest.row(i).transpose();
        Eigen::Matrix<double, 3 * kJointCount, 1> jflat;
        for (int j = 0; j < kJointCount; ++j)
            jflat.segment<3>(3 * j) = d_joints.row(j).transpose();
        out.shape += g.vertex_shape_dirs.transpose() * flat + g.joint_shape_dirs.transpose() * jflat;
    }
    return out;
}

Points hand_vertex_jvp(const HandTemplate& tmpl, const HandPoseState& state, const HandParams& tangent,
                       const Vec3& translation_tangent)
{
    const SideGeometry& g = tmpl.side(state.side);
    const int nv = tmpl.vertex_count();
    const Points d_rest = shaped(Points::Zero(nv, 3), g.vertex_shape_dirs, tangent.shape.coefficients);
    const Eigen::Matrix<double, 3 * kJointCount, 1> jflat = g.joint_shape_dirs * tangent.shape.coefficients;

    std::array<Mat3, kJointCount> d_rot;
    std::array<Vec3, kJointCount> d_trans;
    d_rot[0].setZero();
    d_trans[0].setZero();
    for (int j = 1; j < kJointCount; ++j) {
        const int p = kParents[j];
        const Mat3& r = state.local_rotation[j];
        const auto dr = rodrigues_derivatives(state.params.fingers.joint_rotations.row(j - 1).transpose());
        Mat3 d_r = Mat3::Zero();
        for (int k = 0; k < 3; ++k)
            d_r += tangent.fingers.joint_rotations(j - 1, k) * dr[k];
        const Vec3 pivot = state.shaped_joints.row(j).transpose();
        const Vec3 d_pivot = jflat.segment<3>(3 * j);
        const Vec3 kt = pivot - r * pivot;
        const Vec3 d_kt = d_pivot - d_r * pivot - r * d_pivot;
        d_rot[j] = d_rot[p] * r + state.bone_rotation[p] * d_r;
        d_trans[j] = d_rot[p] * kt + state.bone_rotation[p] * d_kt + d_trans[p];
    }

    Mat3 d_orient = Mat3::Zero();
    const auto dphi = rodrigues_derivatives(state.params.orientation.axis_angle);
    for (int k = 0; k < 3; ++k)
        d_orient += tangent.orientation.axis_angle[k] * dphi[k];

    Points out(nv, 3);
    for (int i = 0; i < nv; ++i) {
        const Vec3 rest = state.shaped_rest.row(i).transpose();
        const Vec3 drest = d_rest.row(i).transpose();
        Vec3 du = Vec3::Zero();
        for (int k = tmpl.skin_offsets[i]; k < tmpl.skin_offsets[i + 1]; ++k) {
            const auto& inf = tmpl.skin[k];
            du += inf.weight * (d_rot[inf.bone] * rest + state.bone_rotation[inf.bone] * drest + d_trans[inf.bone]);
        }
        const Vec3 u = state.local_vertices.row(i).transpose();
        out.row(i) = (d_orient * u + state.orientation * du + translation_tangent).transpose();
    }
    return out;
}

Points forward_jvp(const HandTemplate& tmpl, const TwoHandParams& params, const TwoHandParams& tangent)
{
    const auto left = pose_hand(tmpl, Side::Left, params.left, params.translation);
    const auto right = pose_hand(tmpl, Side::Right, params.right, Vec3::Zero());
    const int nv = tmpl.vertex_count();
    Points out(2 * nv, 3);
    out.topRows(nv) = hand_vertex_jvp(tmpl, left, tangent.left, tangent.translation);
    out.bottomRows(nv) = hand_vertex_jvp(tmpl, right, tangent.right, Vec3::Zero());
    return out;
}

}  // namespace twohand
