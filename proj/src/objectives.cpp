#include "twohand/objectives.hpp"

#include <cmath>
#include <string>

#include "twohand/rotation.hpp"

namespace twohand {
namespace {

void mix(std::uint64_t& h, std::uint64_t x)
{
    for (int k = 0; k < 8; ++k) {
        h ^= (x >> (8 * k)) & 0xffu;
        h *= 1099511628211ull;
    }
}

double sign_of(double x)
{
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

// Cells of the query points whose interpolation stencil touches a nonzero voxel.
void mix_sample_cells(std::uint64_t& h, const HandSdf& field, const Points& queries)
{
    const VoxelSdf& g = field.grid();
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const PsiSample s = sample_psi_detail(g, field.to_grid(queries.row(i).transpose()));
        if (!s.in_grid)
            continue;
        bool touches = false;
        for (int corner = 0; corner < 8 && !touches; ++corner)
            touches = g.value(s.cell[0] + (corner >> 2 & 1), s.cell[1] + (corner >> 1 & 1), s.cell[2] + (corner & 1))
                > 0.0;
        if (!touches)
            continue;
        mix(h, static_cast<std::uint64_t>(i));
        for (int a = 0; a < 3; ++a)
            mix(h, static_cast<std::uint64_t>(s.cell[a]));
    }
}

}  // namespace

JointTargets make_targets(const Joints3& joints_3d, const WeakPerspectiveCamera& camera, const Visibility& visibility)
{
    JointTargets t;
    t.joints_3d = joints_3d;
    t.joints_2d = project_weak_perspective(joints_3d, camera);
    t.visibility = visibility;
    t.translation_target = (joints_3d.row(0) - joints_3d.row(kKeypointCount)).transpose();
    t.camera = camera;
    return t;
}

void validate(const ObjectiveWeights& w)
{
    for (double x : {w.collision, w.joints_2d, w.joints_3d, w.translation, w.shape_reg, w.finger})
        if (!(x >= 0.0) || !std::isfinite(x))
            throw InvalidArgument("objective weights must be finite and non-negative");
    if (!(w.step_size > 0.0) || !std::isfinite(w.step_size))
        throw InvalidArgument("step size must be positive");
    if (w.max_iterations < 0)
        throw InvalidArgument("iteration budget must be non-negative");
}

ObjectiveWeights default_stage_weights(Factor f)
{
    ObjectiveWeights w;
    switch (f) {
    case Factor::Translation:
        w.step_size = 1e-4;
        w.collision = 0.1;
        break;
    case Factor::Fingers:
        w.finger = 1e5;
        break;
    case Factor::Orientation:
    case Factor::Shape:
        break;
    }
    return w;
}

FingerConstraint finger_constraint(const Vec3& pa, const Vec3& pb, const Vec3& pc, const Vec3& pd)
{
    const Vec3 ab = pb - pa, bc = pc - pb, cd = pd - pc;
    const Vec3 n1 = ab.cross(bc);
    FingerConstraint out;
    out.c1 = n1.dot(cd);
    out.c2 = n1.dot(bc.cross(cd));
    out.penalty = std::abs(out.c1) - std::min(out.c2, 0.0);
    return out;
}

double finger_penalty(const Joints3& joints)
{
    double total = 0.0;
    for (int hand = 0; hand < 2; ++hand) {
        const int off = hand * kKeypointCount;
        for (const auto& ch : kFingerChains)
            total += finger_constraint(joints.row(off + ch[0]).transpose(), joints.row(off + ch[1]).transpose(),
                                       joints.row(off + ch[2]).transpose(), joints.row(off + ch[3]).transpose())
                         .penalty;
    }
    return total;
}

double finger_penalty(const Joints3& joints, double weight, Joints3& grad)
{
    double total = 0.0;
    for (int hand = 0; hand < 2; ++hand) {
        const int off = hand * kKeypointCount;
        for (const auto& ch : kFingerChains) {
            const Vec3 pa = joints.row(off + ch[0]).transpose(), pb = joints.row(off + ch[1]).transpose();
            const Vec3 pc = joints.row(off + ch[2]).transpose(), pd = joints.row(off + ch[3]).transpose();
            const FingerConstraint fc = finger_constraint(pa, pb, pc, pd);
            total += fc.penalty;
            const Vec3 ab = pb - pa, bc = pc - pb, cd = pd - pc;
            const Vec3 n1 = ab.cross(bc), n2 = bc.cross(cd);
            const double s1 = sign_of(fc.c1);
            const double s2 = fc.c2 < 0.0 ? -1.0 : 0.0;
            const Vec3 g_ab = weight * (s1 * n2 + s2 * bc.cross(n2));
            const Vec3 g_bc = weight * (s1 * cd.cross(ab) + s2 * (n2.cross(ab) + cd.cross(n1)));
            const Vec3 g_cd = weight * (s1 * n1 + s2 * n1.cross(bc));
            grad.row(off + ch[0]) -= g_ab.transpose();
            grad.row(off + ch[1]) += (g_ab - g_bc).transpose();
            grad.row(off + ch[2]) += (g_bc - g_cd).transpose();
            grad.row(off + ch[3]) += g_cd.transpose();
        }
    }
    return total;
}

SupervisedLosses supervised_losses(const TwoHandParams& pred, const Joints3& pred_joints_3d,
                                   const WeakPerspectiveCamera& camera, const Annotations& gt)
{
    if (!gt.params)
        throw InvalidArgument("ground truth is missing field 'params'");
    if (!gt.translation)
        throw InvalidArgument("ground truth is missing field 'translation'");
    if (!gt.joints_3d)
        throw InvalidArgument("ground truth is missing field 'joints_3d'");
    if (!gt.joints_2d)
        throw InvalidArgument("ground truth is missing field 'joints_2d'");

    SupervisedLosses l;
    for (Side s : {Side::Left, Side::Right}) {
        const HandParams& p = pred.hand(s);
        const HandParams& g = gt.params->hand(s);
        l.params += (g.shape.coefficients - p.shape.coefficients).squaredNorm();
        for (int j = 0; j < kPoseJointCount; ++j)
            l.params += (rodrigues(g.fingers.joint_rotations.row(j).transpose())
                         - rodrigues(p.fingers.joint_rotations.row(j).transpose()))
                            .squaredNorm();
    }
    l.translation = (*gt.translation - pred.translation).squaredNorm();
    l.joints_3d = (pred_joints_3d - *gt.joints_3d).squaredNorm();
    l.shape_reg = (pred.left.shape.coefficients - pred.right.shape.coefficients).squaredNorm();
    const Points2 proj = project_weak_perspective(pred_joints_3d, camera);
    for (int j = 0; j < kTwoHandKeypoints; ++j)
        if (gt.visibility[j])
            l.joints_2d += (proj.row(j) - gt.joints_2d->row(j)).cwiseAbs().sum();
    const auto& lam = kSupervisedLambdas;
    l.total = lam[0] * l.params + lam[1] * l.translation + lam[2] * l.joints_3d + lam[3] * l.shape_reg
        + lam[4] * l.joints_2d;
    return l;
}

Objective::Objective(const HandTemplate& tmpl, JointTargets targets, ObjectiveWeights weights, GridConfig grid)
    : tmpl_(&tmpl), targets_(std::move(targets)), weights_(weights), grid_(grid)
{
    validate(weights_);
    validate(grid_);
}

void Objective::set_weights(const ObjectiveWeights& w)
{
    validate(w);
    weights_ = w;
}

std::shared_ptr<const VoxelSdf> Objective::grid_for(const HandPoseState& state) const
{
    CachedGrid& c = cache_[static_cast<int>(state.side)];
    const auto& p = state.params;
    if (!c.valid || c.shape != p.shape.coefficients || c.fingers != p.fingers.joint_rotations) {
        c.valid = false;
        c.grid = std::make_shared<const VoxelSdf>(
            voxelize_sdf(state.local_vertices, tmpl_->topology[static_cast<int>(state.side)], grid_));
        c.shape = p.shape.coefficients;
        c.fingers = p.fingers.joint_rotations;
        c.valid = true;
    }
    return c.grid;
}

ObjectiveValue Objective::evaluate(const TwoHandParams& params) const
{
    return run(params, nullptr, std::nullopt, nullptr);
}

Eigen::VectorXd Objective::gradient(const TwoHandParams& params, std::optional<Factor> active,
                                    ObjectiveValue* value) const
{
    Eigen::VectorXd g;
    const ObjectiveValue v = run(params, &g, active, nullptr);
    if (value)
        *value = v;
    return g;
}

std::uint64_t Objective::branch_signature(const TwoHandParams& params) const
{
    std::uint64_t h = 1469598103934665603ull;
    run(params, nullptr, std::nullopt, &h);
    return h;
}

ObjectiveValue Objective::run(const TwoHandParams& params, Eigen::VectorXd* grad, std::optional<Factor> active,
                              std::uint64_t* signature) const
{
    if (!params.all_finite())
        throw NonFiniteValue("parameters contain non-finite values");
    const HandTemplate& t = *tmpl_;
    const ObjectiveWeights& w = weights_;
    const HandPoseState left = pose_hand(t, Side::Left, params.left, params.translation);
    const HandPoseState right = pose_hand(t, Side::Right, params.right, Vec3::Zero());
    Joints3 joints;
    joints.topRows<kKeypointCount>() = t.joint_regressor * left.world_vertices;
    joints.bottomRows<kKeypointCount>() = t.joint_regressor * right.world_vertices;

    const int nv = t.vertex_count();
    HandAdjoint adj_l, adj_r;
    if (grad) {
        adj_l.world_vertices = Points::Zero(nv, 3);
        adj_r.world_vertices = Points::Zero(nv, 3);
        adj_l.local_vertices = Points::Zero(nv, 3);
        adj_r.local_vertices = Points::Zero(nv, 3);
    }
    Joints3 d_joints = Joints3::Zero();
    ObjectiveValue v;

    // collision: each hand's vertices sampled in the other hand's field
    const HandSdf field_l{grid_for(left), left.orientation, left.translation};
    const HandSdf field_r{grid_for(right), right.orientation, right.translation};
    const bool col_grad = grad && w.collision > 0.0;
    v.raw.collision = psi_sum_with_adjoint(field_r, right.local_vertices, t.side(Side::Right).faces,
                                           left.world_vertices, w.collision,
                                           col_grad ? &adj_l.world_vertices : nullptr, col_grad ? &adj_r : nullptr)
        + psi_sum_with_adjoint(field_l, left.local_vertices, t.side(Side::Left).faces, right.world_vertices,
                               w.collision, col_grad ? &adj_r.world_vertices : nullptr, col_grad ? &adj_l : nullptr);

    const WeakPerspectiveCamera& cam = targets_.camera;
    for (int j = 0; j < kTwoHandKeypoints; ++j) {
        if (!targets_.visibility[j])
            continue;
        for (int a = 0; a < 2; ++a) {
            const double r = cam.scale * joints(j, a) + cam.translation[a] - targets_.joints_2d(j, a);
            v.raw.joints_2d += std::abs(r);
            d_joints(j, a) += w.joints_2d * cam.scale * sign_of(r);
            if (signature && w.joints_2d > 0.0)
                mix(*signature, r > 0.0 ? 1u : (r < 0.0 ? 2u : 3u));
        }
    }
    const Joints3 diff = joints - targets_.joints_3d;
    v.raw.joints_3d = diff.squaredNorm();
    d_joints += 2.0 * w.joints_3d * diff;

    const Vec3 dtau = params.translation - targets_.translation_target;
    v.raw.translation = dtau.squaredNorm();
    adj_l.translation += 2.0 * w.translation * dtau;

    const auto dbeta = params.left.shape.coefficients - params.right.shape.coefficients;
    v.raw.shape_reg = dbeta.squaredNorm();
    adj_l.shape += 2.0 * w.shape_reg * dbeta;
    adj_r.shape -= 2.0 * w.shape_reg * dbeta;

    v.raw.finger = finger_penalty(joints, w.finger, d_joints);
    if (signature && w.finger > 0.0) {
        for (int hand = 0; hand < 2; ++hand)
            for (const auto& ch : kFingerChains) {
                const int off = hand * kKeypointCount;
                const auto fc = finger_constraint(joints.row(off + ch[0]).transpose(), joints.row(off + ch[1]).transpose(),
                                                  joints.row(off + ch[2]).transpose(), joints.row(off + ch[3]).transpose());
                mix(*signature, (fc.c1 > 0.0 ? 1u : fc.c1 < 0.0 ? 2u : 3u) | (fc.c2 < 0.0 ? 4u : 0u));
            }
    }
    if (signature && w.collision > 0.0) {
        mix(*signature, field_l.grid().signature);
        mix(*signature, field_r.grid().signature);
        mix_sample_cells(*signature, field_r, left.world_vertices);
        mix_sample_cells(*signature, field_l, right.world_vertices);
    }

    v.weighted = {w.collision * v.raw.collision, w.joints_2d * v.raw.joints_2d, w.joints_3d * v.raw.joints_3d,
                  w.translation * v.raw.translation, w.shape_reg * v.raw.shape_reg, w.finger * v.raw.finger};
    const auto& q = v.weighted;
    v.total = q.collision + q.joints_2d + q.joints_3d + q.translation + q.shape_reg + q.finger;
    if (!std::isfinite(v.total))
        throw NonFiniteValue("objective is not finite");
    if (!grad)
        return v;

    adj_l.world_vertices += t.joint_regressor.transpose() * d_joints.topRows<kKeypointCount>();
    adj_r.world_vertices += t.joint_regressor.transpose() * d_joints.bottomRows<kKeypointCount>();
    const bool want_shape = !active || *active == Factor::Shape;
    const bool want_fingers = !active || *active == Factor::Fingers;
    const HandGradient gl = backprop_hand(t, left, adj_l, want_shape, want_fingers);
    const HandGradient gr = backprop_hand(t, right, adj_r, want_shape, want_fingers);

    Eigen::VectorXd& g = *grad;
    g = Eigen::VectorXd::Zero(kParamCount);
    g.segment<3>(0) = gl.translation;
    g.segment<3>(3) = gl.orientation;
    g.segment<3>(6) = gr.orientation;
    for (int j = 0; j < kPoseJointCount; ++j) {
        g.segment<3>(9 + 3 * j) = gl.fingers.row(j).transpose();
        g.segment<3>(54 + 3 * j) = gr.fingers.row(j).transpose();
    }
    g.segment<kShapeDim>(99) = gl.shape;
    g.segment<kShapeDim>(109) = gr.shape;
    if (active) {
        const FactorSlice s = factor_slice(*active);
        Eigen::VectorXd masked = Eigen::VectorXd::Zero(kParamCount);
        masked.segment(s.offset, s.size) = g.segment(s.offset, s.size);
        g = masked;
    }
    if (!g.allFinite())
        throw NonFiniteValue("objective gradient is not finite");
    return v;
}

}  // namespace twohand
