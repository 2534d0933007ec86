#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "twohand/hand_model.hpp"
#include "twohand/mesh.hpp"
#include "twohand/rotation.hpp"

using namespace twohand;

namespace {

const HandTemplate& tmpl()
{
    static const HandTemplate t = build_template();
    return t;
}

void check_skin_weights(const HandTemplate& t)
{
    const Eigen::MatrixXd w = t.skin_weight_matrix();
    CHECK(w.rows() == t.vertex_count());
    CHECK(w.cols() == kJointCount);
    CHECK(w.minCoeff() >= 0.0);
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
}

}  // namespace

TEST_SUITE("hand_model")
{
    TEST_CASE("default template sizes and invariants")
    {
        const HandTemplate& t = tmpl();
        CHECK(t.vertex_count() == 778);
        CHECK(t.side(Side::Left).rest_vertices.rows() == 778);
        CHECK(t.side(Side::Right).rest_joints.rows() == 16);
        CHECK(t.joint_regressor.rows() == 21);
        CHECK(t.joint_regressor.cols() == 778);
        CHECK((t.joint_regressor.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        check_skin_weights(t);
        for (Side s : {Side::Left, Side::Right}) {
            const Faces& f = t.side(s).faces;
            CHECK(is_watertight(f));
            for (const auto& face : f)
                for (int k : face)
                    CHECK((k >= 0 && k < 778));
        }
    }

    TEST_CASE("template is deterministic")
    {
        const HandTemplate a = build_template(), b = build_template();
        CHECK(a.content_hash() == b.content_hash());
        CHECK(a.side(Side::Right).rest_vertices == b.side(Side::Right).rest_vertices);
        CHECK(a.joint_regressor == b.joint_regressor);
    }

    TEST_CASE("wider bones widen the mesh and keep valid skinning")
    {
        TemplateConfig cfg;
        cfg.finger_width_scale = 5.0;
        const HandTemplate wide = build_template(cfg);
        const Points& a = tmpl().side(Side::Right).rest_vertices;
        const Points& b = wide.side(Side::Right).rest_vertices;
        const Vec3 ea = a.colwise().maxCoeff() - a.colwise().minCoeff();
        const Vec3 eb = b.colwise().maxCoeff() - b.colwise().minCoeff();
        CHECK(eb.x() > ea.x());
        CHECK(eb.z() > ea.z());
        check_skin_weights(wide);
        CHECK(is_watertight(wide.side(Side::Right).faces));
    }

    TEST_CASE("invalid template configs are rejected")
    {
        TemplateConfig cfg;
        cfg.palm_length = 0.0;
        CHECK_THROWS_AS(build_template(cfg), InvalidArgument);
        cfg = {};
        cfg.vertex_budget = 50;
        CHECK_THROWS_AS(build_template(cfg), InvalidArgument);
        cfg = {};
        cfg.finger_width_scale = -1.0;
        CHECK_THROWS_AS(build_template(cfg), InvalidArgument);
    }

    TEST_CASE("left side mirrors the right")
    {
        const Points& l = tmpl().side(Side::Left).rest_vertices;
        const Points& r = tmpl().side(Side::Right).rest_vertices;
        CHECK((l.col(0) + r.col(0)).cwiseAbs().maxCoeff() == 0.0);
        CHECK(l.rightCols<2>() == r.rightCols<2>());
    }

    TEST_CASE("identity pose gives the rest meshes and rest keypoints")
    {
        const TwoHandMesh m = forward(tmpl(), TwoHandParams{});
        // skin weights sum to one only up to rounding
        CHECK((m.left_vertices - tmpl().side(Side::Left).rest_vertices).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((m.right_vertices - tmpl().side(Side::Right).rest_vertices).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((m.joints_3d.topRows<21>() - tmpl().rest_keypoints(Side::Left)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((m.joints_3d.bottomRows<21>() - tmpl().rest_keypoints(Side::Right)).cwiseAbs().maxCoeff() < 1e-12);
        // the wrist is the frame origin
        CHECK(tmpl().side(Side::Right).rest_joints.row(0).norm() == 0.0);
    }

    TEST_CASE("translation moves the left hand exactly")
    {
        TwoHandParams p;
        p.translation = Vec3(0.2, 0.0, 0.0);
        const TwoHandMesh m = forward(tmpl(), p);
        Points expected = tmpl().side(Side::Left).rest_vertices;
        expected.col(0).array() += 0.2;
        CHECK((m.left_vertices - expected).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((m.right_vertices - tmpl().side(Side::Right).rest_vertices).cwiseAbs().maxCoeff() < 1e-15);
    }

    TEST_CASE("wrist rotation matches a rigid transform about the wrist")
    {
        TwoHandParams p;
        p.right.orientation.axis_angle = Vec3(0.3, -0.7, 0.2);
        const TwoHandMesh m = forward(tmpl(), p);
        const Points& rest = tmpl().side(Side::Right).rest_vertices;
        double err = 0.0;
        for (Eigen::Index i = 0; i < rest.rows(); ++i)
            err = std::max(err, (m.right_vertices.row(i).transpose() -
                                 oracle::quat_rotate(p.right.orientation.axis_angle, rest.row(i).transpose()))
                                    .norm());
        CHECK(err < 1e-15);
    }

    TEST_CASE("joint regression: linear, affine-equivariant, naive oracle")
    {
        std::mt19937_64 rng(21);
        const TwoHandMesh m = forward(tmpl(), oracle::random_params(rng));
        CHECK((regress_joints(tmpl(), m) - m.joints_3d).cwiseAbs().maxCoeff() == 0.0);

        TwoHandMesh shifted = m;
        const Vec3 c(0.1, -0.3, 0.25);
        shifted.left_vertices.rowwise() += c.transpose();
        shifted.right_vertices.rowwise() += c.transpose();
        const auto js = regress_joints(tmpl(), shifted);
        CHECK(((js.rowwise() - c.transpose()) - m.joints_3d).cwiseAbs().maxCoeff() < 1e-12);

        const Eigen::MatrixXd& reg = tmpl().joint_regressor;
        double err = 0.0;
        for (int k = 0; k < 21; ++k)
            for (int a = 0; a < 3; ++a) {
                double l = 0.0, r = 0.0;
                for (int v = 0; v < tmpl().vertex_count(); ++v) {
                    l += reg(k, v) * m.left_vertices(v, a);
                    r += reg(k, v) * m.right_vertices(v, a);
                }
                err = std::max({err, std::abs(l - m.joints_3d(k, a)), std::abs(r - m.joints_3d(21 + k, a))});
            }
        CHECK(err < 1e-12);

        TwoHandMesh bad = m;
        bad.left_vertices.conservativeResize(100, 3);
        CHECK_THROWS_AS(regress_joints(tmpl(), bad), DimensionMismatch);
    }

    TEST_CASE("weak-perspective projection")
    {
        Points j(2, 3);
        j << 1.0, 1.0, 7.0, -2.0, 0.5, 3.0;
        const Points2 a = project_weak_perspective(j, {1.0, Vec2(0.0, 0.0)});
        CHECK(a(0, 0) == 1.0);
        CHECK(a(1, 1) == 0.5);
        const Points2 b = project_weak_perspective(j, {2.0, Vec2(10.0, 5.0)});
        CHECK(b(0, 0) == 12.0);
        CHECK(b(0, 1) == 7.0);
        const Points2 single = project_weak_perspective(j.row(1), {2.0, Vec2(10.0, 5.0)});
        CHECK(single.row(0) == b.row(1));
    }

    TEST_CASE("skinning matches the naive per-vertex oracle")
    {
        std::mt19937_64 rng(22);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const TwoHandParams p = oracle::random_params(rng);
            const TwoHandMesh m = forward(tmpl(), p);
            const Points l = oracle::naive_skinning(tmpl(), Side::Left, p.left, p.translation);
            const Points r = oracle::naive_skinning(tmpl(), Side::Right, p.right, Vec3::Zero());
            worst = std::max({worst, (l - m.left_vertices).cwiseAbs().maxCoeff(),
                              (r - m.right_vertices).cwiseAbs().maxCoeff()});
        }
        CHECK(worst < 1e-12);
    }

    TEST_CASE("rigid invariance under a global rotation")
    {
        std::mt19937_64 rng(23);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            const TwoHandParams p = oracle::random_params(rng);
            const Mat3 r = rodrigues(Vec3(n(rng), n(rng), n(rng)));
            TwoHandParams q = p;
            q.left.orientation.axis_angle = rotation_log(r * rodrigues(p.left.orientation.axis_angle));
            q.right.orientation.axis_angle = rotation_log(r * rodrigues(p.right.orientation.axis_angle));
            q.translation = r * p.translation;
            const TwoHandMesh a = forward(tmpl(), p), b = forward(tmpl(), q);
            CHECK((a.left_vertices * r.transpose() - b.left_vertices).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((a.right_vertices * r.transpose() - b.right_vertices).cwiseAbs().maxCoeff() < 1e-9);
            CHECK((a.joints_3d * r.transpose() - b.joints_3d).cwiseAbs().maxCoeff() < 1e-9);
        }
    }

    TEST_CASE("vertex JVPs match central differences")
    {
        std::mt19937_64 rng(24);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            const TwoHandParams p = oracle::random_params(rng);
            Eigen::VectorXd dir(kParamCount);
            for (int i = 0; i < kParamCount; ++i)
                dir[i] = n(rng);
            const Points jvp = forward_jvp(tmpl(), p, unpack(dir));
            const double h = 1e-5;
            const TwoHandMesh mp = forward(tmpl(), unpack(pack(p) + h * dir));
            const TwoHandMesh mm = forward(tmpl(), unpack(pack(p) - h * dir));
            const int nv = tmpl().vertex_count();
            Points fd(2 * nv, 3);
            fd.topRows(nv) = (mp.left_vertices - mm.left_vertices) / (2 * h);
            fd.bottomRows(nv) = (mp.right_vertices - mm.right_vertices) / (2 * h);
            CHECK((jvp - fd).norm() / fd.norm() <= 1e-4);
        }
    }

    TEST_CASE("reverse pass is the adjoint of the JVP")
    {
        std::mt19937_64 rng(25);
        std::normal_distribution<double> n(0.0, 1.0);
        const TwoHandParams p = oracle::random_params(rng);
        const HandPoseState s = pose_hand(tmpl(), Side::Left, p.left, p.translation);
        HandAdjoint a;
        a.world_vertices = Points::NullaryExpr(tmpl().vertex_count(), 3, [&]() { return n(rng); });
        const HandGradient g = backprop_hand(tmpl(), s, a);
        Eigen::VectorXd dir(kParamCount);
        for (int i = 0; i < kParamCount; ++i)
            dir[i] = n(rng);
        const TwoHandParams d = unpack(dir);
        const Points jl = hand_vertex_jvp(tmpl(), s, d.left, d.translation);
        const double lhs = (a.world_vertices.array() * jl.array()).sum();
        const double rhs = g.shape.dot(d.left.shape.coefficients) + g.orientation.dot(d.left.orientation.axis_angle) +
            g.translation.dot(d.translation) + (g.fingers.array() * d.left.fingers.joint_rotations.array()).sum();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }

    TEST_CASE("flat parameter layout")
    {
        std::mt19937_64 rng(26);
        const TwoHandParams p = oracle::random_params(rng);
        const Eigen::VectorXd x = pack(p);
        CHECK(x.size() == 119);
        CHECK(pack(unpack(x)) == x);
        CHECK(x.segment<3>(0) == p.translation);
        CHECK(x.segment<3>(3) == p.left.orientation.axis_angle);
        CHECK(x.segment<3>(6) == p.right.orientation.axis_angle);
        CHECK(x[9] == p.left.fingers.joint_rotations(0, 0));
        CHECK(x[54] == p.right.fingers.joint_rotations(0, 0));
        CHECK(x[99] == p.left.shape.coefficients[0]);
        CHECK(x[109] == p.right.shape.coefficients[0]);
        int total = 0;
        for (Factor f : kAllFactors)
            total += factor_slice(f).size;
        CHECK(total == kParamCount);
        const TwoHandParams zero;
        const TwoHandParams mixed = replace_factor(zero, p, Factor::Fingers);
        CHECK(mixed.left.fingers.joint_rotations == p.left.fingers.joint_rotations);
        CHECK(mixed.translation == Vec3::Zero());
        CHECK(parse_factor("theta") == Factor::Fingers);
        CHECK_FALSE(parse_factor("gamma").has_value());
    }
}
