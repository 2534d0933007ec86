#include <doctest.h>

#include <set>

#include "twohand/collision.hpp"
#include "twohand/harness.hpp"

using namespace twohand;

namespace {

const HandTemplate& tmpl()
{
    static const HandTemplate t = build_template();
    return t;
}

SceneSpec spec_for(std::uint64_t seed, Preset preset, double noise = 0.0)
{
    SceneSpec s;
    s.seed = seed;
    s.preset = preset;
    s.noise_std_mm = noise;
    return s;
}

bool same_params(const TwoHandParams& a, const TwoHandParams& b)
{
    return pack(a) == pack(b);
}

}  // namespace

TEST_SUITE("harness")
{
    TEST_CASE("preset names")
    {
        for (Preset p : {Preset::Clasp, Preset::Interlace, Preset::PointTouch, Preset::NearMiss})
            CHECK(parse_preset(preset_name(p)) == p);
        CHECK(parse_preset("point-touch") == Preset::PointTouch);
        CHECK_FALSE(parse_preset("hug").has_value());
    }

    TEST_CASE("scene seeds are distinct and stable")
    {
        std::set<std::uint64_t> seen;
        for (std::uint64_t i = 0; i < 1000; ++i)
            seen.insert(scene_seed(7, i));
        CHECK(seen.size() == 1000);
        CHECK(scene_seed(7, 3) == scene_seed(7, 3));
        CHECK(scene_seed(7, 3) != scene_seed(8, 3));
    }

    TEST_CASE("zero perturbation and noise reproduce the ground truth")
    {
        for (Preset p : {Preset::Clasp, Preset::Interlace, Preset::PointTouch, Preset::NearMiss}) {
            SceneSpec s = spec_for(11, p);
            s.perturbation = {0.0, 0.0, 0.0, 0.0};
            const Scene sc = generate_scene(s, tmpl());
            CHECK(same_params(sc.initial, sc.gt));
            const Joints3 j = forward(tmpl(), sc.gt).joints_3d;
            CHECK(sc.targets.joints_3d == j);
            CHECK(sc.targets.joints_2d == project_weak_perspective(j, WeakPerspectiveCamera{}));
        }
    }

    TEST_CASE("ground truth is nearly collision-free and initial estimates collide")
    {
        int colliding = 0, total = 0;
        for (Preset p : {Preset::Clasp, Preset::Interlace, Preset::PointTouch, Preset::NearMiss})
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                const Scene sc = generate_scene(spec_for(seed, p, 10.0), tmpl());
                const PenetrationReport g = penetration_metrics(forward(tmpl(), sc.gt), sc.spec.grid);
                CHECK(g.ave_p <= kGroundTruthMaxPenetrationMm);
                CHECK(g.max_p <= kGroundTruthMaxPenetrationMm);
                const PenetrationReport i = penetration_metrics(forward(tmpl(), sc.initial), sc.spec.grid);
                CHECK(std::isfinite(i.ave_p));
                colliding += i.ave_p > 0.0;
                ++total;
                CHECK(sc.attempts >= 1);
                CHECK(sc.attempts <= kMaxGenerationAttempts);
            }
        MESSAGE(colliding << " of " << total << " initial estimates collide");
        CHECK(colliding * 2 > total);
    }

    TEST_CASE("clasp with a 15 mm translation perturbation collides")
    {
        SceneSpec s = spec_for(4, Preset::Clasp);
        s.perturbation = {0.015, 0.0, 0.0, 0.0};
        const Scene sc = generate_scene(s, tmpl());
        CHECK(penetration_metrics(forward(tmpl(), sc.initial), s.grid).ave_p > 0.0);
        CHECK(penetration_metrics(forward(tmpl(), sc.gt), s.grid).ave_p <= 0.5);
        CHECK(sc.initial.left.fingers.joint_rotations == sc.gt.left.fingers.joint_rotations);
        CHECK(sc.initial.right.shape.coefficients == sc.gt.right.shape.coefficients);
    }

    TEST_CASE("generation is deterministic")
    {
        const Scene a = generate_scene(spec_for(42, Preset::Interlace, 20.0), tmpl());
        const Scene b = generate_scene(spec_for(42, Preset::Interlace, 20.0), tmpl());
        CHECK(same_params(a.gt, b.gt));
        CHECK(same_params(a.initial, b.initial));
        CHECK(a.targets.joints_3d == b.targets.joints_3d);
        CHECK(a.targets.joints_2d == b.targets.joints_2d);
        CHECK(a.attempts == b.attempts);
    }

    TEST_CASE("noise levels share everything but the noise")
    {
        const Scene a = generate_scene(spec_for(9, Preset::Clasp, 0.0), tmpl());
        const Scene b = generate_scene(spec_for(9, Preset::Clasp, 30.0), tmpl());
        CHECK(same_params(a.gt, b.gt));
        CHECK(same_params(a.initial, b.initial));
        CHECK(a.targets.joints_3d != b.targets.joints_3d);
        // same draws, scaled
        const Joints3 n20 = generate_scene(spec_for(9, Preset::Clasp, 20.0), tmpl()).targets.joints_3d - a.targets.joints_3d;
        const Joints3 n30 = b.targets.joints_3d - a.targets.joints_3d;
        CHECK((1.5 * n20 - n30).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("target noise matches the declared level")
    {
        for (double level : {10.0, 40.0}) {
            double sum_sq = 0.0;
            int count = 0;
            for (std::uint64_t i = 0; i < 40; ++i) {
                const Scene sc = generate_scene(spec_for(scene_seed(3, i), Preset::Clasp, level), tmpl());
                const Joints3 d = sc.targets.joints_3d - forward(tmpl(), sc.gt).joints_3d;
                sum_sq += d.squaredNorm();
                count += 3 * 42;
            }
            const double est = 1e3 * std::sqrt(sum_sq / count);
            MESSAGE("declared " << level << " mm, estimated " << est << " mm");
            CHECK(std::abs(est - level) <= 0.15 * level);
        }
    }

    TEST_CASE("invalid specs are rejected")
    {
        SceneSpec s = spec_for(1, Preset::Clasp);
        s.noise_std_mm = -1.0;
        CHECK_THROWS_AS(generate_scene(s, tmpl()), InvalidArgument);
        s = spec_for(1, Preset::Clasp);
        s.perturbation.fingers = -0.1;
        CHECK_THROWS_AS(generate_scene(s, tmpl()), InvalidArgument);
    }

    TEST_CASE("one unperturbed scene refines to itself")
    {
        CorpusSpec c;
        c.count = 1;
        c.perturbation = {0.0, 0.0, 0.0, 0.0};
        const CorpusReport r = run_experiment(tmpl(), c, default_refine_config());
        REQUIRE(r.scenes.size() == 1);
        CHECK(r.summary.accepted_stages == 0);
        CHECK(r.summary.refined.mpjpe == r.summary.initial.mpjpe);
        CHECK(r.summary.refined.i_mpjpe == r.summary.initial.i_mpjpe);
        CHECK(r.summary.refined.ave_p == r.summary.initial.ave_p);
        CHECK(r.summary.initial.mpjpe < 1e-9);
    }

    TEST_CASE("clasp corpus improves collisions without hurting joints")
    {
        CorpusSpec c;
        c.count = 40;
        c.base_seed = 17;
        c.noise_std_mm = 10.0;
        const CorpusReport r = run_experiment(tmpl(), c, default_refine_config());
        CHECK(r.summary.scenes + r.summary.generation_failures == 40);
        CHECK(r.summary.accepted_stages > 0);
        CHECK(r.summary.never_worse_violations == 0);
        CHECK(r.summary.refined.ave_p < r.summary.initial.ave_p);
        CHECK(r.summary.refined.i_mpjpe <= r.summary.initial.i_mpjpe);

        // reproducible bit for bit
        CorpusSpec small = c;
        small.count = 3;
        const CorpusReport a = run_experiment(tmpl(), small, default_refine_config());
        const CorpusReport b = run_experiment(tmpl(), small, default_refine_config());
        CHECK(a.summary.refined.i_mpjpe == b.summary.refined.i_mpjpe);
        CHECK(a.summary.refined.ave_p == b.summary.refined.ave_p);
        for (std::size_t i = 0; i < a.scenes.size(); ++i)
            CHECK(same_params(a.scenes[i].report.final_params, b.scenes[i].report.final_params));
        for (std::size_t i = 0; i < a.scenes.size(); ++i)
            CHECK(same_params(a.scenes[i].report.final_params, r.scenes[i].report.final_params));
    }

    TEST_CASE("noise sweep rows")
    {
        CorpusSpec c;
        c.count = 4;
        c.presets = {Preset::Clasp, Preset::Interlace};
        const auto rows = run_noise_sweep(tmpl(), c, default_refine_config(), {0.0, 20.0});
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].noise_std_mm == 0.0);
        CHECK(rows[1].noise_std_mm == 20.0);
        CHECK(rows[0].summary.initial.ave_p == rows[1].summary.initial.ave_p);
        CHECK(rows[0].summary.initial.i_mpjpe == rows[1].summary.initial.i_mpjpe);
    }
}
