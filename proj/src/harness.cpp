#include "twohand/harness.hpp"

#include <cmath>
#include <random>

#include "twohand/rotation.hpp"

namespace twohand {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double std) { return std * std::normal_distribution<double>(0.0, 1.0)(rng_); }
    Vec3 normal3(double std) { return {normal(std), normal(std), normal(std)}; }
    double sign() { return uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0; }

private:
    std::mt19937_64 rng_;
};

Mat3 rot(const Vec3& axis, double angle)
{
    return rodrigues(axis.normalized() * angle);
}

struct FingerPrior {
    double mcp_lo, mcp_hi;
    double pip_lo, pip_hi;
    double dip_lo, dip_hi;
    double spread;  ///< abduction magnitude at the knuckles
};

// Flexion curls the fingers toward the palm side (-z), a rotation about -x.
void sample_fingers(Sampler& s, const HandTemplate& tmpl, const std::array<FingerPrior, 5>& prior, FingerPose& pose)
{
    const auto rest = tmpl.rest_keypoints(Side::Right);
    for (int f = 0; f < 5; ++f) {
        const auto& ch = kFingerChains[f];
        const FingerPrior& p = prior[f];
        if (f == 0) {
            // thumb: small swings about axes normal to each bone
            for (int step = 3; step >= 1; --step) {
                const int j = ch[step];
                const Vec3 bone = (rest.row(ch[step - 1]) - rest.row(j)).transpose().normalized();
                const Vec3 axis = Vec3(1.0, 0.0, 0.0).cross(bone).cross(bone).normalized();
                const double flex = step == 3 ? s.uniform(p.mcp_lo, p.mcp_hi)
                    : step == 2             ? s.uniform(p.pip_lo, p.pip_hi)
                                            : s.uniform(p.dip_lo, p.dip_hi);
                pose.joint_rotations.row(j - 1) = (flex * axis).transpose();
            }
            continue;
        }
        const double spread = (f - 2.5) / 1.5 * p.spread + s.normal(0.03);
        pose.joint_rotations.row(ch[3] - 1) = Vec3(-s.uniform(p.mcp_lo, p.mcp_hi), 0.0, spread).transpose();
        pose.joint_rotations.row(ch[2] - 1) = Vec3(-s.uniform(p.pip_lo, p.pip_hi), 0.0, 0.0).transpose();
        pose.joint_rotations.row(ch[1] - 1) = Vec3(-s.uniform(p.dip_lo, p.dip_hi), 0.0, 0.0).transpose();
    }
}

std::array<FingerPrior, 5> uniform_prior(const FingerPrior& p)
{
    return {p, p, p, p, p};
}

struct Layout {
    TwoHandParams params;
    Vec3 start = Vec3::Zero();  ///< translation with the hands overlapping
    Vec3 axis = Vec3::UnitZ();  ///< direction that separates them
    double gap_lo = 0.0, gap_hi = 0.0015;
};

Layout sample_layout(Preset preset, Sampler& s, const HandTemplate& tmpl)
{
    Layout l;
    TwoHandParams& p = l.params;
    HandShape shape;
    for (int k = 0; k < kShapeDim; ++k)
        shape.coefficients[k] = s.normal(0.5);
    p.left.shape = p.right.shape = shape;
    for (int k = 0; k < kShapeDim; ++k) {
        p.left.shape.coefficients[k] += s.normal(0.05);
        p.right.shape.coefficients[k] += s.normal(0.05);
    }
    const Mat3 right_tilt = rodrigues(s.normal3(0.1));
    p.right.orientation.axis_angle = rotation_log(right_tilt);

    switch (preset) {
    case Preset::Clasp: {
        const FingerPrior fp{0.2, 0.8, 0.2, 0.8, 0.1, 0.5, 0.05};
        sample_fingers(s, tmpl, uniform_prior(fp), p.left.fingers);
        sample_fingers(s, tmpl, uniform_prior(fp), p.right.fingers);
        const Mat3 facing = rot(Vec3::UnitY(), s.sign() * s.uniform(2.6, 2.95));
        p.left.orientation.axis_angle = rotation_log(right_tilt * facing * rodrigues(s.normal3(0.05)));
        l.start = right_tilt * Vec3(s.uniform(-0.01, 0.01), s.uniform(-0.02, 0.02), 0.0);
        l.axis = right_tilt * Vec3(0.0, 0.0, -1.0);
        break;
    }
    case Preset::Interlace: {
        const FingerPrior fp{0.0, 0.3, 0.0, 0.3, 0.0, 0.2, 0.2};
        sample_fingers(s, tmpl, uniform_prior(fp), p.left.fingers);
        sample_fingers(s, tmpl, uniform_prior(fp), p.right.fingers);
        const Mat3 facing = rot(Vec3::UnitY(), s.sign() * s.uniform(2.6, 2.95));
        const Mat3 cross = rot(Vec3::UnitZ(), s.sign() * s.uniform(0.6, 1.2));
        p.left.orientation.axis_angle = rotation_log(right_tilt * cross * facing);
        l.start = right_tilt * Vec3(s.uniform(-0.01, 0.01), s.uniform(0.0, 0.03), 0.0);
        l.axis = right_tilt * Vec3(0.0, 0.0, -1.0);
        break;
    }
    case Preset::PointTouch: {
        std::array<FingerPrior, 5> right_prior = uniform_prior({1.0, 1.4, 1.2, 1.6, 0.6, 1.0, 0.0});
        right_prior[0] = {0.3, 0.6, 0.3, 0.6, 0.2, 0.4, 0.0};
        right_prior[1] = {0.0, 0.15, 0.0, 0.15, 0.0, 0.1, 0.0};
        sample_fingers(s, tmpl, right_prior, p.right.fingers);
        sample_fingers(s, tmpl, uniform_prior({0.0, 0.3, 0.0, 0.3, 0.0, 0.2, 0.05}), p.left.fingers);
        const Mat3 facing = rot(Vec3::UnitX(), -kPi / 2 + s.normal(0.1));
        p.left.orientation.axis_angle = rotation_log(facing * rodrigues(s.normal3(0.05)));
        const Vec3 tip = forward(tmpl, p).joints_3d.row(kKeypointCount + 17).transpose();
        l.start = tip + Vec3(s.uniform(-0.01, 0.01), -0.06, 0.045 + s.uniform(-0.01, 0.01));
        l.axis = Vec3::UnitY();
        break;
    }
    case Preset::NearMiss: {
        const FingerPrior fp{0.0, 0.5, 0.0, 0.5, 0.0, 0.3, 0.1};
        sample_fingers(s, tmpl, uniform_prior(fp), p.left.fingers);
        sample_fingers(s, tmpl, uniform_prior(fp), p.right.fingers);
        p.left.orientation.axis_angle = rotation_log(right_tilt * rodrigues(s.normal3(0.1)));
        l.start = right_tilt * Vec3(0.0, s.uniform(-0.02, 0.02), s.uniform(-0.01, 0.01));
        l.axis = right_tilt * Vec3::UnitX();
        l.gap_lo = 0.002;
        l.gap_hi = 0.006;
        break;
    }
    }
    return l;
}

std::optional<TwoHandParams> place_ground_truth(Layout layout, Sampler& s, const HandTemplate& tmpl,
                                                const GridConfig& grid)
{
    constexpr double kFar = 0.3;
    TwoHandParams p = layout.params;
    p.translation = layout.start;
    // Sliding the left hand is rigid, so both fields are built once.
    const TwoHandMesh base = forward(tmpl, p);
    const HandSdf right_field = build_hand_sdf(base, Side::Right, grid);
    HandSdf left_field = build_hand_sdf(base, Side::Left, grid);
    auto max_p_at = [&](double dist) {
        const Vec3 shift = dist * layout.axis;
        left_field.translation = base.frame_translation[0] + shift;
        PenetrationDepths d;
        d.left_in_right.resize(base.left_vertices.rows());
        d.right_in_left.resize(base.right_vertices.rows());
        for (Eigen::Index i = 0; i < base.left_vertices.rows(); ++i)
            d.left_in_right[i] = right_field.sample(base.left_vertices.row(i).transpose() + shift);
        for (Eigen::Index i = 0; i < base.right_vertices.rows(); ++i)
            d.right_in_left[i] = left_field.sample(base.right_vertices.row(i).transpose());
        return penetration_statistics(d).max_p;
    };
    double touch = 0.0;
    if (max_p_at(0.0) > kGroundTruthMaxPenetrationMm) {
        if (max_p_at(kFar) > kGroundTruthMaxPenetrationMm)
            return std::nullopt;
        double lo = 0.0, hi = kFar;
        for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (lo + hi);
            (max_p_at(mid) > kGroundTruthMaxPenetrationMm ? lo : hi) = mid;
        }
        touch = hi;
    }
    p.translation = layout.start + (touch + s.uniform(layout.gap_lo, layout.gap_hi)) * layout.axis;
    const PenetrationReport r = penetration_metrics(forward(tmpl, p), grid);
    if (r.ave_p > kGroundTruthMaxPenetrationMm || r.max_p > kGroundTruthMaxPenetrationMm)
        return std::nullopt;
    return p;
}

}  // namespace

const char* preset_name(Preset p)
{
    switch (p) {
    case Preset::Clasp: return "clasp";
    case Preset::Interlace: return "interlace";
    case Preset::PointTouch: return "point-touch";
    case Preset::NearMiss: return "near-miss";
    }
    return "?";
}

std::optional<Preset> parse_preset(const std::string& name)
{
    for (Preset p : {Preset::Clasp, Preset::Interlace, Preset::PointTouch, Preset::NearMiss})
        if (name == preset_name(p))
            return p;
    return std::nullopt;
}

std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index)
{
    return splitmix64(splitmix64(base_seed) + index);
}

Scene generate_scene(const SceneSpec& spec, const HandTemplate& tmpl)
{
    const PerturbationScales& ps = spec.perturbation;
    for (double x : {ps.translation, ps.orientation, ps.fingers, ps.shape, spec.noise_std_mm})
        if (!(x >= 0.0) || !std::isfinite(x))
            throw InvalidArgument("perturbation scales and noise must be finite and non-negative");

    Sampler s(splitmix64(spec.seed));
    Scene scene;
    scene.spec = spec;
    std::optional<TwoHandParams> gt;
    Vec3 axis = Vec3::UnitZ();
    for (int attempt = 1; attempt <= kMaxGenerationAttempts && !gt; ++attempt) {
        const Layout layout = sample_layout(spec.preset, s, tmpl);
        axis = layout.axis;
        gt = place_ground_truth(layout, s, tmpl, spec.grid);
        scene.attempts = attempt;
    }
    if (!gt)
        throw GenerationFailure("no ground truth within the penetration bound after "
                                + std::to_string(kMaxGenerationAttempts) + " attempts (seed "
                                + std::to_string(spec.seed) + ")");
    scene.gt = *gt;

    // Initial estimate: additive Gaussian perturbation per factor. The
    // translation error along the contact axis is folded toward contact.
    TwoHandParams init = scene.gt;
    Vec3 dt = s.normal3(ps.translation);
    const double along = dt.dot(axis);
    if (along > 0.0)
        dt -= 2.0 * along * axis;
    init.translation += dt;
    for (Side side : {Side::Left, Side::Right}) {
        HandParams& h = init.hand(side);
        h.orientation.axis_angle += s.normal3(ps.orientation);
        for (int j = 0; j < kPoseJointCount; ++j)
            h.fingers.joint_rotations.row(j) += s.normal3(ps.fingers).transpose();
        for (int k = 0; k < kShapeDim; ++k)
            h.shape.coefficients[k] += s.normal(ps.shape);
    }
    scene.initial = init;

    Sampler noise(splitmix64(spec.seed ^ 0x6a09e667f3bcc909ull));
    Joints3 joints = forward(tmpl, scene.gt).joints_3d;
    for (int j = 0; j < kTwoHandKeypoints; ++j)
        joints.row(j) += noise.normal3(1e-3 * spec.noise_std_mm).transpose();
    scene.targets = make_targets(joints);
    return scene;
}

PoseMetrics evaluate_pose(const HandTemplate& tmpl, const TwoHandParams& pred, const TwoHandParams& gt,
                          const GridConfig& grid)
{
    const TwoHandMesh pm = forward(tmpl, pred);
    const TwoHandMesh gm = forward(tmpl, gt);
    const PenetrationReport r = penetration_metrics(pm, grid);
    return {mpjpe(pm.joints_3d, gm.joints_3d), i_mpjpe(pm.joints_3d, gm.joints_3d), r.ave_p, r.max_p};
}

namespace {

void accumulate(PoseMetrics& sum, const PoseMetrics& m)
{
    sum.mpjpe += m.mpjpe;
    sum.i_mpjpe += m.i_mpjpe;
    sum.ave_p += m.ave_p;
    sum.max_p += m.max_p;
}

void divide(PoseMetrics& m, int n)
{
    if (n == 0)
        return;
    m.mpjpe /= n;
    m.i_mpjpe /= n;
    m.ave_p /= n;
    m.max_p /= n;
}

}  // namespace

CorpusReport run_experiment(const HandTemplate& tmpl, const CorpusSpec& spec, const RefineConfig& config)
{
    if (spec.count < 1)
        throw InvalidArgument("corpus count must be at least 1");
    if (spec.presets.empty())
        throw InvalidArgument("corpus needs at least one preset");
    validate(config);
    CorpusReport report;
    report.spec = spec;
    std::vector<std::optional<SceneResult>> results(spec.count);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < spec.count; ++i) {
        SceneSpec ss;
        ss.seed = scene_seed(spec.base_seed, static_cast<std::uint64_t>(i));
        ss.preset = spec.presets[i % spec.presets.size()];
        ss.perturbation = spec.perturbation;
        ss.noise_std_mm = spec.noise_std_mm;
        ss.grid = config.grid;
        Scene scene;
        try {
            scene = generate_scene(ss, tmpl);
        } catch (const GenerationFailure&) {
            continue;
        }
        SceneResult r;
        r.seed = ss.seed;
        r.preset = ss.preset;
        auto [refined, rep] = factorized_refine(tmpl, scene.initial, scene.targets, config);
        r.report = std::move(rep);
        r.initial = evaluate_pose(tmpl, scene.initial, scene.gt, config.grid);
        r.refined = evaluate_pose(tmpl, refined, scene.gt, config.grid);
        results[i] = std::move(r);
    }
    CorpusSummary& sum = report.summary;
    for (auto& r : results) {
        if (!r) {
            ++sum.generation_failures;
            continue;
        }
        ++sum.scenes;
        sum.accepted_stages += r->report.accepted_count();
        const auto& a = r->report.initial;
        const auto& b = r->report.final_errors;
        if (b.e_col > a.e_col || b.e_3d > a.e_3d)
            ++sum.never_worse_violations;
        accumulate(sum.initial, r->initial);
        accumulate(sum.refined, r->refined);
        report.scenes.push_back(std::move(*r));
    }
    divide(sum.initial, sum.scenes);
    divide(sum.refined, sum.scenes);
    return report;
}

std::vector<NoiseLevelRow> run_noise_sweep(const HandTemplate& tmpl, const CorpusSpec& spec,
                                           const RefineConfig& config, const std::vector<double>& levels_mm)
{
    std::vector<NoiseLevelRow> rows;
    for (double level : levels_mm) {
        CorpusSpec s = spec;
        s.noise_std_mm = level;
        rows.push_back({level, run_experiment(tmpl, s, config).summary});
    }
    return rows;
}

}  // namespace twohand
