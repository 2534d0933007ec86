#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "twohand/metrics.hpp"
#include "twohand/refiner.hpp"

namespace twohand {

enum class Preset { Clasp, Interlace, PointTouch, NearMiss };

const char* preset_name(Preset p);
std::optional<Preset> parse_preset(const std::string& name);

/// Standard deviations of the Gaussian perturbation added to the ground truth
/// to form the initial estimate. These are harness conventions.
struct PerturbationScales {
    double translation = 0.015;  ///< m, per coordinate
    double orientation = 0.15;   ///< rad, per axis-angle coordinate
    double fingers = 0.1;        ///< rad, per joint coordinate
    double shape = 0.5;          ///< coefficient units
};

struct SceneSpec {
    std::uint64_t seed = 0;
    Preset preset = Preset::Clasp;
    PerturbationScales perturbation;
    double noise_std_mm = 0.0;  ///< per-coordinate joint noise of the targets
    GridConfig grid;            ///< used for the contact checks
};

struct Scene {
    TwoHandParams gt;
    TwoHandParams initial;
    JointTargets targets;
    SceneSpec spec;
    int attempts = 1;  ///< ground-truth samples drawn before one passed
};

class GenerationFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ground-truth penetration bound in mm (AVE-P and MAX-P).
inline constexpr double kGroundTruthMaxPenetrationMm = 0.5;
inline constexpr int kMaxGenerationAttempts = 100;

/// Deterministic in (spec, template). The ground truth is sampled from the
/// preset's pose prior and slid apart along the preset's contact axis until
/// the penetration bound holds. The joint noise uses its own random stream,
/// so scenes that differ only in noise level share everything else.
Scene generate_scene(const SceneSpec& spec, const HandTemplate& tmpl);

/// Seed of scene `index` in a corpus.
std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index);

struct CorpusSpec {
    int count = 100;
    std::uint64_t base_seed = 1;
    std::vector<Preset> presets = {Preset::Clasp};  ///< cycled over the scenes
    PerturbationScales perturbation;
    double noise_std_mm = 0.0;
};

struct PoseMetrics {
    double mpjpe = 0.0;    ///< mm
    double i_mpjpe = 0.0;  ///< mm
    double ave_p = 0.0;    ///< mm
    double max_p = 0.0;    ///< mm
};

struct SceneResult {
    std::uint64_t seed = 0;
    Preset preset = Preset::Clasp;
    PoseMetrics initial;
    PoseMetrics refined;
    RefineReport report;
};

struct CorpusSummary {
    int scenes = 0;
    int generation_failures = 0;
    int accepted_stages = 0;
    /// Scenes where a final error exceeds its initial value.
    int never_worse_violations = 0;
    PoseMetrics initial;  ///< means over scenes
    PoseMetrics refined;
};

struct CorpusReport {
    CorpusSpec spec;
    std::vector<SceneResult> scenes;
    CorpusSummary summary;
};

PoseMetrics evaluate_pose(const HandTemplate& tmpl, const TwoHandParams& pred, const TwoHandParams& gt,
                          const GridConfig& grid);

/// Generates the corpus, refines every scene and aggregates metrics against
/// the ground truth.
CorpusReport run_experiment(const HandTemplate& tmpl, const CorpusSpec& spec, const RefineConfig& config);

struct NoiseLevelRow {
    double noise_std_mm = 0.0;
    CorpusSummary summary;
};

/// The same corpus at several joint-noise levels.
std::vector<NoiseLevelRow> run_noise_sweep(const HandTemplate& tmpl, const CorpusSpec& spec,
                                           const RefineConfig& config, const std::vector<double>& levels_mm);

}  // namespace twohand
