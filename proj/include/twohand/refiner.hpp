#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "twohand/objectives.hpp"

namespace twohand {

struct ErrorPair {
    double e_col = 0.0;  ///< summed penetration depth, meters
    double e_3d = 0.0;   ///< squared joint error against the targets, m^2
};

/// Collision loss and squared 3D joint error of `params`.
ErrorPair obtain_error(const TwoHandParams& params, const JointTargets& targets, const HandTemplate& tmpl,
                       const GridConfig& grid);

struct StageConfig {
    Factor factor = Factor::Translation;
    ObjectiveWeights weights;
    bool enabled = true;
};

struct RefineConfig {
    /// Order of the stages; each factor appears exactly once.
    std::vector<StageConfig> stages;
    GridConfig grid;
    /// Skip a stage when a running error is already 0, since no candidate can
    /// then strictly improve it. Does not change the result.
    bool skip_when_unimprovable = true;
};

/// Stages tau, phi, theta, beta with their default weights.
RefineConfig default_refine_config();
/// Same weights, stages in the given order.
RefineConfig refine_config_for_order(const std::vector<Factor>& order);
/// Parses a comma-separated order such as "tau,phi,theta,beta".
std::vector<Factor> parse_stage_order(const std::string& text);
/// Throws InvalidArgument unless the stages form a permutation of the four factors.
void validate(const RefineConfig& config);

struct StageRecord {
    Factor factor = Factor::Translation;
    bool ran = false;       ///< false when disabled or skipped
    bool accepted = false;
    bool aborted = false;   ///< non-finite objective during descent
    ErrorPair before;
    ErrorPair candidate;
    int iterations = 0;
    double wall_seconds = 0.0;
};

struct RefineReport {
    ErrorPair initial;
    ErrorPair final_errors;
    std::vector<StageRecord> stages;
    TwoHandParams final_params;

    int accepted_count() const;
};

struct StageResult {
    TwoHandParams candidate;
    int iterations = 0;
    bool aborted = false;
};

/// Adam descent on the objective over one factor; the other factors stay
/// fixed. Returns the final iterate. A non-finite objective aborts the stage
/// and returns the input unchanged.
StageResult refine_stage(const TwoHandParams& params, Factor factor, const JointTargets& targets,
                         const HandTemplate& tmpl, const ObjectiveWeights& weights, const GridConfig& grid);

struct StageContext {
    const HandTemplate& tmpl;
    const JointTargets& targets;
    const ObjectiveWeights& weights;
    const GridConfig& grid;
};

/// Proposes new values for one factor. Only that factor of the returned
/// parameters is used.
using StageModule = std::function<StageResult(const TwoHandParams&, Factor, const StageContext&)>;

/// The gradient-descent stage as a module.
StageModule descent_module();

/// Factorized refinement with verification: each stage proposes a candidate
/// for its factor, which is kept only if both the collision error and the
/// joint error strictly decrease.
class Refiner {
public:
    explicit Refiner(const HandTemplate& tmpl);

    /// Replaces the module for `factor`. Replacing a previously registered
    /// custom module emits a warning.
    void register_stage_module(Factor factor, StageModule module);
    void set_warning_handler(std::function<void(const std::string&)> handler) { warn_ = std::move(handler); }

    std::pair<TwoHandParams, RefineReport> refine(const TwoHandParams& initial, const JointTargets& targets,
                                                  const RefineConfig& config) const;

private:
    const HandTemplate* tmpl_;
    std::array<StageModule, 4> modules_;
    std::array<bool, 4> custom_{};
    std::function<void(const std::string&)> warn_;
};

/// Refinement with the default modules.
std::pair<TwoHandParams, RefineReport> factorized_refine(const HandTemplate& tmpl, const TwoHandParams& initial,
                                                         const JointTargets& targets, const RefineConfig& config);

}  // namespace twohand
