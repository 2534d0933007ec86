#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>

#include "twohand/collision.hpp"
#include "twohand/hand_model.hpp"

namespace twohand {

using Joints3 = Eigen::Matrix<double, kTwoHandKeypoints, 3>;
using Joints2 = Eigen::Matrix<double, kTwoHandKeypoints, 2>;
using Visibility = std::array<bool, kTwoHandKeypoints>;

inline Visibility all_visible()
{
    Visibility v;
    v.fill(true);
    return v;
}

/// Pseudo ground truth the refinement is pulled toward.
struct JointTargets {
    Joints3 joints_3d = Joints3::Zero();
    Joints2 joints_2d = Joints2::Zero();  ///< pixels
    Visibility visibility = all_visible();
    Vec3 translation_target = Vec3::Zero();
    WeakPerspectiveCamera camera;
};

/// Targets from 3D joints: 2D joints by projection and the translation
/// target as left wrist minus right wrist.
JointTargets make_targets(const Joints3& joints_3d, const WeakPerspectiveCamera& camera = {},
                          const Visibility& visibility = all_visible());

/// Per-term weights of the refinement objective plus the stage's step size
/// and iteration budget.
struct ObjectiveWeights {
    double collision = 1.0;
    double joints_2d = 10.0;
    double joints_3d = 1e3;
    double translation = 1e3;
    double shape_reg = 0.1;
    double finger = 0.0;
    double step_size = 1e-2;
    int max_iterations = 50;
};

/// Throws InvalidArgument for negative weights, a non-positive step size or a
/// negative iteration count.
void validate(const ObjectiveWeights& w);

/// Stage defaults: step 1e-4 and collision weight 0.1 for the translation
/// stage; finger weight 1e5 in the finger stage only.
ObjectiveWeights default_stage_weights(Factor f);

struct ObjectiveTerms {
    double collision = 0.0;
    double joints_2d = 0.0;
    double joints_3d = 0.0;
    double translation = 0.0;
    double shape_reg = 0.0;
    double finger = 0.0;
};

struct ObjectiveValue {
    ObjectiveTerms raw;       ///< unweighted
    ObjectiveTerms weighted;  ///< each term times its weight
    double total = 0.0;
};

struct FingerConstraint {
    double c1 = 0.0;
    double c2 = 0.0;
    double penalty = 0.0;  ///< |C1| - min(C2, 0)
};

/// Planarity and curl measures of one finger given four keypoints ordered
/// tip to palm.
FingerConstraint finger_constraint(const Vec3& pa, const Vec3& pb, const Vec3& pc, const Vec3& pd);

/// Sum of the finger penalty over the 10 fingers of a two-hand joint set.
double finger_penalty(const Joints3& joints);
/// Same, accumulating d penalty / d joints (times `weight`) into `grad`.
double finger_penalty(const Joints3& joints, double weight, Joints3& grad);

/// Ground-truth record for the training-style losses. Every field is
/// required by supervised_losses.
struct Annotations {
    std::optional<TwoHandParams> params;
    std::optional<Joints3> joints_3d;
    std::optional<Joints2> joints_2d;
    std::optional<Vec3> translation;
    Visibility visibility = all_visible();
};

struct SupervisedLosses {
    double params = 0.0;  ///< shape squared error plus finger rotation-matrix squared error
    double translation = 0.0;
    double joints_3d = 0.0;
    double shape_reg = 0.0;
    double joints_2d = 0.0;  ///< visible-joint L1, pixels
    double total = 0.0;
};

inline constexpr std::array<double, 5> kSupervisedLambdas = {10.0, 10.0, 10.0, 0.1, 10.0};

/// Throws InvalidArgument naming the first missing ground-truth field.
SupervisedLosses supervised_losses(const TwoHandParams& pred, const Joints3& pred_joints_3d,
                                   const WeakPerspectiveCamera& camera, const Annotations& gt);

/// Refinement objective for one scene. Caches the last voxel grid of each
/// hand keyed on that hand's shape and finger pose, so instances are not safe
/// to share across threads.
class Objective {
public:
    Objective(const HandTemplate& tmpl, JointTargets targets, ObjectiveWeights weights, GridConfig grid = {});

    ObjectiveValue evaluate(const TwoHandParams& params) const;

    /// Gradient over the flat parameter layout. With `active` set, entries
    /// outside that factor are zero and their chains are skipped.
    /// Throws NonFiniteValue when the objective is not finite.
    Eigen::VectorXd gradient(const TwoHandParams& params, std::optional<Factor> active = std::nullopt,
                             ObjectiveValue* value = nullptr) const;

    /// Hash of the discrete choices behind the value at `params`: interpolation
    /// cells, voxel inside sets, bounding-box supports and the signs of the L1
    /// and finger terms. Terms with zero weight do not contribute.
    std::uint64_t branch_signature(const TwoHandParams& params) const;

    const ObjectiveWeights& weights() const { return weights_; }
    void set_weights(const ObjectiveWeights& w);
    const JointTargets& targets() const { return targets_; }
    const GridConfig& grid() const { return grid_; }
    const HandTemplate& hand_template() const { return *tmpl_; }

private:
    struct CachedGrid {
        bool valid = false;
        Eigen::Matrix<double, kShapeDim, 1> shape;
        Eigen::Matrix<double, kPoseJointCount, 3> fingers;
        std::shared_ptr<const VoxelSdf> grid;
    };

    std::shared_ptr<const VoxelSdf> grid_for(const HandPoseState& state) const;
    ObjectiveValue run(const TwoHandParams& params, Eigen::VectorXd* grad, std::optional<Factor> active,
                       std::uint64_t* signature) const;

    const HandTemplate* tmpl_;
    JointTargets targets_;
    ObjectiveWeights weights_;
    GridConfig grid_;
    mutable std::array<CachedGrid, 2> cache_;
};

}  // namespace twohand
