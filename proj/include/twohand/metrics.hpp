#pragma once

#include "twohand/objectives.hpp"

namespace twohand {

/// Scale and translation (no rotation) mapping predictions onto ground truth.
struct AlignmentResult {
    double scale = 1.0;
    Vec3 translation = Vec3::Zero();
    Points aligned;
};

/// Least-squares s, t minimizing sum |s p_i + t - g_i|^2 over rows with
/// mask[i] set (all rows when the mask is empty). Throws DegenerateInput when
/// the selected predictions coincide, EmptyMetric for fewer than 2 rows.
AlignmentResult align_scale_translation(const Points& pred, const Points& gt, const std::vector<bool>& mask = {});

/// Mean joint error in mm after moving each predicted hand so its wrist sits
/// on the ground-truth wrist. Throws EmptyMetric without valid joints and
/// InvalidArgument when a hand has valid joints but an invalid wrist.
double mpjpe(const Joints3& pred, const Joints3& gt, const Visibility& valid = all_visible());

/// Mean joint error in mm after one shared scale and translation over both hands.
double i_mpjpe(const Joints3& pred, const Joints3& gt, const Visibility& valid = all_visible());

/// Vertex analogues; wrists come from the regressed joints of each mesh.
double mpvpe(const TwoHandMesh& pred, const TwoHandMesh& gt);
double i_mpvpe(const TwoHandMesh& pred, const TwoHandMesh& gt);

enum class Interaction { Single, Interacting, CloselyInteracting };
const char* interaction_name(Interaction i);

/// More than 30 valid joints is interacting; closely interacting when also the
/// mean distance from each valid joint to the nearest valid joint of the other
/// hand is below 40 mm.
Interaction classify_interaction(const Joints3& gt, const Visibility& valid = all_visible());

}  // namespace twohand
