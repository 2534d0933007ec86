#pragma once

#include <memory>

#include "twohand/hand_model.hpp"
#include "twohand/sdf.hpp"

namespace twohand {

/// Penetration field of one hand placed in the world: psi(x) = grid(R^T (x - t)).
/// The grid is built in the hand's own frame so rigid motion of the hand does
/// not require rebuilding it.
struct HandSdf {
    std::shared_ptr<const VoxelSdf> field;  ///< shared so placing a cached grid is cheap
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    const VoxelSdf& grid() const { return *field; }
    Vec3 to_grid(const Vec3& world) const { return rotation.transpose() * (world - translation); }
    double sample(const Vec3& world) const { return sample_psi(*field, to_grid(world)); }
};

/// `local_vertices` are the hand's vertices in its own frame.
HandSdf build_hand_sdf(const Points& local_vertices, const SurfaceTopology& topology, const Mat3& rotation,
                       const Vec3& translation, const GridConfig& config);

/// Field of one side of a two-hand mesh, built in that side's frame.
HandSdf build_hand_sdf(const TwoHandMesh& mesh, Side side, const GridConfig& config);

/// Depth of every vertex of each hand inside the other hand, meters.
struct PenetrationDepths {
    Eigen::VectorXd left_in_right;
    Eigen::VectorXd right_in_left;
};
PenetrationDepths penetration_depths(const TwoHandMesh& mesh, const GridConfig& config);

/// Sum of psi_right over left vertices plus psi_left over right vertices, meters.
double collision_loss(const TwoHandMesh& mesh, const GridConfig& config);

struct PenetrationReport {
    double ave_p = 0.0;  ///< mm, mean over penetrating vertices
    double max_p = 0.0;  ///< mm, over all vertices of both hands
    int penetrating_vertex_count = 0;
};

PenetrationReport penetration_statistics(const PenetrationDepths& depths);
PenetrationReport penetration_metrics(const TwoHandMesh& mesh, const GridConfig& config);

/// Sum over query points of psi(query), with reverse-mode sensitivities.
///
/// Query points move with `query_adjoint` (dL/d world position). The field
/// depends on its hand's local vertices (through voxel depths and the grid
/// bounds) and on its rigid frame; those sensitivities go to `field_adjoint`
/// (local_vertices, rotation, translation). Both adjoints are accumulated
/// with factor `weight`; either may be null.
double psi_sum_with_adjoint(const HandSdf& field, const Points& field_local_vertices, const Faces& field_faces,
                            const Points& queries, double weight, Points* query_adjoint, HandAdjoint* field_adjoint);

}  // namespace twohand
