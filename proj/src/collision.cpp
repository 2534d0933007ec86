#include "twohand/collision.hpp"

#include <algorithm>

namespace twohand {
namespace {

const Faces& side_faces(const TwoHandMesh& mesh, Side side)
{
    const auto& ptr = side == Side::Left ? mesh.left_faces : mesh.right_faces;
    if (!ptr)
        throw InvalidArgument("mesh has no faces");
    return *ptr;
}

Eigen::VectorXd sample_all(const HandSdf& field, const Points& queries)
{
    Eigen::VectorXd out(queries.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i)
        out[i] = field.sample(queries.row(i).transpose());
    return out;
}

}  // namespace

HandSdf build_hand_sdf(const Points& local_vertices, const SurfaceTopology& topology, const Mat3& rotation,
                       const Vec3& translation, const GridConfig& config)
{
    HandSdf out;
    out.field = std::make_shared<const VoxelSdf>(voxelize_sdf(local_vertices, topology, config));
    out.rotation = rotation;
    out.translation = translation;
    return out;
}

HandSdf build_hand_sdf(const TwoHandMesh& mesh, Side side, const GridConfig& config)
{
    const Points& world = mesh.vertices(side);
    if (!world.allFinite())
        throw NonFiniteValue("mesh vertices contain non-finite values");
    const int s = static_cast<int>(side);
    const Mat3& r = mesh.frame_rotation[s];
    const Vec3& t = mesh.frame_translation[s];
    Points local = (world.rowwise() - t.transpose()) * r;
    const SurfaceTopology topo = analyze_topology(side_faces(mesh, side), static_cast<int>(world.rows()));
    return build_hand_sdf(local, topo, r, t, config);
}

PenetrationDepths penetration_depths(const TwoHandMesh& mesh, const GridConfig& config)
{
    const HandSdf left = build_hand_sdf(mesh, Side::Left, config);
    const HandSdf right = build_hand_sdf(mesh, Side::Right, config);
    return {sample_all(right, mesh.left_vertices), sample_all(left, mesh.right_vertices)};
}

double collision_loss(const TwoHandMesh& mesh, const GridConfig& config)
{
    const auto d = penetration_depths(mesh, config);
    return d.left_in_right.sum() + d.right_in_left.sum();
}

PenetrationReport penetration_statistics(const PenetrationDepths& depths)
{
    PenetrationReport r;
    double sum = 0.0;
    for (const auto* v : {&depths.left_in_right, &depths.right_in_left}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) {
            const double d = (*v)[i];
            if (d > 0.0) {
                sum += d;
                ++r.penetrating_vertex_count;
                r.max_p = std::max(r.max_p, d);
            }
        }
    }
    if (r.penetrating_vertex_count > 0)
        r.ave_p = 1e3 * sum / r.penetrating_vertex_count;
    r.max_p *= 1e3;
    return r;
}

PenetrationReport penetration_metrics(const TwoHandMesh& mesh, const GridConfig& config)
{
    return penetration_statistics(penetration_depths(mesh, config));
}

double psi_sum_with_adjoint(const HandSdf& field, const Points& field_local_vertices, const Faces& field_faces,
                            const Points& queries, double weight, Points* query_adjoint, HandAdjoint* field_adjoint)
{
    const VoxelSdf& g = field.grid();
    const int n = g.resolution;
    const double h = g.cell_size;
    if (field_adjoint && field_adjoint->local_vertices.rows() != field_local_vertices.rows())
        field_adjoint->local_vertices = Points::Zero(field_local_vertices.rows(), 3);

    double total = 0.0;
    Vec3 d_origin = Vec3::Zero();
    double d_cell = 0.0;
    Mat3 d_rotation = Mat3::Zero();
    Vec3 d_translation = Vec3::Zero();
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Vec3 x = queries.row(i).transpose();
        const Vec3 q = field.to_grid(x);
        const PsiSample s = sample_psi_detail(g, q);
        if (s.value == 0.0 && s.gradient.isZero(0.0))
            continue;
        total += s.value;
        const Vec3 world_grad = field.rotation * s.gradient;
        if (query_adjoint)
            query_adjoint->row(i) += weight * world_grad.transpose();
        if (!field_adjoint)
            continue;
        d_rotation += weight * (x - field.translation) * s.gradient.transpose();
        d_translation -= weight * world_grad;
        // moving the grid frame while the corner values stay put
        d_origin -= weight * s.gradient;
        d_cell -= weight * s.gradient.dot(q - g.origin) / h;
        // corner depths follow their closest surface point and the voxel centers
        for (int corner = 0; corner < 8; ++corner) {
            const int dx = corner >> 2 & 1, dy = corner >> 1 & 1, dz = corner & 1;
            const int cx = s.cell[0] + dx, cy = s.cell[1] + dy, cz = s.cell[2] + dz;
            const std::size_t id = g.index(cx, cy, cz);
            const int f = g.closest_face[id];
            if (f < 0)
                continue;
            const double w = (dx ? s.fraction[0] : 1.0 - s.fraction[0]) * (dy ? s.fraction[1] : 1.0 - s.fraction[1])
                * (dz ? s.fraction[2] : 1.0 - s.fraction[2]);
            if (w == 0.0)
                continue;
            const Vec3& b = g.closest_bary[id];
            const auto& face = field_faces[f];
            const Vec3 closest = b[0] * field_local_vertices.row(face[0]).transpose()
                + b[1] * field_local_vertices.row(face[1]).transpose()
                + b[2] * field_local_vertices.row(face[2]).transpose();
            const Vec3 center = g.center(cx, cy, cz);
            const Vec3 u = (center - closest) / g.values[id];
            const double ww = weight * w;
            for (int k = 0; k < 3; ++k)
                field_adjoint->local_vertices.row(face[k]) -= ww * b[k] * u.transpose();
            d_origin += ww * u;
            d_cell += ww * u.dot(Vec3(cx, cy, cz));
        }
    }
    if (field_adjoint) {
        field_adjoint->rotation += d_rotation;
        field_adjoint->translation += d_translation;
        // origin = mid(bbox) - (n - 1) / 2 * cell, cell = extent / (n - 1 - 2 margin)
        d_cell -= 0.5 * (n - 1) * d_origin.sum();
        auto& lv = field_adjoint->local_vertices;
        for (int a = 0; a < 3; ++a) {
            lv(g.bbox_support[a], a) += 0.5 * d_origin[a];
            lv(g.bbox_support[3 + a], a) += 0.5 * d_origin[a];
        }
        const double per_extent = d_cell / (n - 1 - 2 * g.margin);
        lv(g.bbox_support[3 + g.extent_axis], g.extent_axis) += per_extent;
        lv(g.bbox_support[g.extent_axis], g.extent_axis) -= per_extent;
    }
    return total;
}

}  // namespace twohand
