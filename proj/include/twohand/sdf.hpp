#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "twohand/mesh.hpp"
#include "twohand/types.hpp"

namespace twohand {

struct GridConfig {
    int resolution = 32;  ///< N_p voxels per axis
    int margin = 2;       ///< empty cells between the mesh bounding box and the grid boundary
};

/// Throws InvalidArgument unless resolution >= 8, margin >= 2 and at least one
/// interior cell remains.
void validate(const GridConfig& config);

/// Cubic grid of penetration depths: psi = distance to the surface for voxel
/// centers inside the mesh, 0 outside. Voxel (ix, iy, iz) is centered at
/// origin + cell_size * (ix, iy, iz) and stored at (ix * N + iy) * N + iz.
struct VoxelSdf {
    int resolution = 0;
    int margin = 2;
    Vec3 origin = Vec3::Zero();
    double cell_size = 0.0;
    std::vector<double> values;

    /// Closest face and its barycentric weights for voxels with psi > 0, -1 elsewhere.
    std::vector<int> closest_face;
    std::vector<Vec3> closest_bary;
    /// Vertex indices attaining the bounding box: min x, min y, min z, max x, max y, max z.
    std::array<int, 6> bbox_support{};
    int extent_axis = 0;  ///< axis whose extent sets cell_size
    /// Hash over the discrete build decisions (inside set and bbox supports).
    std::uint64_t signature = 0;

    std::size_t index(int ix, int iy, int iz) const
    {
        return (static_cast<std::size_t>(ix) * resolution + iy) * resolution + iz;
    }
    double value(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }
    Vec3 center(int ix, int iy, int iz) const { return origin + cell_size * Vec3(ix, iy, iz); }
};

/// Voxelizes a closed mesh. Each connected component is tested separately
/// (signed scanline crossings along x, y and z, inside on a 2-of-3 vote) and a
/// voxel takes the largest depth among the components containing it.
VoxelSdf voxelize_sdf(const Points& vertices, const SurfaceTopology& topology, const GridConfig& config);
/// Convenience overload; validates the faces first (TopologyError if not watertight).
VoxelSdf voxelize_sdf(const Points& vertices, const Faces& faces, const GridConfig& config);

struct PsiSample {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();  ///< d psi / d point, one-sided at cell faces
    bool in_grid = false;
    std::array<int, 3> cell{};  ///< lower corner of the interpolation cell
    Vec3 fraction = Vec3::Zero();
};

/// Trilinear sample of the grid. Points outside the grid sample 0.
PsiSample sample_psi_detail(const VoxelSdf& sdf, const Vec3& point);
double sample_psi(const VoxelSdf& sdf, const Vec3& point);

/// Little-endian dump: 8-byte magic "TWHSDF01", u64 N, 3 x f64 origin,
/// f64 cell size, then N^3 f64 values with x slowest and z fastest.
void write_sdf_binary(const VoxelSdf& sdf, const std::string& path);
VoxelSdf read_sdf_binary(const std::string& path);

}  // namespace twohand
