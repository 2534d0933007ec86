#pragma once

#include <vector>

#include "twohand/types.hpp"

namespace twohand {

/// Face connectivity of a closed triangle mesh, validated once and reused
/// across many vertex positions.
struct SurfaceTopology {
    Faces faces;
    int vertex_count = 0;
    /// Connected component id per face (components connect through shared vertices).
    std::vector<int> face_component;
    int component_count = 0;
};

/// Builds the topology and checks that every undirected edge is shared by
/// exactly two faces. Throws TopologyError otherwise, and InvalidArgument for
/// out-of-range indices.
SurfaceTopology analyze_topology(const Faces& faces, int vertex_count);

/// Returns true when every undirected edge is shared by exactly two faces.
bool is_watertight(const Faces& faces);

/// Faces with reversed winding.
Faces flip_winding(const Faces& faces);

struct TriangleMesh {
    Points vertices;
    Faces faces;
};

/// Subdivided icosahedron projected onto the sphere. Level 4 has 2562 vertices.
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0, const Vec3& center = Vec3::Zero());

/// Axis-aligned box with outward-facing triangles (8 vertices, 12 faces).
TriangleMesh make_box(const Vec3& min_corner, const Vec3& max_corner);

/// Closest point on triangle (a, b, c) to p. Returns barycentric weights of the
/// closest point, which always lie in the triangle.
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace twohand
