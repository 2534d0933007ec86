#include "twohand/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>

namespace twohand {
namespace {

std::uint64_t edge_key(int a, int b)
{
    if (a > b)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

int find_root(std::vector<int>& parent, int i)
{
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

bool is_watertight(const Faces& faces)
{
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(faces.size() * 3);
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k)
            ++count[edge_key(f[k], f[(k + 1) % 3])];
    return !faces.empty()
        && std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

SurfaceTopology analyze_topology(const Faces& faces, int vertex_count)
{
    for (const auto& f : faces)
        for (int idx : f)
            if (idx < 0 || idx >= vertex_count)
                throw InvalidArgument("face index " + std::to_string(idx) + " out of range");
    if (!is_watertight(faces))
        throw TopologyError("mesh is not watertight: some edge is not shared by exactly two faces");

    std::vector<int> parent(vertex_count);
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& f : faces) {
        const int r0 = find_root(parent, f[0]);
        parent[find_root(parent, f[1])] = r0;
        parent[find_root(parent, f[2])] = r0;
    }
    SurfaceTopology topo;
    topo.faces = faces;
    topo.vertex_count = vertex_count;
    topo.face_component.resize(faces.size());
    std::map<int, int> ids;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const int root = find_root(parent, faces[i][0]);
        auto [it, inserted] = ids.emplace(root, static_cast<int>(ids.size()));
        topo.face_component[i] = it->second;
    }
    topo.component_count = static_cast<int>(ids.size());
    return topo;
}

Faces flip_winding(const Faces& faces)
{
    Faces out = faces;
    for (auto& f : out)
        std::swap(f[1], f[2]);
    return out;
}

TriangleMesh make_icosphere(int subdivisions, double radius, const Vec3& center)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts)
        v.normalize();
    Faces faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end())
                return it->second;
            verts.push_back((verts[a] + verts[b]).normalized());
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        Faces next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriangleMesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i)
        mesh.vertices.row(static_cast<Eigen::Index>(i)) = (center + radius * verts[i]).transpose();
    mesh.faces = std::move(faces);
    return mesh;
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi)
{
    TriangleMesh mesh;
    mesh.vertices.resize(8, 3);
    for (int i = 0; i < 8; ++i)
        mesh.vertices.row(i) << ((i & 1) ? hi.x() : lo.x()), ((i & 2) ? hi.y() : lo.y()), ((i & 4) ? hi.z() : lo.z());
    mesh.faces = {
        {0, 4, 6}, {0, 6, 2},  // -x
        {1, 3, 7}, {1, 7, 5},  // +x
        {0, 1, 5}, {0, 5, 4},  // -y
        {2, 6, 7}, {2, 7, 3},  // +y
        {0, 2, 3}, {0, 3, 1},  // -z
        {4, 5, 7}, {4, 7, 6}}; // +z
    return mesh;
}

// Real-Time Collision Detection (Ericson), section 5.1.5.
Vec3 closest_point_barycentric(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0)
        return {1.0, 0.0, 0.0};

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3)
        return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6)
        return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return {1.0 - v - w, v, w};
}

}  // namespace twohand
