#include "twohand/sdf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "twohand/io_util.hpp"

namespace twohand {
namespace {

constexpr char kMagic[8] = {'T', 'W', 'H', 'S', 'D', 'F', '0', '1'};

struct Box {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    void grow(const Vec3& p)
    {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double distance2(const Vec3& p) const
    {
        const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
        return d.squaredNorm();
    }
};

struct ClosestHit {
    int face = -1;
    Vec3 bary = Vec3::Zero();
    double dist2 = std::numeric_limits<double>::infinity();
};

class TriangleBvh {
public:
    TriangleBvh(const Points& vertices, const Faces& faces, std::vector<int> tris)
        : vertices_(vertices), faces_(faces), tris_(std::move(tris))
    {
        centroids_.resize(faces.size());
        for (int f : tris_)
            centroids_[f] = (corner(f, 0) + corner(f, 1) + corner(f, 2)) / 3.0;
        if (!tris_.empty())
            build(0, static_cast<int>(tris_.size()));
    }

    ClosestHit closest(const Vec3& p) const
    {
        ClosestHit best;
        if (nodes_.empty())
            return best;
        int stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            if (n.box.distance2(p) >= best.dist2)
                continue;
            if (n.left < 0) {
                for (int k = n.begin; k < n.end; ++k) {
                    const int f = tris_[k];
                    const Vec3 a = corner(f, 0), b = corner(f, 1), c = corner(f, 2);
                    const Vec3 w = closest_point_barycentric(p, a, b, c);
                    const double d2 = (w[0] * a + w[1] * b + w[2] * c - p).squaredNorm();
                    if (d2 < best.dist2) {
                        best = {f, w, d2};
                    }
                }
                continue;
            }
            const double dl = nodes_[n.left].box.distance2(p);
            const double dr = nodes_[n.right].box.distance2(p);
            // push the farther child first so the nearer one is popped next
            if (dl < dr) {
                stack[top++] = n.right;
                stack[top++] = n.left;
            } else {
                stack[top++] = n.left;
                stack[top++] = n.right;
            }
        }
        return best;
    }

private:
    struct Node {
        Box box;
        int left = -1, right = -1;
        int begin = 0, end = 0;
    };

    Vec3 corner(int f, int k) const { return vertices_.row(faces_[f][k]).transpose(); }

    int build(int begin, int end)
    {
        const int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        Box box, cbox;
        for (int k = begin; k < end; ++k) {
            const int f = tris_[k];
            for (int c = 0; c < 3; ++c)
                box.grow(corner(f, c));
            cbox.grow(centroids_[f]);
        }
        nodes_[id].box = box;
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        if (end - begin <= 4)
            return id;
        int axis;
        (cbox.hi - cbox.lo).maxCoeff(&axis);
        const int mid = (begin + end) / 2;
        std::nth_element(tris_.begin() + begin, tris_.begin() + mid, tris_.begin() + end, [&](int a, int b) {
            if (centroids_[a][axis] != centroids_[b][axis])
                return centroids_[a][axis] < centroids_[b][axis];
            return a < b;
        });
        const int l = build(begin, mid);
        const int r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    const Points& vertices_;
    const Faces& faces_;
    std::vector<int> tris_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

// Edge function with a canonical vertex order, so the two triangles sharing an
// edge see bit-identical values and a point on the edge lands in exactly one.
struct EdgeSide {
    double value;
    bool positive;
};

EdgeSide edge_side(int ia, const Eigen::Vector2d& a, int ib, const Eigen::Vector2d& b, const Eigen::Vector2d& p)
{
    const bool swapped = ib < ia;
    const Eigen::Vector2d& s = swapped ? b : a;
    const Eigen::Vector2d& e = swapped ? a : b;
    const double v = (e.x() - s.x()) * (p.y() - s.y()) - (e.y() - s.y()) * (p.x() - s.x());
    const bool canon_pos = v >= 0.0;
    return {swapped ? -v : v, swapped ? !canon_pos : canon_pos};
}

void hash_mix(std::uint64_t& h, std::uint64_t x)
{
    for (int k = 0; k < 8; ++k) {
        h ^= (x >> (8 * k)) & 0xffu;
        h *= 1099511628211ull;
    }
}

void put_u64(std::string& out, std::uint64_t x)
{
    for (int k = 0; k < 8; ++k)
        out.push_back(static_cast<char>((x >> (8 * k)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos)
{
    if (pos + 8 > in.size())
        throw InvalidArgument("truncated SDF file");
    std::uint64_t x = 0;
    for (int k = 0; k < 8; ++k)
        x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + k])) << (8 * k);
    pos += 8;
    return x;
}

}  // namespace

void validate(const GridConfig& config)
{
    if (config.resolution < 8)
        throw InvalidArgument("grid resolution must be at least 8");
    if (config.margin < 2)
        throw InvalidArgument("grid margin must be at least 2 cells");
    if (config.resolution - 1 - 2 * config.margin < 1)
        throw InvalidArgument("grid margin leaves no interior cells");
}

VoxelSdf voxelize_sdf(const Points& vertices, const Faces& faces, const GridConfig& config)
{
    return voxelize_sdf(vertices, analyze_topology(faces, static_cast<int>(vertices.rows())), config);
}

VoxelSdf voxelize_sdf(const Points& vertices, const SurfaceTopology& topology, const GridConfig& config)
{
    validate(config);
    if (vertices.rows() != topology.vertex_count)
        throw DimensionMismatch("vertex count does not match the topology");
    if (vertices.rows() == 0 || topology.faces.empty())
        throw DegenerateInput("cannot voxelize an empty mesh");
    if (!vertices.allFinite())
        throw NonFiniteValue("mesh vertices contain non-finite values");

    const int n = config.resolution;
    VoxelSdf sdf;
    sdf.resolution = n;
    sdf.margin = config.margin;
    Vec3 lo, hi;
    for (int a = 0; a < 3; ++a) {
        Eigen::Index imin, imax;
        lo[a] = vertices.col(a).minCoeff(&imin);
        hi[a] = vertices.col(a).maxCoeff(&imax);
        sdf.bbox_support[a] = static_cast<int>(imin);
        sdf.bbox_support[3 + a] = static_cast<int>(imax);
    }
    const Vec3 extent = hi - lo;
    const double max_extent = extent.maxCoeff(&sdf.extent_axis);
    if (!(max_extent > 0.0))
        throw DegenerateInput("mesh has zero extent");
    sdf.cell_size = max_extent / (n - 1 - 2 * config.margin);
    sdf.origin = 0.5 * (lo + hi) - 0.5 * (n - 1) * sdf.cell_size * Vec3::Ones();
    const double h = sdf.cell_size;
    const std::size_t total = static_cast<std::size_t>(n) * n * n;
    sdf.values.assign(total, 0.0);
    sdf.closest_face.assign(total, -1);
    sdf.closest_bary.assign(total, Vec3::Zero());

    std::vector<std::vector<int>> by_component(topology.component_count);
    for (std::size_t f = 0; f < topology.faces.size(); ++f)
        by_component[topology.face_component[f]].push_back(static_cast<int>(f));

    const Faces& faces = topology.faces;
    for (const auto& tris : by_component) {
        Box cbox;
        for (int f : tris)
            for (int c = 0; c < 3; ++c)
                cbox.grow(vertices.row(faces[f][c]).transpose());
        std::array<int, 3> i0, i1;
        bool empty = false;
        for (int a = 0; a < 3; ++a) {
            i0[a] = std::max(0, static_cast<int>(std::ceil((cbox.lo[a] - sdf.origin[a]) / h)));
            i1[a] = std::min(n - 1, static_cast<int>(std::floor((cbox.hi[a] - sdf.origin[a]) / h)));
            empty = empty || i1[a] < i0[a];
        }
        if (empty)
            continue;
        const std::array<int, 3> dims = {i1[0] - i0[0] + 1, i1[1] - i0[1] + 1, i1[2] - i0[2] + 1};
        auto local = [&](int x, int y, int z) {
            return (static_cast<std::size_t>(x - i0[0]) * dims[1] + (y - i0[1])) * dims[2] + (z - i0[2]);
        };
        std::vector<std::uint8_t> votes(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);

        struct Crossing {
            int line;
            double at;
            int sign;
            bool operator<(const Crossing& o) const { return line != o.line ? line < o.line : at < o.at; }
        };
        std::vector<Crossing> crossings;
        for (int a = 0; a < 3; ++a) {
            const int b = (a + 1) % 3, c = (a + 2) % 3;
            crossings.clear();
            for (int f : tris) {
                const auto& face = faces[f];
                std::array<Vec3, 3> v;
                std::array<Eigen::Vector2d, 3> q;
                for (int k = 0; k < 3; ++k) {
                    v[k] = vertices.row(face[k]).transpose();
                    q[k] = Eigen::Vector2d(v[k][b], v[k][c]);
                }
                const double bmin = std::min({q[0].x(), q[1].x(), q[2].x()});
                const double bmax = std::max({q[0].x(), q[1].x(), q[2].x()});
                const double cmin = std::min({q[0].y(), q[1].y(), q[2].y()});
                const double cmax = std::max({q[0].y(), q[1].y(), q[2].y()});
                // one line of slack against rounding in the index computation
                const int jb0 = std::max(i0[b], static_cast<int>(std::ceil((bmin - sdf.origin[b]) / h)) - 1);
                const int jb1 = std::min(i1[b], static_cast<int>(std::floor((bmax - sdf.origin[b]) / h)) + 1);
                const int jc0 = std::max(i0[c], static_cast<int>(std::ceil((cmin - sdf.origin[c]) / h)) - 1);
                const int jc1 = std::min(i1[c], static_cast<int>(std::floor((cmax - sdf.origin[c]) / h)) + 1);
                for (int jb = jb0; jb <= jb1; ++jb) {
                    const double pb = sdf.origin[b] + jb * h;
                    if (pb < bmin || pb > bmax)
                        continue;
                    for (int jc = jc0; jc <= jc1; ++jc) {
                        const Eigen::Vector2d p(pb, sdf.origin[c] + jc * h);
                        if (p.y() < cmin || p.y() > cmax)
                            continue;
                        const EdgeSide e0 = edge_side(face[1], q[1], face[2], q[2], p);
                        const EdgeSide e1 = edge_side(face[2], q[2], face[0], q[0], p);
                        const EdgeSide e2 = edge_side(face[0], q[0], face[1], q[1], p);
                        if (e0.positive != e1.positive || e1.positive != e2.positive)
                            continue;
                        const double sum = e0.value + e1.value + e2.value;
                        if (sum == 0.0)
                            continue;
                        const double hit = (e0.value * v[0][a] + e1.value * v[1][a] + e2.value * v[2][a]) / sum;
                        crossings.push_back({(jb - i0[b]) * dims[c] + (jc - i0[c]), hit, e0.positive ? 1 : -1});
                    }
                }
            }
            std::sort(crossings.begin(), crossings.end());
            for (std::size_t lo_k = 0; lo_k < crossings.size();) {
                std::size_t hi_k = lo_k;
                while (hi_k < crossings.size() && crossings[hi_k].line == crossings[lo_k].line)
                    ++hi_k;
                const int jb = crossings[lo_k].line / dims[c] + i0[b];
                const int jc = crossings[lo_k].line % dims[c] + i0[c];
                // winding of a ray toward +a: crossings strictly beyond the center
                int winding = 0;
                std::ptrdiff_t next = static_cast<std::ptrdiff_t>(hi_k) - 1;
                for (int ja = i1[a]; ja >= i0[a]; --ja) {
                    const double x = sdf.origin[a] + ja * h;
                    while (next >= static_cast<std::ptrdiff_t>(lo_k) && crossings[next].at > x)
                        winding += crossings[next--].sign;
                    if (winding != 0) {
                        std::array<int, 3> idx;
                        idx[a] = ja;
                        idx[b] = jb;
                        idx[c] = jc;
                        ++votes[local(idx[0], idx[1], idx[2])];
                    }
                }
                lo_k = hi_k;
            }
        }

        std::vector<std::size_t> inside;
        for (int x = i0[0]; x <= i1[0]; ++x)
            for (int y = i0[1]; y <= i1[1]; ++y)
                for (int z = i0[2]; z <= i1[2]; ++z)
                    if (votes[local(x, y, z)] >= 2)
                        inside.push_back(sdf.index(x, y, z));
        if (inside.empty())
            continue;
        const TriangleBvh bvh(vertices, faces, tris);
        std::vector<ClosestHit> hits(inside.size());
#pragma omp parallel for schedule(static) if (inside.size() > 4096)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(inside.size()); ++k) {
            const std::size_t id = inside[k];
            const int x = static_cast<int>(id / (static_cast<std::size_t>(n) * n));
            const int y = static_cast<int>((id / n) % n);
            const int z = static_cast<int>(id % n);
            hits[k] = bvh.closest(sdf.center(x, y, z));
        }
        for (std::size_t k = 0; k < inside.size(); ++k) {
            const double d = std::sqrt(hits[k].dist2);
            const std::size_t id = inside[k];
            if (d > sdf.values[id]) {
                sdf.values[id] = d;
                sdf.closest_face[id] = hits[k].face;
                sdf.closest_bary[id] = hits[k].bary;
            }
        }
    }

    std::uint64_t sig = 1469598103934665603ull;
    for (int s : sdf.bbox_support)
        hash_mix(sig, static_cast<std::uint64_t>(s));
    for (std::size_t id = 0; id < total; ++id) {
        if (sdf.closest_face[id] >= 0)
            hash_mix(sig, id);
    }
    sdf.signature = sig;
    return sdf;
}

PsiSample sample_psi_detail(const VoxelSdf& sdf, const Vec3& point)
{
    PsiSample out;
    const int n = sdf.resolution;
    if (n < 2 || !point.allFinite())
        return out;
    const Vec3 s = (point - sdf.origin) / sdf.cell_size;
    for (int a = 0; a < 3; ++a)
        if (!(s[a] >= 0.0 && s[a] <= n - 1))
            return out;
    out.in_grid = true;
    for (int a = 0; a < 3; ++a) {
        out.cell[a] = std::min(static_cast<int>(std::floor(s[a])), n - 2);
        out.fraction[a] = s[a] - out.cell[a];
    }
    const Vec3& f = out.fraction;
    double value = 0.0;
    Vec3 grad = Vec3::Zero();
    for (int corner = 0; corner < 8; ++corner) {
        const int dx = corner >> 2 & 1, dy = corner >> 1 & 1, dz = corner & 1;
        const double v = sdf.value(out.cell[0] + dx, out.cell[1] + dy, out.cell[2] + dz);
        if (v == 0.0)
            continue;
        const double wx = dx ? f[0] : 1.0 - f[0];
        const double wy = dy ? f[1] : 1.0 - f[1];
        const double wz = dz ? f[2] : 1.0 - f[2];
        value += wx * wy * wz * v;
        grad[0] += (dx ? 1.0 : -1.0) * wy * wz * v;
        grad[1] += wx * (dy ? 1.0 : -1.0) * wz * v;
        grad[2] += wx * wy * (dz ? 1.0 : -1.0) * v;
    }
    out.value = value;
    out.gradient = grad / sdf.cell_size;
    return out;
}

double sample_psi(const VoxelSdf& sdf, const Vec3& point)
{
    return sample_psi_detail(sdf, point).value;
}

void write_sdf_binary(const VoxelSdf& sdf, const std::string& path)
{
    std::string out(kMagic, sizeof kMagic);
    put_u64(out, static_cast<std::uint64_t>(sdf.resolution));
    for (int a = 0; a < 3; ++a)
        put_u64(out, std::bit_cast<std::uint64_t>(sdf.origin[a]));
    put_u64(out, std::bit_cast<std::uint64_t>(sdf.cell_size));
    out.reserve(out.size() + 8 * sdf.values.size());
    for (double v : sdf.values)
        put_u64(out, std::bit_cast<std::uint64_t>(v));
    write_file_atomic(path, out);
}

VoxelSdf read_sdf_binary(const std::string& path)
{
    const std::string in = read_file(path);
    if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
        throw InvalidArgument(path + ": not an SDF dump");
    std::size_t pos = sizeof kMagic;
    VoxelSdf sdf;
    const std::uint64_t n = get_u64(in, pos);
    if (n < 2 || n > 4096)
        throw InvalidArgument(path + ": implausible resolution");
    sdf.resolution = static_cast<int>(n);
    for (int a = 0; a < 3; ++a)
        sdf.origin[a] = std::bit_cast<double>(get_u64(in, pos));
    sdf.cell_size = std::bit_cast<double>(get_u64(in, pos));
    const std::size_t total = n * n * n;
    if (in.size() != pos + 8 * total)
        throw InvalidArgument(path + ": size does not match the header");
    sdf.values.resize(total);
    for (auto& v : sdf.values)
        v = std::bit_cast<double>(get_u64(in, pos));
    sdf.closest_face.assign(total, -1);
    sdf.closest_bary.assign(total, Vec3::Zero());
    return sdf;
}

}  // namespace twohand
