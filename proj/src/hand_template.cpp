#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "twohand/hand_model.hpp"

namespace twohand {
namespace {

// Rest-pose bone table for the right hand. Lengths and half-widths in meters;
// the cross-section half-thickness is 0.85 of the half-width.
struct BoneSpec {
    double length;
    double half_width;
};

// Finger order: thumb, index, middle, ring, pinky; three bones each.
constexpr BoneSpec kFingerBones[5][3] = {
    {{0.040, 0.0115}, {0.032, 0.0100}, {0.027, 0.0090}},
    {{0.042, 0.0088}, {0.025, 0.0080}, {0.020, 0.0072}},
    {{0.046, 0.0090}, {0.029, 0.0082}, {0.022, 0.0074}},
    {{0.043, 0.0085}, {0.027, 0.0077}, {0.021, 0.0070}},
    {{0.035, 0.0075}, {0.020, 0.0068}, {0.019, 0.0062}}};

// Finger base position as fractions of (palm half-width, palm length, palm half-thickness).
constexpr double kFingerBase[5][3] = {
    {-0.55, 0.22, -0.35}, {-0.68, 1.00, 0.0}, {-0.22, 1.03, 0.0}, {0.25, 0.99, 0.0}, {0.68, 0.92, 0.0}};

constexpr double kFingerDirection[5][3] = {
    {-0.62, 0.75, -0.25}, {-0.08, 1.0, 0.0}, {0.0, 1.0, 0.0}, {0.06, 1.0, 0.0}, {0.14, 1.0, 0.0}};

constexpr double kThicknessRatio = 0.85;

// Shape basis: relative change of per-bone length (A) and cross-section (B)
// per unit coefficient. Unit coefficients bound lengths to +-20% and widths
// to +-30%.
struct ShapeBasis {
    Eigen::Matrix<double, kJointCount, kShapeDim> length;
    Eigen::Matrix<double, kJointCount, kShapeDim> width;
};

ShapeBasis make_shape_basis()
{
    ShapeBasis s;
    s.length.setZero();
    s.width.setZero();
    for (int b = 0; b < kJointCount; ++b) {
        s.length(b, 0) = 0.08;  // overall size
        s.width(b, 1) = 0.10;   // overall girth
    }
    s.length(0, 2) = 0.08;  // palm length
    s.width(0, 3) = 0.10;   // palm width
    for (int b = 1; b <= 3; ++b) {
        s.length(b, 4) = 0.06;  // thumb length
        s.width(b, 9) = 0.10;   // thumb girth
    }
    for (int b = 4; b <= 9; ++b)
        s.length(b, 5) = 0.06;  // index + middle length
    for (int b = 10; b <= 15; ++b)
        s.length(b, 6) = 0.06;  // ring + pinky length
    for (int b = 1; b < kJointCount; ++b)
        s.width(b, 7) = 0.10;   // finger girth
    for (int f = 0; f < 5; ++f) {
        s.length(3 * f + 3, 8) = 0.06;  // distal taper
        s.width(3 * f + 3, 8) = -0.10;
    }
    return s;
}

struct Capsule {
    Vec3 start;
    Vec3 axis;       // unit
    Vec3 width_dir;  // unit, width_dir x thickness_dir == axis
    Vec3 thickness_dir;
    double length;
    double half_width;
    double half_thickness;
};

// One ring of a capsule: axial position z = z_len * length + z_cap * cap and
// radial scale r, where cap = half_thickness.
struct RingSpec {
    double z_len;
    double z_cap;
    double radius;
    bool keypoint_start = false;
    bool keypoint_end = false;
};

struct CapsuleLayout {
    std::vector<RingSpec> rings;
    bool poles = true;
};

enum class Detail { Rich, Medium, Coarse };

CapsuleLayout layout_for(int bone, Detail detail)
{
    CapsuleLayout l;
    const bool palm = bone == 0;
    auto cap_ring = [](double alpha, bool start) {
        RingSpec r;
        r.z_len = start ? 0.0 : 1.0;
        r.z_cap = (start ? -1.0 : 1.0) * std::cos(alpha);
        r.radius = std::sin(alpha);
        return r;
    };
    auto body_ring = [](double frac) {
        RingSpec r;
        r.z_len = frac;
        r.z_cap = 0.0;
        r.radius = 1.0;
        return r;
    };
    std::vector<double> cap_angles;
    std::vector<double> body;
    switch (detail) {
    case Detail::Rich:
        cap_angles = palm ? std::vector<double>{M_PI / 6, M_PI / 3} : std::vector<double>{M_PI / 4};
        body = palm ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0} : std::vector<double>{0.0, 0.5, 1.0};
        break;
    case Detail::Medium:
        body = palm ? std::vector<double>{0.0, 0.5, 1.0} : std::vector<double>{0.0, 1.0};
        break;
    case Detail::Coarse:
        body = {0.0, 1.0};
        l.poles = false;
        break;
    }
    for (double a : cap_angles)
        l.rings.push_back(cap_ring(a, true));
    for (double f : body)
        l.rings.push_back(body_ring(f));
    for (auto it = cap_angles.rbegin(); it != cap_angles.rend(); ++it)
        l.rings.push_back(cap_ring(*it, false));
    for (auto& r : l.rings) {
        if (r.z_len == 0.0 && r.z_cap == 0.0)
            r.keypoint_start = true;
        if (r.z_len == 1.0 && r.z_cap == 0.0)
            r.keypoint_end = true;
    }
    return l;
}

// Bone geometry for given per-bone length and width multipliers.
struct Skeleton {
    std::array<Capsule, kJointCount> capsules;
    Eigen::Matrix<double, kJointCount, 3> joints;
};

Skeleton make_skeleton(const TemplateConfig& cfg, const Eigen::Matrix<double, kJointCount, 1>& len_scale,
                       const Eigen::Matrix<double, kJointCount, 1>& width_scale)
{
    Skeleton sk;
    {
        Capsule& palm = sk.capsules[0];
        palm.start = Vec3::Zero();
        palm.axis = Vec3::UnitY();
        palm.thickness_dir = Vec3::UnitZ();
        palm.width_dir = palm.thickness_dir.cross(palm.axis);
        palm.length = cfg.palm_length * len_scale[0];
        palm.half_width = cfg.palm_half_width * width_scale[0];
        palm.half_thickness = cfg.palm_half_thickness * width_scale[0];
        sk.joints.row(0).setZero();
    }
    for (int f = 0; f < 5; ++f) {
        const Vec3 dir = Vec3(kFingerDirection[f][0], kFingerDirection[f][1], kFingerDirection[f][2]).normalized();
        Vec3 thick = Vec3::UnitZ() - Vec3::UnitZ().dot(dir) * dir;
        thick.normalize();
        const Vec3 wdir = thick.cross(dir);
        Vec3 p(kFingerBase[f][0] * cfg.palm_half_width * width_scale[0],
               kFingerBase[f][1] * cfg.palm_length * len_scale[0],
               kFingerBase[f][2] * cfg.palm_half_thickness * width_scale[0]);
        for (int k = 0; k < 3; ++k) {
            const int b = 1 + 3 * f + k;
            Capsule& c = sk.capsules[b];
            c.start = p;
            c.axis = dir;
            c.width_dir = wdir;
            c.thickness_dir = thick;
            c.length = kFingerBones[f][k].length * cfg.finger_length_scale * len_scale[b];
            c.half_width = kFingerBones[f][k].half_width * cfg.finger_width_scale * width_scale[b];
            c.half_thickness = kThicknessRatio * c.half_width;
            sk.joints.row(b) = p.transpose();
            p += c.length * dir;
        }
    }
    return sk;
}

struct Layout {
    std::array<CapsuleLayout, kJointCount> capsules;
    std::array<std::vector<int>, kJointCount> ring_segments;
};

Layout plan_layout(int budget)
{
    Layout out;
    for (Detail d : {Detail::Rich, Detail::Medium, Detail::Coarse}) {
        int fixed = 0;
        int ring_count = 0;
        double weight_sum = 0.0;
        for (int b = 0; b < kJointCount; ++b) {
            out.capsules[b] = layout_for(b, d);
            fixed += out.capsules[b].poles ? 2 : 0;
            ring_count += static_cast<int>(out.capsules[b].rings.size());
            weight_sum += (b == 0 ? 2.0 : 1.0) * static_cast<double>(out.capsules[b].rings.size());
        }
        const int ring_vertices = budget - fixed;
        const double mean_segments = static_cast<double>(ring_vertices) / ring_count;
        const bool last = d == Detail::Coarse;
        if (mean_segments < 6.0 && !last)
            continue;
        if (ring_vertices < 3 * ring_count)
            throw InvalidArgument("vertex budget too small for the hand template");

        // Largest-remainder apportionment weighted by ring perimeter class.
        struct Share {
            int bone, ring;
            double ideal;
            int count;
        };
        std::vector<Share> shares;
        int assigned = 0;
        for (int b = 0; b < kJointCount; ++b) {
            const auto& rings = out.capsules[b].rings;
            for (int r = 0; r < static_cast<int>(rings.size()); ++r) {
                const double ideal = ring_vertices * (b == 0 ? 2.0 : 1.0) / weight_sum;
                const int count = std::max(3, static_cast<int>(std::floor(ideal)));
                shares.push_back({b, r, ideal, count});
                assigned += count;
            }
        }
        // Trim overshoot from clamping, largest rings first.
        while (assigned > ring_vertices) {
            auto it = std::max_element(shares.begin(), shares.end(),
                                       [](const Share& a, const Share& b) { return a.count < b.count; });
            --it->count;
            --assigned;
        }
        std::vector<int> order(shares.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return (shares[a].ideal - shares[a].count) > (shares[b].ideal - shares[b].count);
        });
        for (std::size_t k = 0; assigned < ring_vertices; k = (k + 1) % order.size()) {
            ++shares[order[k]].count;
            ++assigned;
        }
        for (int b = 0; b < kJointCount; ++b)
            out.ring_segments[b].assign(out.capsules[b].rings.size(), 0);
        for (const auto& s : shares)
            out.ring_segments[s.bone][s.ring] = s.count;
        return out;
    }
    throw InvalidArgument("vertex budget too small for the hand template");
}

// Vertex placement record, independent of bone dimensions.
struct VertexSlot {
    int bone;
    double z_len, z_cap;  // axial position = z_len*L + z_cap*thickness
    double radius;
    double angle;
};

struct Connectivity {
    std::vector<VertexSlot> slots;
    Faces faces;
    std::array<std::vector<int>, kKeypointCount> keypoint_rings;
};

// Triangulates the band between two rings with possibly different counts.
void stitch(const std::vector<int>& a, const std::vector<int>& b, Faces& faces)
{
    const int na = static_cast<int>(a.size());
    const int nb = static_cast<int>(b.size());
    int i = 0;
    int j = 0;
    while (i < na || j < nb) {
        const bool advance_a = j == nb || (i < na && static_cast<double>(i + 1) / na <= static_cast<double>(j + 1) / nb);
        if (advance_a) {
            faces.push_back({a[i % na], a[(i + 1) % na], b[j % nb]});
            ++i;
        } else {
            faces.push_back({a[i % na], b[(j + 1) % nb], b[j % nb]});
            ++j;
        }
    }
}

Connectivity build_connectivity(const Layout& layout)
{
    Connectivity c;
    auto add = [&](const VertexSlot& s) {
        c.slots.push_back(s);
        return static_cast<int>(c.slots.size()) - 1;
    };
    for (int b = 0; b < kJointCount; ++b) {
        const auto& cap = layout.capsules[b];
        std::vector<std::vector<int>> rings;
        for (std::size_t r = 0; r < cap.rings.size(); ++r) {
            const auto& spec = cap.rings[r];
            const int n = layout.ring_segments[b][r];
            std::vector<int> ids;
            for (int k = 0; k < n; ++k)
                ids.push_back(add({b, spec.z_len, spec.z_cap, spec.radius, 2.0 * M_PI * k / n}));
            if (spec.keypoint_start)
                c.keypoint_rings[b] = ids;
            if (spec.keypoint_end && b % 3 == 0 && b > 0)
                c.keypoint_rings[16 + (b - 3) / 3] = ids;
            rings.push_back(std::move(ids));
        }
        for (std::size_t r = 0; r + 1 < rings.size(); ++r)
            stitch(rings[r], rings[r + 1], c.faces);
        const auto& first = rings.front();
        const auto& last = rings.back();
        if (cap.poles) {
            const int p0 = add({b, 0.0, -1.0, 0.0, 0.0});
            const int p1 = add({b, 1.0, 1.0, 0.0, 0.0});
            const int n0 = static_cast<int>(first.size());
            const int n1 = static_cast<int>(last.size());
            for (int k = 0; k < n0; ++k)
                c.faces.push_back({p0, first[(k + 1) % n0], first[k]});
            for (int k = 0; k < n1; ++k)
                c.faces.push_back({p1, last[k], last[(k + 1) % n1]});
        } else {
            const int n0 = static_cast<int>(first.size());
            const int n1 = static_cast<int>(last.size());
            for (int k = 1; k + 1 < n0; ++k)
                c.faces.push_back({first[0], first[k + 1], first[k]});
            for (int k = 1; k + 1 < n1; ++k)
                c.faces.push_back({last[0], last[k], last[k + 1]});
        }
    }
    return c;
}

Points place_vertices(const Connectivity& conn, const Skeleton& sk)
{
    Points v(static_cast<Eigen::Index>(conn.slots.size()), 3);
    for (std::size_t i = 0; i < conn.slots.size(); ++i) {
        const auto& s = conn.slots[i];
        const Capsule& c = sk.capsules[s.bone];
        const double z = s.z_len * c.length + s.z_cap * c.half_thickness;
        const Vec3 p = c.start + z * c.axis
            + s.radius * (c.half_width * std::cos(s.angle) * c.width_dir
                          + c.half_thickness * std::sin(s.angle) * c.thickness_dir);
        v.row(static_cast<Eigen::Index>(i)) = p.transpose();
    }
    return v;
}

double blend_kernel(double x, double h)
{
    if (std::abs(x) >= h)
        return 0.0;
    const double t = 1.0 - (x / h) * (x / h);
    return t * t;
}

Eigen::VectorXd flatten(const Points& p)
{
    Eigen::VectorXd out(p.rows() * 3);
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        out.segment<3>(3 * i) = p.row(i).transpose();
    return out;
}

SideGeometry mirror(const SideGeometry& right)
{
    SideGeometry left = right;
    left.rest_vertices.col(0) *= -1.0;
    left.rest_joints.col(0) *= -1.0;
    for (Eigen::Index r = 0; r < left.vertex_shape_dirs.rows(); r += 3)
        left.vertex_shape_dirs.row(r) *= -1.0;
    for (int r = 0; r < 3 * kJointCount; r += 3)
        left.joint_shape_dirs.row(r) *= -1.0;
    left.faces = flip_winding(right.faces);
    return left;
}

template <typename T>
void hash_bytes(std::uint64_t& h, const T* data, std::size_t count)
{
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < count * sizeof(T); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
}

}  // namespace

Eigen::MatrixXd HandTemplate::skin_weight_matrix() const
{
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(vertex_count(), kJointCount);
    for (int i = 0; i < vertex_count(); ++i)
        for (int k = skin_offsets[i]; k < skin_offsets[i + 1]; ++k)
            w(i, skin[k].bone) += skin[k].weight;
    return w;
}

Eigen::Matrix<double, kKeypointCount, 3> HandTemplate::rest_keypoints(Side s, const HandShape& shape) const
{
    const auto& g = side(s);
    const Eigen::VectorXd flat = g.vertex_shape_dirs * shape.coefficients;
    Points shaped = g.rest_vertices;
    for (Eigen::Index i = 0; i < shaped.rows(); ++i)
        shaped.row(i) += flat.segment<3>(3 * i).transpose();
    return joint_regressor * shaped;
}

std::uint64_t HandTemplate::content_hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    const auto& g = sides[1];
    hash_bytes(h, g.rest_vertices.data(), static_cast<std::size_t>(g.rest_vertices.size()));
    hash_bytes(h, g.vertex_shape_dirs.data(), static_cast<std::size_t>(g.vertex_shape_dirs.size()));
    hash_bytes(h, g.rest_joints.data(), static_cast<std::size_t>(g.rest_joints.size()));
    hash_bytes(h, g.faces.data(), g.faces.size());
    for (const auto& s : skin) {
        hash_bytes(h, &s.bone, 1);
        hash_bytes(h, &s.weight, 1);
    }
    hash_bytes(h, joint_regressor.data(), static_cast<std::size_t>(joint_regressor.size()));
    return h;
}

HandTemplate build_template(const TemplateConfig& config)
{
    if (config.vertex_budget < 100)
        throw InvalidArgument("template vertex budget must be at least 100");
    for (double d : {config.palm_length, config.palm_half_width, config.palm_half_thickness,
                     config.finger_width_scale, config.finger_length_scale})
        if (!(d > 0.0) || !std::isfinite(d))
            throw InvalidArgument("template dimensions must be positive and finite");
    if (!(config.blend_fraction > 0.0 && config.blend_fraction <= 0.5))
        throw InvalidArgument("blend_fraction must lie in (0, 0.5]");

    const Layout layout = plan_layout(config.vertex_budget);
    const Connectivity conn = build_connectivity(layout);
    const ShapeBasis basis = make_shape_basis();

    using Scale = Eigen::Matrix<double, kJointCount, 1>;
    const Scale ones = Scale::Ones();
    const Skeleton base = make_skeleton(config, ones, ones);

    HandTemplate t;
    t.config = config;
    SideGeometry right;
    right.rest_vertices = place_vertices(conn, base);
    right.rest_joints = base.joints;
    right.faces = conn.faces;
    const int nv = static_cast<int>(right.rest_vertices.rows());
    right.vertex_shape_dirs.resize(3 * nv, kShapeDim);
    const Eigen::VectorXd base_flat = flatten(right.rest_vertices);
    for (int i = 0; i < kShapeDim; ++i) {
        const Skeleton sk = make_skeleton(config, ones + basis.length.col(i), ones + basis.width.col(i));
        right.vertex_shape_dirs.col(i) = flatten(place_vertices(conn, sk)) - base_flat;
        for (int j = 0; j < kJointCount; ++j)
            right.joint_shape_dirs.block<3, 1>(3 * j, i) = (sk.joints.row(j) - base.joints.row(j)).transpose();
    }

    // Skinning: blend with the parent near the proximal joint and with a
    // single child near the distal joint, as a function of axial position only.
    std::array<int, kJointCount> child_count{};
    std::array<int, kJointCount> only_child{};
    only_child.fill(-1);
    for (int j = 1; j < kJointCount; ++j) {
        ++child_count[kParents[j]];
        only_child[kParents[j]] = j;
    }
    t.skin_offsets.push_back(0);
    t.vertex_bone.resize(nv);
    for (int i = 0; i < nv; ++i) {
        const auto& s = conn.slots[i];
        const Capsule& c = base.capsules[s.bone];
        t.vertex_bone[i] = s.bone;
        const double z = s.z_len * c.length + s.z_cap * c.half_thickness;
        const double h = config.blend_fraction * c.length;
        double w_parent = 0.0;
        double w_child = 0.0;
        if (s.bone > 0)
            w_parent = z >= 0.0 ? 0.5 * blend_kernel(z, h) : 1.0 - 0.5 * blend_kernel(z, h);
        if (s.bone > 0 && child_count[s.bone] == 1) {
            const double zc = c.length - z;
            w_child = zc >= 0.0 ? 0.5 * blend_kernel(zc, h) : 1.0 - 0.5 * blend_kernel(zc, h);
        }
        const double w_own = 1.0 - w_parent - w_child;
        if (w_parent > 0.0)
            t.skin.push_back({kParents[s.bone], w_parent});
        if (w_own > 0.0)
            t.skin.push_back({s.bone, w_own});
        if (w_child > 0.0)
            t.skin.push_back({only_child[s.bone], w_child});
        t.skin_offsets.push_back(static_cast<int>(t.skin.size()));
    }

    t.joint_regressor = Eigen::MatrixXd::Zero(kKeypointCount, nv);
    for (int k = 0; k < kKeypointCount; ++k) {
        const auto& ring = conn.keypoint_rings[k];
        for (int idx : ring)
            t.joint_regressor(k, idx) = 1.0 / static_cast<double>(ring.size());
    }

    t.sides[static_cast<int>(Side::Left)] = mirror(right);
    t.sides[static_cast<int>(Side::Right)] = std::move(right);
    for (int s = 0; s < 2; ++s)
        t.topology[s] = analyze_topology(t.sides[s].faces, nv);
    return t;
}

}  // namespace twohand
