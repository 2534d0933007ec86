#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "twohand/mesh.hpp"
#include "twohand/types.hpp"

namespace twohand {

inline constexpr int kShapeDim = 10;
inline constexpr int kJointCount = 16;      // wrist root + 3 per finger
inline constexpr int kPoseJointCount = 15;  // articulated joints
inline constexpr int kKeypointCount = 21;   // 16 joints + 5 fingertips
inline constexpr int kTwoHandKeypoints = 42;

/// Joint layout: 0 wrist; thumb 1-3 (CMC, MCP, IP); index 4-6; middle 7-9;
/// ring 10-12; pinky 13-15 (MCP, PIP, DIP). Keypoints 16-20 are the tips of
/// thumb, index, middle, ring, pinky.
inline constexpr std::array<int, kJointCount> kParents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};

/// Per finger, keypoint indices from tip to palm.
inline constexpr std::array<std::array<int, 4>, 5> kFingerChains = {{
    {16, 3, 2, 1}, {17, 6, 5, 4}, {18, 9, 8, 7}, {19, 12, 11, 10}, {20, 15, 14, 13}}};

/// Wrist plus the five finger-base keypoints, used for orientation fitting.
inline constexpr std::array<int, 6> kPalmKeypoints = {0, 1, 4, 7, 10, 13};

enum class Side { Left = 0, Right = 1 };

struct HandShape {
    Eigen::Matrix<double, kShapeDim, 1> coefficients = Eigen::Matrix<double, kShapeDim, 1>::Zero();
};

struct HandOrientation {
    Vec3 axis_angle = Vec3::Zero();
};

struct FingerPose {
    /// Row j is the axis-angle rotation of articulated joint j + 1.
    Eigen::Matrix<double, kPoseJointCount, 3> joint_rotations = Eigen::Matrix<double, kPoseJointCount, 3>::Zero();
};

struct HandParams {
    HandShape shape;
    HandOrientation orientation;
    FingerPose fingers;
};

/// Two-hand parameter set: right hand at the canonical origin, left hand
/// offset by the right-to-left translation.
struct TwoHandParams {
    HandParams left;
    HandParams right;
    Vec3 translation = Vec3::Zero();

    HandParams& hand(Side s) { return s == Side::Left ? left : right; }
    const HandParams& hand(Side s) const { return s == Side::Left ? left : right; }
    bool all_finite() const;
};

/// Parameter factor refined by one stage of the factorized refinement.
enum class Factor { Translation, Orientation, Fingers, Shape };

inline constexpr std::array<Factor, 4> kAllFactors = {Factor::Translation, Factor::Orientation, Factor::Fingers, Factor::Shape};

/// Flat layout used for gradients: [tau(3), phi_l(3), phi_r(3), theta_l(45),
/// theta_r(45), beta_l(10), beta_r(10)]. Each factor is contiguous.
inline constexpr int kParamCount = 3 + 6 + 90 + 20;

struct FactorSlice {
    int offset;
    int size;
};
FactorSlice factor_slice(Factor f);
const char* factor_name(Factor f);
std::optional<Factor> parse_factor(const std::string& name);

Eigen::VectorXd pack(const TwoHandParams& p);
TwoHandParams unpack(const Eigen::VectorXd& v);
/// Copy of `base` with the coordinates of `f` taken from `source`.
TwoHandParams replace_factor(const TwoHandParams& base, const TwoHandParams& source, Factor f);

/// Procedural template geometry knobs. Lengths in meters.
struct TemplateConfig {
    int vertex_budget = 778;
    double palm_length = 0.085;
    double palm_half_width = 0.040;
    double palm_half_thickness = 0.013;
    /// Multiplies every finger and thumb cross-section.
    double finger_width_scale = 1.0;
    /// Multiplies every finger and thumb bone length.
    double finger_length_scale = 1.0;
    /// Fraction of bone length over which skinning blends into neighbours.
    double blend_fraction = 0.45;
};

struct SkinInfluence {
    int bone;
    double weight;
};

/// Geometry of one hand side. The left side is the mirror image (x -> -x) of
/// the right with reversed winding.
struct SideGeometry {
    Points rest_vertices;                 ///< V×3 at zero shape
    Eigen::MatrixXd vertex_shape_dirs;    ///< 3V×10, row 3i+a is coordinate a of vertex i
    Eigen::Matrix<double, kJointCount, 3> rest_joints;
    Eigen::Matrix<double, 3 * kJointCount, kShapeDim> joint_shape_dirs;
    Faces faces;
};

/// Procedural stand-in for a learned hand model: one elliptic capsule per bone,
/// axial-falloff skinning, and a linear shape basis over bone lengths and widths.
struct HandTemplate {
    TemplateConfig config;
    std::array<SideGeometry, 2> sides;  ///< indexed by Side
    /// Skin weights, CSR layout: influences of vertex i are
    /// skin[skin_offsets[i] .. skin_offsets[i+1]).
    std::vector<int> skin_offsets;
    std::vector<SkinInfluence> skin;
    Eigen::MatrixXd joint_regressor;  ///< 21×V, rows sum to 1
    std::vector<int> vertex_bone;     ///< capsule each vertex was generated on
    std::array<SurfaceTopology, 2> topology;  ///< per side, indexed by Side

    int vertex_count() const { return static_cast<int>(sides[1].rest_vertices.rows()); }
    const SideGeometry& side(Side s) const { return sides[static_cast<int>(s)]; }
    /// Dense V×16 skin weight matrix.
    Eigen::MatrixXd skin_weight_matrix() const;
    /// Rest keypoints of one side for the given shape.
    Eigen::Matrix<double, kKeypointCount, 3> rest_keypoints(Side s, const HandShape& shape = {}) const;
    /// FNV-1a hash over all numeric arrays.
    std::uint64_t content_hash() const;
};

/// Builds the template. Deterministic for a given config; throws
/// InvalidArgument for non-positive dimensions or a budget below 100.
HandTemplate build_template(const TemplateConfig& config = {});

/// Posed two-hand mesh. Faces are shared by reference with the template.
struct TwoHandMesh {
    Points left_vertices;
    Points right_vertices;
    std::shared_ptr<const Faces> left_faces;
    std::shared_ptr<const Faces> right_faces;
    Eigen::Matrix<double, kTwoHandKeypoints, 3> joints_3d;  ///< left 21 then right 21
    /// Rigid frame of each hand (world = R * local + t), indexed by Side.
    /// Collision grids are built in this frame. Identity for generic meshes.
    std::array<Mat3, 2> frame_rotation = {Mat3::Identity(), Mat3::Identity()};
    std::array<Vec3, 2> frame_translation = {Vec3::Zero(), Vec3::Zero()};

    const Points& vertices(Side s) const { return s == Side::Left ? left_vertices : right_vertices; }
    const Faces& faces(Side s) const { return s == Side::Left ? *left_faces : *right_faces; }
};

struct WeakPerspectiveCamera {
    double scale = 1000.0;
    Vec2 translation = Vec2(112.0, 112.0);
};

/// Intermediate quantities of posing one hand, kept for differentiation.
struct HandPoseState {
    Side side = Side::Right;
    HandParams params;
    Points shaped_rest;                                  ///< rest vertices after shape blend
    Eigen::Matrix<double, kJointCount, 3> shaped_joints; ///< rest joint pivots after shape blend
    std::array<Mat3, kJointCount> local_rotation;        ///< per joint, identity for the root
    std::array<Mat3, kJointCount> bone_rotation;         ///< accumulated, local frame
    std::array<Vec3, kJointCount> bone_translation;
    Points local_vertices;  ///< posed without global orientation and translation
    Mat3 orientation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    Points world_vertices;
};

/// Poses one hand side. `translation` is applied after the global orientation.
HandPoseState pose_hand(const HandTemplate& tmpl, Side side, const HandParams& params, const Vec3& translation);

/// Two-hand forward model: right hand at the origin, left hand offset by the
/// translation. Joints are regressed from the posed vertices.
TwoHandMesh forward(const HandTemplate& tmpl, const TwoHandParams& params);

/// Joint regression applied to the vertices of both hands (left then right).
Eigen::Matrix<double, kTwoHandKeypoints, 3> regress_joints(const HandTemplate& tmpl, const TwoHandMesh& mesh);

/// Orthographic projection dropping depth, then scale and 2D translation.
Points2 project_weak_perspective(const Points& joints_3d, const WeakPerspectiveCamera& camera);

/// Sensitivities of a scalar with respect to one hand's posed geometry.
struct HandAdjoint {
    Points world_vertices;  ///< dL/d(world vertex), V×3, may be empty
    Points local_vertices;  ///< dL/d(local vertex), V×3, may be empty
    Vec3 orientation = Vec3::Zero();  ///< direct dL/d(phi)
    Mat3 rotation = Mat3::Zero();     ///< direct dL/d(global rotation matrix)
    Vec3 translation = Vec3::Zero();  ///< direct dL/d(translation)
    Eigen::Matrix<double, kShapeDim, 1> shape = Eigen::Matrix<double, kShapeDim, 1>::Zero();
};

/// Gradient of one hand's parameters (and of the translation that placed it).
struct HandGradient {
    Eigen::Matrix<double, kShapeDim, 1> shape = Eigen::Matrix<double, kShapeDim, 1>::Zero();
    Vec3 orientation = Vec3::Zero();
    Eigen::Matrix<double, kPoseJointCount, 3> fingers = Eigen::Matrix<double, kPoseJointCount, 3>::Zero();
    Vec3 translation = Vec3::Zero();
};

/// Reverse-mode pass through skinning and the kinematic chain.
/// `want_shape`/`want_fingers` skip the respective accumulations when false.
HandGradient backprop_hand(const HandTemplate& tmpl, const HandPoseState& state, const HandAdjoint& adjoint,
                           bool want_shape = true, bool want_fingers = true);

/// Forward-mode directional derivative of one hand's world vertices.
Points hand_vertex_jvp(const HandTemplate& tmpl, const HandPoseState& state, const HandParams& tangent,
                       const Vec3& translation_tangent);

/// Directional derivative of both hands' world vertices (left rows then right rows).
Points forward_jvp(const HandTemplate& tmpl, const TwoHandParams& params, const TwoHandParams& tangent);

/// Least-squares rotation about the wrist aligning the template's rest palm
/// keypoints to observed ones (21×3 keypoints of one hand). Throws
/// DegenerateInput when the palm points are collinear or coincident.
HandOrientation orientation_from_joints(const Eigen::Matrix<double, kKeypointCount, 3>& joints, const HandTemplate& tmpl,
                                        Side side, const HandShape& shape = {});

/// Twist-free finger rotations reproducing the observed bone directions,
/// solved root to tip. Throws DegenerateInput for zero-length observed bones.
FingerPose swing_from_joints(const Eigen::Matrix<double, kKeypointCount, 3>& joints, const HandOrientation& orientation,
                             const HandTemplate& tmpl, Side side, const HandShape& shape = {});

}  // namespace twohand
