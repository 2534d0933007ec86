#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace twohand {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// N×3 point set, one point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
/// N×2 point set, one point per row.
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

using Face = std::array<int, 3>;
using Faces = std::vector<Face>;

/// Invalid configuration or argument values.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A mesh that is not closed (some edge not shared by exactly two faces).
struct TopologyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Collinear, coincident or zero-length inputs where a direction or frame is needed.
struct DegenerateInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input arrays with mismatching sizes.
struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A metric with no valid samples to average over.
struct EmptyMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Objective evaluated to NaN or infinity.
struct NonFiniteValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace twohand
