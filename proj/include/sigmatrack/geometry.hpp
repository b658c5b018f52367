#pragma once

// Frames, pinhole camera, visibility culling and the weighted-PCA sigma point
// representation of a visible object surface.
//
// Camera frame convention: +Z along the optical axis into the scene, +X right,
// +Y down.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sigmatrack/types.hpp"

namespace sigmatrack {

/// True if `rotation` is orthonormal with determinant +1 within `tol`.
bool is_rotation(const Mat3& rotation, double tol = 1e-9);

/// Intrinsic x-y-z (roll about X, pitch about Y, yaw about Z) composed as
/// Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 rotation_from_rpy(double roll, double pitch, double yaw);

/// Rotation of `angle` radians about `axis` (need not be normalized).
Mat3 rotation_about(const Vec3& axis, double angle);

/// Element of SE(3) mapping coordinates expressed in `from_frame()` into
/// `to_frame()`: p_to = R * p_from + t.
class RigidTransform {
 public:
  RigidTransform() = default;
  /// Throws Error(kInvalidRotation) when `rotation` is not in SO(3).
  RigidTransform(const Mat3& rotation, const Vec3& translation,
                 std::string from_frame = {}, std::string to_frame = {});

  static RigidTransform identity(const std::string& frame = {});

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  const std::string& from_frame() const { return from_frame_; }
  const std::string& to_frame() const { return to_frame_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  RigidTransform inverse() const;

  /// (*this) after `rhs`: maps rhs.from_frame() into this->to_frame().
  /// Throws Error(kFrameMismatch) unless rhs.to_frame() == from_frame().
  RigidTransform operator*(const RigidTransform& rhs) const;

  /// Relabel frames without touching the numeric part.
  RigidTransform with_frames(std::string from_frame,
                             std::string to_frame) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  std::string from_frame_;
  std::string to_frame_;
};

struct CameraModel {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;
  double near_z = 0.05;  // [m]

  /// Throws Error(kInvalidArgument) on non-positive focal lengths, near_z or
  /// image size.
  void validate() const;
};

struct Projection {
  Vec2 pixel = Vec2::Zero();
  bool in_fov = false;
};

/// Pinhole projection. For z < near_z the pixel is computed at depth near_z
/// (finite, meaningless) and in_fov is false.
Projection project_point(const CameraModel& cam, const Vec3& p);

/// Inverse of project_point. Throws Error(kInvalidDepth) if depth < near_z.
Vec3 backproject_pixel(const CameraModel& cam, const Vec2& pixel,
                       double depth);

/// Points with unit normals in a named frame. An empty `normals` vector marks
/// a cloud without normals (e.g. back-projected from an image mask).
struct SurfacePointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::string frame;

  bool has_normals() const { return !normals.empty(); }
  /// Throws Error(kInvalidArgument) on size mismatch or non-unit normals.
  void validate() const;
};

/// Throws Error(kFrameMismatch) unless cloud.frame == T.from_frame().
SurfacePointCloud transform_points(const SurfacePointCloud& cloud,
                                   const RigidTransform& T);

/// Indices i with n_i . p_i < 0 and p_i inside the camera frustum, in input
/// order. Requires normals.
std::vector<std::size_t> compute_visible_set(const SurfacePointCloud& cloud,
                                             const CameraModel& cam);

/// w_i = max(0, -n_i . p_i / |p_i|^3). Throws Error(kDegenerateGeometry) on a
/// zero-norm point and Error(kInvalidArgument) on size mismatch.
std::vector<double> solid_angle_weights(std::span<const Vec3> points,
                                        std::span<const Vec3> normals);

struct PcaResult {
  Vec3 centroid = Vec3::Zero();
  /// Descending.
  Vec3 eigenvalues = Vec3::Zero();
  /// Column k pairs with eigenvalues(k); each column's largest-magnitude
  /// component is positive (lowest index wins ties).
  Mat3 eigenvectors = Mat3::Identity();
  Mat3 covariance = Mat3::Zero();
};

/// Weighted centroid and covariance (normalized by the weight sum) followed by
/// a symmetric eigendecomposition. Throws Error(kDegenerateGeometry) if no
/// weight is positive and Error(kInvalidArgument) on negative weights or a
/// size mismatch.
PcaResult weighted_pca(std::span<const Vec3> points,
                       std::span<const double> weights);

inline constexpr std::size_t kSigmaCount = 7;

/// Index 0 is the centroid; indices (2k+1, 2k+2) are centroid +/- offset
/// along principal axis k (k = 0 is the largest eigenvalue).
struct SigmaPointSet {
  std::array<Vec3, kSigmaCount> points{};

  const Vec3& centroid() const { return points[0]; }
  const Vec3& plus(std::size_t axis) const { return points[2 * axis + 1]; }
  const Vec3& minus(std::size_t axis) const { return points[2 * axis + 2]; }

  /// Same shift applied to every point.
  SigmaPointSet translated(const Vec3& shift) const;
  /// Every point mapped through T.
  SigmaPointSet transformed(const RigidTransform& T) const;
  /// Row-major 7x3 flattening.
  std::array<double, 3 * kSigmaCount> flatten() const;
};

/// Eigenvalues below -1e-12 throw Error(kNumerical); smaller negatives are
/// clamped to zero. Throws Error(kInvalidArgument) unless alpha > 0.
SigmaPointSet extract_sigma_points(const PcaResult& pca, double alpha);

/// Full pipeline. With normals: visibility culling, solid-angle weights,
/// weighted PCA. Without normals: every point with uniform weight. Returns
/// nullopt when nothing is visible.
std::optional<SigmaPointSet> sigma_points_from_cloud(
    const SurfacePointCloud& cloud, const CameraModel& cam, double alpha);

/// Uniform-weight PCA over raw points; nullopt on an empty input.
std::optional<SigmaPointSet> sigma_points_uniform(std::span<const Vec3> points,
                                                  double alpha);

}  // namespace sigmatrack
