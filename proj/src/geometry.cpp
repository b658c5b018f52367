#include "sigmatrack/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigmatrack/error.hpp"

namespace sigmatrack {

bool is_rotation(const Mat3& rotation, double tol) {
  if (!rotation.allFinite()) return false;
  const double ortho =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Mat3 rotation_from_rpy(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Mat3 rotation_about(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (n == 0.0 || angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation,
                               std::string from_frame, std::string to_frame)
    : rotation_(rotation),
      translation_(translation),
      from_frame_(std::move(from_frame)),
      to_frame_(std::move(to_frame)) {
  if (!is_rotation(rotation_)) {
    throw Error(ErrorCode::kInvalidRotation,
                "rotation is not orthonormal with det +1");
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite translation");
  }
}

RigidTransform RigidTransform::identity(const std::string& frame) {
  return RigidTransform(Mat3::Identity(), Vec3::Zero(), frame, frame);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  inv.from_frame_ = to_frame_;
  inv.to_frame_ = from_frame_;
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  if (rhs.to_frame_ != from_frame_) {
    throw Error(ErrorCode::kFrameMismatch,
                "cannot compose '" + rhs.from_frame_ + "->" + rhs.to_frame_ +
                    "' into '" + from_frame_ + "->" + to_frame_ + "'");
  }
  RigidTransform out;
  out.rotation_ = rotation_ * rhs.rotation_;
  out.translation_ = rotation_ * rhs.translation_ + translation_;
  out.from_frame_ = rhs.from_frame_;
  out.to_frame_ = to_frame_;
  return out;
}

RigidTransform RigidTransform::with_frames(std::string from_frame,
                                           std::string to_frame) const {
  RigidTransform out = *this;
  out.from_frame_ = std::move(from_frame);
  out.to_frame_ = std::move(to_frame);
  return out;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal lengths must be positive");
  }
  if (!(near_z > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "near_z must be positive");
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be >= 1");
  }
}

Projection project_point(const CameraModel& cam, const Vec3& p) {
  Projection out;
  const bool in_front = p.z() >= cam.near_z;
  const double z = in_front ? p.z() : cam.near_z;
  out.pixel = Vec2(cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy);
  out.in_fov = in_front && out.pixel.x() >= 0.0 && out.pixel.x() < cam.width &&
               out.pixel.y() >= 0.0 && out.pixel.y() < cam.height;
  return out;
}

Vec3 backproject_pixel(const CameraModel& cam, const Vec2& pixel,
                       double depth) {
  if (!(depth >= cam.near_z)) {
    throw Error(ErrorCode::kInvalidDepth,
                "depth " + std::to_string(depth) + " below near_z");
  }
  return Vec3((pixel.x() - cam.cx) * depth / cam.fx,
              (pixel.y() - cam.cy) * depth / cam.fy, depth);
}

void SurfacePointCloud::validate() const {
  if (has_normals() && normals.size() != points.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "points/normals size mismatch");
  }
  for (const Vec3& n : normals) {
    if (std::abs(n.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::kInvalidArgument, "normal is not unit length");
    }
  }
}

SurfacePointCloud transform_points(const SurfacePointCloud& cloud,
                                   const RigidTransform& T) {
  if (cloud.frame != T.from_frame()) {
    throw Error(ErrorCode::kFrameMismatch,
                "cloud in '" + cloud.frame + "' but transform expects '" +
                    T.from_frame() + "'");
  }
  SurfacePointCloud out;
  out.frame = T.to_frame();
  out.points.reserve(cloud.points.size());
  out.normals.reserve(cloud.normals.size());
  for (const Vec3& p : cloud.points) out.points.push_back(T.apply(p));
  for (const Vec3& n : cloud.normals) out.normals.push_back(T.rotate(n));
  return out;
}

std::vector<std::size_t> compute_visible_set(const SurfacePointCloud& cloud,
                                             const CameraModel& cam) {
  if (!cloud.has_normals() || cloud.normals.size() != cloud.points.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "visibility culling needs one normal per point");
  }
  std::vector<std::size_t> visible;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (cloud.normals[i].dot(p) < 0.0 && project_point(cam, p).in_fov) {
      visible.push_back(i);
    }
  }
  return visible;
}

std::vector<double> solid_angle_weights(std::span<const Vec3> points,
                                        std::span<const Vec3> normals) {
  if (points.size() != normals.size()) {
    throw Error(ErrorCode::kInvalidArgument, "points/normals size mismatch");
  }
  std::vector<double> w(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = points[i].norm();
    if (r == 0.0) {
      throw Error(ErrorCode::kDegenerateGeometry,
                  "point " + std::to_string(i) + " at the camera center");
    }
    w[i] = std::max(0.0, -normals[i].dot(points[i]) / (r * r * r));
  }
  return w;
}

namespace {

void canonicalize_sign(Eigen::Ref<Vec3> v) {
  int arg = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
  }
  if (v(arg) < 0.0) v = -v;
}

}  // namespace

PcaResult weighted_pca(std::span<const Vec3> points,
                       std::span<const double> weights) {
  if (points.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "points/weights size mismatch");
  }
  double total = 0.0;
  Vec3 moment = Vec3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (weights[i] < 0.0 || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::kInvalidArgument, "weights must be finite and >= 0");
    }
    total += weights[i];
    moment += weights[i] * points[i];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kDegenerateGeometry, "all weights are zero");
  }

  PcaResult out;
  out.centroid = moment / total;
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 d = points[i] - out.centroid;
    scatter.noalias() += weights[i] * (d * d.transpose());
  }
  out.covariance = scatter / total;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(out.covariance);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kNumerical, "eigendecomposition did not converge");
  }
  // Eigen returns ascending order; reorder descending, keeping the solver's
  // order among equal eigenvalues.
  std::array<int, 3> order{0, 1, 2};
  const Vec3& ascending = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return ascending(a) > ascending(b);
  });
  for (int k = 0; k < 3; ++k) {
    out.eigenvalues(k) = ascending(order[k]);
    out.eigenvectors.col(k) = solver.eigenvectors().col(order[k]);
    canonicalize_sign(out.eigenvectors.col(k));
  }
  return out;
}

SigmaPointSet SigmaPointSet::translated(const Vec3& shift) const {
  SigmaPointSet out = *this;
  for (Vec3& p : out.points) p += shift;
  return out;
}

SigmaPointSet SigmaPointSet::transformed(const RigidTransform& T) const {
  SigmaPointSet out;
  for (std::size_t i = 0; i < kSigmaCount; ++i) out.points[i] = T.apply(points[i]);
  return out;
}

std::array<double, 3 * kSigmaCount> SigmaPointSet::flatten() const {
  std::array<double, 3 * kSigmaCount> flat{};
  for (std::size_t i = 0; i < kSigmaCount; ++i) {
    for (int c = 0; c < 3; ++c) flat[3 * i + c] = points[i](c);
  }
  return flat;
}

SigmaPointSet extract_sigma_points(const PcaResult& pca, double alpha) {
  if (!(alpha > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  }
  SigmaPointSet out;
  out.points[0] = pca.centroid;
  for (int k = 0; k < 3; ++k) {
    double lambda = pca.eigenvalues(k);
    if (lambda < -1e-12) {
      throw Error(ErrorCode::kNumerical,
                  "negative eigenvalue " + std::to_string(lambda));
    }
    lambda = std::max(lambda, 0.0);
    const Vec3 offset = alpha * std::sqrt(lambda) * pca.eigenvectors.col(k);
    out.points[2 * k + 1] = pca.centroid + offset;
    out.points[2 * k + 2] = pca.centroid - offset;
  }
  return out;
}

std::optional<SigmaPointSet> sigma_points_uniform(std::span<const Vec3> points,
                                                  double alpha) {
  if (points.empty()) return std::nullopt;
  const std::vector<double> weights(points.size(), 1.0);
  return extract_sigma_points(weighted_pca(points, weights), alpha);
}

std::optional<SigmaPointSet> sigma_points_from_cloud(
    const SurfacePointCloud& cloud, const CameraModel& cam, double alpha) {
  if (!cloud.has_normals()) return sigma_points_uniform(cloud.points, alpha);

  const std::vector<std::size_t> visible = compute_visible_set(cloud, cam);
  if (visible.empty()) return std::nullopt;

  std::vector<Vec3> pts;
  std::vector<Vec3> nrm;
  pts.reserve(visible.size());
  nrm.reserve(visible.size());
  for (std::size_t i : visible) {
    pts.push_back(cloud.points[i]);
    nrm.push_back(cloud.normals[i]);
  }
  const std::vector<double> weights = solid_angle_weights(pts, nrm);
  return extract_sigma_points(weighted_pca(pts, weights), alpha);
}

}  // namespace sigmatrack
