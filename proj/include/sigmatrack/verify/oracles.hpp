#pragma once

// Reference implementations used only to check the production code. They are
// written without sharing code paths with the library: plain loops, dense
// textbook matrix forms and a hand-rolled Jacobi eigen solver.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sigmatrack/types.hpp"

namespace sigmatrack::verify {

using Array3 = std::array<double, 3>;
using Matrix3 = std::array<std::array<double, 3>, 3>;

struct MomentResult {
  Array3 centroid{};
  Matrix3 covariance{};
  Array3 eigenvalues{};  // descending
  Matrix3 eigenvectors{};  // columns
};

/// Cyclic Jacobi rotations on a symmetric 3x3 matrix, eigenvalues sorted
/// descending.
void jacobi_eigen(const Matrix3& a, Array3& eigenvalues, Matrix3& eigenvectors);

/// Long-double weighted first and second moments, normalized by the weight sum.
MomentResult brute_force_moments(std::span<const Vec3> points,
                                 std::span<const double> weights);

/// Surface point centre + radius * n of a sphere, seen from a camera at the
/// origin: visible iff n . centre < -radius (outward normal faces the camera)
/// and the point lies in the image.
bool sphere_point_visible(const Array3& centre, double radius, const Array3& n,
                          double fx, double fy, double cx, double cy,
                          double width, double height, double near_z);

/// Dense 6-state constant-velocity Kalman filter on dynamic-size matrices
/// with the covariance update P = (I - K H) P.
class DenseKalman {
 public:
  DenseKalman(const Array3& position, double p0_pos, double p0_vel,
              double q_pos, double q_vel);

  void predict(double dt);
  /// x <- F x, P <- F P F^T for F = blockdiag(R, R) plus translation t.
  void transform(const Matrix3& R, const Array3& t);
  void correct(const Array3& z, const Array3& r_diagonal);

  Array3 position() const;
  Array3 velocity() const;
  double covariance(std::size_t i, std::size_t j) const;

 private:
  std::vector<double> x_;              // 6
  std::vector<std::vector<double>> P_; // 6 x 6
  double q_pos_;
  double q_vel_;
};

/// Measurement noise for a point at depth z.
Array3 pinhole_noise_diagonal(double z, double fx, double fy, double sigma_u,
                              double sigma_v, double sigma_z);

// ---- Task criteria and reward, written directly from the tables ----------

struct TableCriteria {
  double eps_x = 0.05, eps_y = 0.03, eps_yaw = 0.10, eps_pitch = 0.15;
  double delta_x = 0.10, delta_y = 0.10, delta_yaw = 0.20, delta_pitch = 0.20;
};

struct TableReward {
  double sigma_track = 0.04;
  double k = 1.0;
  std::array<double, 7> weights{0.4, 20.0, -0.1, -2.0, -0.1, -0.01, -0.1};
  double v_clip = 0.5;
  double pitch_clip = 0.52359877559829882566;
};

struct TableInput {
  Array3 p_e{}, rpy_e{};
  Array3 p_opt{}, rpy_opt{}, p_hint{};
  Array3 w_pos{1, 1, 1}, w_rot{1, 1, 1};
  Array3 gravity{0, 0, -1}, lin_vel{}, ang_vel{};
  std::array<double, 4> raw_action{}, prev_action{};
  bool out_fov = false;
};

/// 1 = success, 2 = failure, 0 = neither.
int table_terminal(const TableInput& in, const TableCriteria& c, bool timed_out);

struct TableRewardTerms {
  std::array<double, 7> terms{};
  double total = 0.0;
};

/// Clips the raw action itself and evaluates the seven reward rows.
TableRewardTerms table_reward(const TableInput& in, const TableCriteria& c,
                              const TableReward& r);

}  // namespace sigmatrack::verify
