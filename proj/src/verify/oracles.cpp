#include "sigmatrack/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sigmatrack::verify {

namespace {

constexpr double kPi = 3.14159265358979323846;

double wrap(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0.0) w += 2.0 * kPi;
  w -= kPi;
  // fmod maps +pi to -pi; move it to the closed end of (-pi, pi].
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

double gauss_kernel(double squared, double sigma) { return std::exp(-squared / sigma); }

}  // namespace

void jacobi_eigen(const Matrix3& a_in, Array3& eigenvalues, Matrix3& eigenvectors) {
  Matrix3 a = a_in;
  Matrix3 v{};
  for (int i = 0; i < 3; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a[p][q] * a[p][q];
    if (off == 0.0) break;

    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a[i][i] > a[j][j]; });
  for (int k = 0; k < 3; ++k) {
    eigenvalues[k] = a[order[k]][order[k]];
    for (int r = 0; r < 3; ++r) eigenvectors[r][k] = v[r][order[k]];
  }
}

MomentResult brute_force_moments(std::span<const Vec3> points,
                                 std::span<const double> weights) {
  if (points.size() != weights.size() || points.empty()) {
    throw std::invalid_argument("brute_force_moments: bad input sizes");
  }
  long double sw = 0.0L;
  long double m[3] = {0.0L, 0.0L, 0.0L};
  for (std::size_t i = 0; i < points.size(); ++i) {
    sw += weights[i];
    for (int c = 0; c < 3; ++c) m[c] += weights[i] * static_cast<long double>(points[i](c));
  }
  MomentResult out;
  long double mean[3];
  for (int c = 0; c < 3; ++c) {
    mean[c] = m[c] / sw;
    out.centroid[c] = static_cast<double>(mean[c]);
  }
  long double s[3][3] = {};
  for (std::size_t i = 0; i < points.size(); ++i) {
    long double d[3];
    for (int c = 0; c < 3; ++c) d[c] = points[i](c) - mean[c];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) s[r][c] += weights[i] * d[r] * d[c];
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.covariance[r][c] = static_cast<double>(s[r][c] / sw);
  jacobi_eigen(out.covariance, out.eigenvalues, out.eigenvectors);
  return out;
}

bool sphere_point_visible(const Array3& centre, double radius, const Array3& n,
                          double fx, double fy, double cx, double cy,
                          double width, double height, double near_z) {
  const double n_dot_c = n[0] * centre[0] + n[1] * centre[1] + n[2] * centre[2];
  if (!(n_dot_c < -radius)) return false;
  const double x = centre[0] + radius * n[0];
  const double y = centre[1] + radius * n[1];
  const double z = centre[2] + radius * n[2];
  if (z < near_z) return false;
  const double u = fx * x / z + cx;
  const double v = fy * y / z + cy;
  return u >= 0.0 && u < width && v >= 0.0 && v < height;
}

DenseKalman::DenseKalman(const Array3& position, double p0_pos, double p0_vel,
                         double q_pos, double q_vel)
    : x_(6, 0.0), P_(6, std::vector<double>(6, 0.0)), q_pos_(q_pos), q_vel_(q_vel) {
  for (int i = 0; i < 3; ++i) {
    x_[i] = position[i];
    P_[i][i] = p0_pos;
    P_[i + 3][i + 3] = p0_vel;
  }
}

namespace {

using Dense = std::vector<std::vector<double>>;

Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

Dense mul(const Dense& a, const Dense& b) {
  Dense out = zeros(a.size(), b[0].size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Dense transpose(const Dense& a) {
  Dense out = zeros(a[0].size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) out[j][i] = a[i][j];
  return out;
}

// 3x3 inverse by cofactors.
Dense inverse3(const Dense& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (det == 0.0) throw std::runtime_error("singular innovation covariance");
  Dense inv = zeros(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3;
      const int c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
    }
  }
  return inv;
}

}  // namespace

void DenseKalman::predict(double dt) {
  Dense F = zeros(6, 6);
  for (int i = 0; i < 6; ++i) F[i][i] = 1.0;
  for (int i = 0; i < 3; ++i) F[i][i + 3] = dt;
  std::vector<double> x(6, 0.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) x[i] += F[i][j] * x_[j];
  x_ = x;
  P_ = mul(mul(F, P_), transpose(F));
  for (int i = 0; i < 3; ++i) {
    P_[i][i] += q_pos_;
    P_[i + 3][i + 3] += q_vel_;
  }
}

void DenseKalman::transform(const Matrix3& R, const Array3& t) {
  Dense F = zeros(6, 6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) F[i][j] = F[i + 3][j + 3] = R[i][j];
  std::vector<double> x(6, 0.0);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) x[i] += F[i][j] * x_[j];
  for (int i = 0; i < 3; ++i) x[i] += t[i];
  x_ = x;
  P_ = mul(mul(F, P_), transpose(F));
}

void DenseKalman::correct(const Array3& z, const Array3& r_diagonal) {
  Dense H = zeros(3, 6);
  for (int i = 0; i < 3; ++i) H[i][i] = 1.0;
  const Dense Ht = transpose(H);
  Dense S = mul(mul(H, P_), Ht);
  for (int i = 0; i < 3; ++i) S[i][i] += r_diagonal[i];
  const Dense K = mul(mul(P_, Ht), inverse3(S));
  std::vector<double> innovation(3);
  for (int i = 0; i < 3; ++i) innovation[i] = z[i] - x_[i];
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) x_[i] += K[i][j] * innovation[j];
  Dense IKH = mul(K, H);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) IKH[i][j] = (i == j ? 1.0 : 0.0) - IKH[i][j];
  P_ = mul(IKH, P_);
}

Array3 DenseKalman::position() const { return {x_[0], x_[1], x_[2]}; }
Array3 DenseKalman::velocity() const { return {x_[3], x_[4], x_[5]}; }
double DenseKalman::covariance(std::size_t i, std::size_t j) const { return P_[i][j]; }

Array3 pinhole_noise_diagonal(double z, double fx, double fy, double sigma_u,
                              double sigma_v, double sigma_z) {
  const double sx = z * sigma_u / fx;
  const double sy = z * sigma_v / fy;
  return {sx * sx, sy * sy, sigma_z * sigma_z};
}

int table_terminal(const TableInput& in, const TableCriteria& c, bool timed_out) {
  const double dx = std::abs(in.p_e[0] - in.p_opt[0]);
  const double dy = std::abs(in.p_e[1] - in.p_opt[1]);
  const double dpitch = std::abs(wrap(in.rpy_e[1] - in.rpy_opt[1]));
  const double dyaw = std::abs(wrap(in.rpy_e[2] - in.rpy_opt[2]));
  const bool success =
      dx < c.eps_x && dy < c.eps_y && dyaw < c.eps_yaw && dpitch < c.eps_pitch;
  if (success) return 1;
  const bool failure = timed_out && (dx >= c.delta_x || dy >= c.delta_y ||
                                     dyaw >= c.delta_yaw || dpitch >= c.delta_pitch);
  return failure ? 2 : 0;
}

TableRewardTerms table_reward(const TableInput& in, const TableCriteria& c,
                              const TableReward& r) {
  double e_pos_sq = 0.0;
  double e_rot_sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double dp = in.p_e[i] - in.p_opt[i];
    const double dr = wrap(in.rpy_e[i] - in.rpy_opt[i]);
    e_pos_sq += in.w_pos[i] * dp * dp;
    e_rot_sq += in.w_rot[i] * dr * dr;
  }

  // Distance to the hint-to-optimal segment.
  double seg[3], rel[3];
  double seg_sq = 0.0, dot = 0.0;
  for (int i = 0; i < 3; ++i) {
    seg[i] = in.p_opt[i] - in.p_hint[i];
    rel[i] = in.p_e[i] - in.p_hint[i];
    seg_sq += seg[i] * seg[i];
    dot += seg[i] * rel[i];
  }
  const double t = seg_sq > 0.0 ? clamp(dot / seg_sq, 0.0, 1.0) : 0.0;
  double d_path_sq = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = rel[i] - t * seg[i];
    d_path_sq += d * d;
  }

  std::array<double, 4> clipped{};
  double limit = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double bound = i < 3 ? r.v_clip : r.pitch_clip;
    clipped[i] = clamp(in.raw_action[i], -bound, bound);
    limit += (clipped[i] - in.raw_action[i]) * (clipped[i] - in.raw_action[i]);
  }
  double smooth = 0.0;
  for (int i = 0; i < 4; ++i) {
    smooth += (clipped[i] - in.prev_action[i]) * (clipped[i] - in.prev_action[i]);
  }

  const double E_pos = gauss_kernel(e_pos_sq, r.sigma_track);
  const double E_rot = gauss_kernel(e_rot_sq, r.sigma_track);
  const double E_path = gauss_kernel(d_path_sq, r.sigma_track);
  const double v_sq = in.lin_vel[0] * in.lin_vel[0] + in.lin_vel[1] * in.lin_vel[1] +
                      in.ang_vel[2] * in.ang_vel[2];
  const double E_vel = gauss_kernel(v_sq, r.sigma_track);
  const bool success = table_terminal(in, c, false) == 1;

  TableRewardTerms out;
  out.terms[0] = E_path * E_rot * (1.0 + r.k * E_pos);
  out.terms[1] = success ? E_pos * E_rot * E_vel : 0.0;
  out.terms[2] = in.out_fov ? 1.0 : 0.0;
  out.terms[3] = in.gravity[1] * in.gravity[1];
  out.terms[4] = in.ang_vel[0] * in.ang_vel[0] + in.ang_vel[1] * in.ang_vel[1];
  out.terms[5] = smooth;
  out.terms[6] = limit;
  for (int i = 0; i < 7; ++i) out.total += r.weights[i] * out.terms[i];
  return out;
}

}  // namespace sigmatrack::verify
