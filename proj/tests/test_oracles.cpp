#include <doctest.h>

#include <cmath>

#include "sigmatrack/verify/oracles.hpp"

using namespace sigmatrack;
using namespace sigmatrack::verify;

TEST_CASE("jacobi solver on hand-computed matrices") {
  Array3 vals{};
  Matrix3 vecs{};
  jacobi_eigen({{{2, 0, 0}, {0, 5, 0}, {0, 0, 1}}}, vals, vecs);
  CHECK(vals[0] == doctest::Approx(5));
  CHECK(vals[1] == doctest::Approx(2));
  CHECK(vals[2] == doctest::Approx(1));
  // [[2,1,0],[1,2,0],[0,0,0]] has eigenvalues 3, 1, 0.
  jacobi_eigen({{{2, 1, 0}, {1, 2, 0}, {0, 0, 0}}}, vals, vecs);
  CHECK(vals[0] == doctest::Approx(3));
  CHECK(vals[1] == doctest::Approx(1));
  CHECK(std::abs(vals[2]) < 1e-14);
  CHECK(std::abs(std::abs(vecs[0][0]) - std::sqrt(0.5)) < 1e-12);
  CHECK(std::abs(vecs[0][0] - vecs[1][0]) < 1e-12);
}

TEST_CASE("brute-force moments on a weighted pair") {
  const std::vector<Vec3> p{{1, 0, 0}, {-1, 0, 0}};
  const std::vector<double> w{3, 1};
  const MomentResult m = brute_force_moments(p, w);
  CHECK(m.centroid[0] == doctest::Approx(0.5));
  CHECK(m.covariance[0][0] == doctest::Approx(0.75));
  CHECK(m.eigenvalues[0] == doctest::Approx(0.75));
}

TEST_CASE("sphere visibility oracle") {
  // Sphere at depth 3: the pole facing the camera is visible, the far one is not.
  CHECK(sphere_point_visible({0, 0, 3}, 0.5, {0, 0, -1}, 500, 500, 320, 240, 640, 480, 0.05));
  CHECK_FALSE(sphere_point_visible({0, 0, 3}, 0.5, {0, 0, 1}, 500, 500, 320, 240, 640, 480, 0.05));
  // Limb: n . c = -r exactly is grazing and excluded.
  CHECK_FALSE(sphere_point_visible({0, 0, 3}, 0.5, {0.9860132971832694, 0, -1.0 / 6.0}, 500, 500, 320, 240,
                                   640, 480, 0.05));
}

TEST_CASE("dense Kalman oracle by hand") {
  DenseKalman k({0, 0, 1}, 1e-2, 1e-1, 1e-6, 1e-5);
  k.predict(0.1);
  // P_pos = p0 + dt^2 p_vel + q = 0.01 + 0.001 + 1e-6.
  CHECK(k.covariance(0, 0) == doctest::Approx(0.011001));
  CHECK(k.covariance(0, 3) == doctest::Approx(0.01));
  CHECK(k.covariance(3, 3) == doctest::Approx(0.10001));
  k.correct({0.1, 0, 1}, {0.011001, 1, 1});
  // Equal prior and measurement variance: the gain is one half.
  CHECK(k.position()[0] == doctest::Approx(0.05));
  k.transform({{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}, {0, 0, -1});
  CHECK(k.position()[1] == doctest::Approx(0.05));
  CHECK(k.position()[2] == doctest::Approx(0.0));
}

TEST_CASE("pinhole noise oracle") {
  const Array3 r = pinhole_noise_diagonal(1.0, 500, 500, 20, 20, 0.05);
  CHECK(r[0] == doctest::Approx(0.0016));
  CHECK(r[2] == doctest::Approx(0.0025));
}

TEST_CASE("table criteria oracle on the worked cases") {
  const TableCriteria c;
  TableInput in;
  CHECK(table_terminal(in, c, false) == 1);
  in.p_e[0] = 0.12;
  CHECK(table_terminal(in, c, true) == 2);
  CHECK(table_terminal(in, c, false) == 0);
  in.p_e[0] = 0.06;
  CHECK(table_terminal(in, c, true) == 0);
}

TEST_CASE("table reward oracle at the optimum") {
  TableInput in;
  const TableRewardTerms t = table_reward(in, TableCriteria{}, TableReward{});
  CHECK(t.terms[0] == doctest::Approx(2.0));
  CHECK(t.terms[1] == doctest::Approx(1.0));
  CHECK(t.total == doctest::Approx(20.8));
  in.raw_action = {0.7, 0, 0, -1.0};
  const TableRewardTerms clipped = table_reward(in, TableCriteria{}, TableReward{});
  CHECK(clipped.terms[6] == doctest::Approx(0.04 + 0.2270).epsilon(1e-3));
}
