#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "copa/geometry.hpp"
#include "doctest.h"

using namespace copa;
using geom::Vec3;

namespace {

geom::Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  return geom::Rotation::from_quaternion(q.normalized());
}

geom::RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  geom::RigidTransform t;
  t.rotation = random_rotation(rng);
  t.translation = Vec3(uni(rng), uni(rng), uni(rng));
  return t;
}

Vec3 random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  return Vec3(uni(rng), uni(rng), uni(rng));
}

geom::CameraModel default_camera() {
  geom::CameraModel cam;
  cam.fx = cam.fy = 500;
  cam.cx = cam.cy = 320;
  cam.width = cam.height = 641;
  return cam;
}

}  // namespace

TEST_CASE("apply_to_point matches the closed forms") {
  geom::RigidTransform identity;
  CHECK(identity.apply_to_point(Vec3(1, 2, 3)).isApprox(Vec3(1, 2, 3)));

  geom::RigidTransform rot90;
  rot90.rotation = geom::Rotation::from_axis_angle(Vec3(0, 0, M_PI / 2));
  CHECK((rot90.apply_to_point(Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-12);

  geom::RigidTransform shift;
  shift.translation = Vec3(0.5, 0, 0.07);
  CHECK(shift.apply_to_point(Vec3(0, 0, 0)).isApprox(Vec3(0.5, 0, 0.07)));
}

TEST_CASE("apply_to_vector ignores translation") {
  geom::RigidTransform identity;
  CHECK(identity.apply_to_vector(Vec3(0, 0, 1)).isApprox(Vec3(0, 0, 1)));

  geom::RigidTransform shift;
  shift.translation = Vec3(3, -1, 2);
  CHECK(shift.apply_to_vector(Vec3(0, 0, 1)).isApprox(Vec3(0, 0, 1)));

  geom::RigidTransform flip;
  flip.rotation = geom::Rotation::from_axis_angle(Vec3(M_PI, 0, 0));
  CHECK((flip.apply_to_vector(Vec3(0, 0, 1)) - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("compose behaves like double application") {
  std::mt19937_64 rng(42);
  const geom::RigidTransform a = random_transform(rng);
  const geom::RigidTransform b = random_transform(rng);

  CHECK(geom::RigidTransform::identity().compose(a).apply_to_point(Vec3(1, 1, 1))
            .isApprox(a.apply_to_point(Vec3(1, 1, 1))));

  const geom::RigidTransform ab = a.compose(b);
  for (int i = 0; i < 100; ++i) {
    const Vec3 p = random_point(rng);
    CHECK((ab.apply_to_point(p) - a.apply_to_point(b.apply_to_point(p))).norm() < 1e-12);
  }

  const geom::RigidTransform id = a.compose(a.inverse());
  CHECK(id.translation.norm() < 1e-9);
  CHECK(id.rotation.angle_to(geom::Rotation::identity()) < 1e-9);
}

TEST_CASE("composition is associative on random triples") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_transform(rng);
    const auto b = random_transform(rng);
    const auto c = random_transform(rng);
    const auto left = a.compose(b).compose(c);
    const auto right = a.compose(b.compose(c));
    for (int i = 0; i < 5; ++i) {
      const Vec3 p = random_point(rng);
      CHECK((left.apply_to_point(p) - right.apply_to_point(p)).norm() < 1e-9);
    }
  }
}

TEST_CASE("vector norms are preserved") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_transform(rng);
    const Vec3 v = 10.0 * random_point(rng);
    CHECK(std::abs(t.apply_to_vector(v).norm() - v.norm()) <= 1e-9 * std::max(1.0, v.norm()));
  }
}

TEST_CASE("rotation construction re-orthonormalizes perturbed matrices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eps(-1e-6, 1e-6);
  for (int i = 0; i < 50; ++i) {
    geom::Mat3 m = random_rotation(rng).matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) += eps(rng);
    const geom::Mat3 fixed = geom::Rotation::from_matrix(m).matrix();
    CHECK((fixed * fixed.transpose() - geom::Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fixed.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("axis-angle round trips through the log map") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    const auto r = random_rotation(rng);
    const auto back = geom::Rotation::from_axis_angle(r.axis_angle());
    CHECK(r.angle_to(back) < 1e-9);
  }
}

TEST_CASE("back_project maps pixels to the expected rays") {
  const auto cam = default_camera();
  geom::DepthImage depth(cam.width, cam.height, 0.f);
  depth.at(320, 320) = 1.0f;
  depth.at(620, 320) = 1.0f;

  const auto cloud = geom::back_project(depth, cam);
  REQUIRE(cloud.size() == 2);
  CHECK((cloud.points[0] - Vec3(0, 0, 1)).norm() < 1e-9);
  CHECK((cloud.points[1] - Vec3(0.6, 0, 1)).norm() < 1e-9);
  CHECK(cloud.pixels[0] == Eigen::Vector2i(320, 320));
}

TEST_CASE("back_project on a 500-px-offset pixel gives a unit lateral offset") {
  geom::CameraModel cam;
  cam.fx = cam.fy = 500;
  cam.cx = cam.cy = 320;
  cam.width = 900;
  cam.height = 641;
  geom::DepthImage depth(cam.width, cam.height, 0.f);
  depth.at(820, 320) = 1.0f;
  const auto cloud = geom::back_project(depth, cam);
  REQUIRE(cloud.size() == 1);
  CHECK((cloud.points[0] - Vec3(1, 0, 1)).norm() < 1e-9);

  // projecting back lands on the source pixel
  const auto px = cam.project(cloud.points[0]);
  REQUIRE(px.has_value());
  CHECK(px->x() == doctest::Approx(820).epsilon(1e-9));
  CHECK(px->y() == doctest::Approx(320).epsilon(1e-9));
}

TEST_CASE("back_project rejects an all-invalid image") {
  const auto cam = default_camera();
  geom::DepthImage depth(cam.width, cam.height, 0.f);
  CHECK_THROWS_WITH_AS(geom::back_project(depth, cam), doctest::Contains("no valid"), Error);
  CHECK_THROWS_AS(geom::back_project_serial(depth, cam), Error);
}

TEST_CASE("project reports points behind the camera") {
  const auto cam = default_camera();
  CHECK(!cam.project(Vec3(0, 0, -1)).has_value());
  const auto px = cam.project(Vec3(0, 0, 1));
  REQUIRE(px.has_value());
  CHECK(px->isApprox(Eigen::Vector2d(320, 320)));
}

TEST_CASE("projection round trip stays within 1e-6 px for depth over 0.1 m") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> du(0.0, 640.0), dd(0.1, 3.0);
  for (int i = 0; i < 200; ++i) {
    geom::CameraModel cam;
    cam.fx = 300 + 500 * du(rng) / 640.0;
    cam.fy = 300 + 500 * du(rng) / 640.0;
    cam.cx = 320;
    cam.cy = 240;
    cam.width = 640;
    cam.height = 480;
    cam.extrinsics = [&] {
      geom::RigidTransform t;
      t.rotation = random_rotation(rng);
      t.translation = random_point(rng);
      return t;
    }();

    const double u = du(rng), v = du(rng) * 0.75, d = dd(rng);
    const Vec3 world = cam.back_project_pixel(u, v, d);
    const auto px = cam.project(world);
    REQUIRE(px.has_value());
    CHECK(std::abs(px->x() - u) < 1e-6);
    CHECK(std::abs(px->y() - v) < 1e-6);
  }
}

TEST_CASE("threaded and serial back-projection agree exactly") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dd(0.0, 2.0);
  geom::CameraModel cam = default_camera();
  cam.width = 321;
  cam.height = 240;
  cam.cx = 160;
  cam.cy = 120;
  geom::DepthImage depth(cam.width, cam.height, 0.f);
  for (auto& d : depth.data) {
    const double v = dd(rng);
    d = v > 0.5 ? float(v) : 0.f;  // mix of valid and invalid pixels
  }
  const auto a = geom::back_project(depth, cam);
  const auto b = geom::back_project_serial(depth, cam);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a.points[i] == b.points[i]);
    CHECK(a.pixels[i] == b.pixels[i]);
  }
}

TEST_CASE("UnitVec3 normalizes and rejects zero input") {
  const geom::UnitVec3 u(Vec3(0, 0, 5));
  CHECK(u.vec().isApprox(Vec3(0, 0, 1)));
  CHECK_THROWS_AS(geom::UnitVec3(Vec3(0, 0, 0)), Error);
}

TEST_CASE("camera validation rejects bad intrinsics") {
  geom::CameraModel cam = default_camera();
  CHECK_NOTHROW(cam.validate());
  cam.fx = -1;
  CHECK_THROWS_AS(cam.validate(), Error);
  cam = default_camera();
  cam.cx = 1000;
  CHECK_THROWS_AS(cam.validate(), Error);
}
