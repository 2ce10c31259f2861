#include <doctest.h>

#include <fstream>

#include "p6d/error.hpp"
#include "p6d/io.hpp"
#include "p6d/mesh.hpp"
#include "support.hpp"

using namespace p6d;

TEST_SUITE("io") {

TEST_CASE("tensor round trip") {
  const auto dir = test::scratch_dir("io_tensor");
  Tensor t{{2, 3, 4}, {}};
  for (int i = 0; i < 24; ++i) t.data.push_back(static_cast<float>(i) * 0.5f - 3.0f);
  write_tensor(dir / "t.tnsr", t);
  const Tensor back = read_tensor(dir / "t.tnsr");
  CHECK(back.shape == t.shape);
  CHECK(back.data == t.data);
}

TEST_CASE("corrupt tensors are data errors naming the file") {
  const auto dir = test::scratch_dir("io_corrupt");
  std::ofstream(dir / "bad.tnsr") << "NOPE{}\n";
  try {
    read_tensor(dir / "bad.tnsr");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
    CHECK(std::string(e.what()).find("bad.tnsr") != std::string::npos);
  }
  write_tensor(dir / "short.tnsr", Tensor{{4}, {1, 2, 3, 4}});
  std::filesystem::resize_file(dir / "short.tnsr", std::filesystem::file_size(dir / "short.tnsr") - 2);
  CHECK_THROWS_AS(read_tensor(dir / "short.tnsr"), Error);
}

TEST_CASE("canonical JSON sorts keys and fixes precision") {
  const Json j = {{"b", 1.0 / 3.0}, {"a", {1, 2}}, {"c", "x"}};
  const std::string s = canonical_dump(j);
  CHECK(s.find("\"a\"") < s.find("\"b\""));
  CHECK(s.find("0.333333333") != std::string::npos);
  CHECK(s.find("0.3333333333") == std::string::npos);
  CHECK(s.back() == '\n');
  CHECK(canonical_dump(Json::parse(s)) == s);
}

TEST_CASE("pose JSON keeps w non-negative") {
  const Pose p(Rotation(-0.5, 0.5, 0.5, 0.5), Vec3(1, 2, 3));
  const Json j = pose_to_json(p);
  CHECK(j["quat"][0].get<double>() >= 0.0);
  CHECK(test::pose_gap(pose_from_json(j), p) < 1e-12);
  CHECK_THROWS_AS(pose_from_json(Json{{"quat", {1, 0, 0}}, {"t", {0, 0, 0}}}), Error);
}

TEST_CASE("intrinsics JSON") {
  const CameraIntrinsics k{800, 320, 240, 640, 480};
  const CameraIntrinsics back = intrinsics_from_json(intrinsics_to_json(k));
  CHECK(back.f == k.f);
  CHECK(back.cx == k.cx);
  CHECK(back.width == k.width);
}

TEST_CASE("OBJ round trip with metric scale") {
  const auto dir = test::scratch_dir("io_obj");
  std::ofstream(dir / "tri.obj") << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1\n";
  const TriangleMesh m = load_obj(dir / "tri.obj", 0.5);
  CHECK(m.triangles.size() == 1);
  CHECK(surface_area(m) == doctest::Approx(0.125));
  save_obj(m, dir / "out.obj");
  CHECK(load_obj(dir / "out.obj").vertices.size() == 3);
  std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  CHECK_THROWS_AS(load_obj(dir / "quad.obj"), Error);
}

}
