#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "p6d/geometry.hpp"

namespace p6d {

using Json = nlohmann::json;

/// Dense float32 tensor, row-major.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
};

/// TNSR file: "TNSR", a one-line JSON header
/// {"dtype":"f32","endian":"little","layout":"row-major","shape":[...]},
/// a newline, then the little-endian payload.
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

/// Canonical JSON text: sorted keys, floats with 9 significant digits,
/// two-space indentation, trailing newline.
std::string canonical_dump(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
/// One JSON value per non-empty line.
std::vector<Json> read_json_lines(const std::filesystem::path& path);

/// {"quat": [w, x, y, z], "t": [x, y, z]} with w >= 0.
Json pose_to_json(const Pose& pose);
Pose pose_from_json(const Json& j);

Json intrinsics_to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const Json& j);

Vec3 vec3_from_json(const Json& j);
Json vec_to_json(const Eigen::VectorXd& v);

}  // namespace p6d
