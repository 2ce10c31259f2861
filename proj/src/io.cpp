#include "p6d/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "p6d/error.hpp"

namespace p6d {

namespace fs = std::filesystem;

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

constexpr char kTensorMagic[4] = {'T', 'N', 'S', 'R'};

void swap_bytes_if_needed(std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : v) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = ((u & 0xFFu) << 24) | ((u & 0xFF00u) << 8) | ((u >> 8) & 0xFF00u) | (u >> 24);
      std::memcpy(&f, &u, 4);
    }
  }
}

}  // namespace

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open tensor " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw_data(path.string() + ": bad TNSR magic");
  std::string header;
  if (!std::getline(in, header)) throw_data(path.string() + ": truncated TNSR header");

  Tensor t;
  try {
    const Json h = Json::parse(header);
    if (h.at("dtype") != "f32") throw_data(path.string() + ": unsupported dtype");
    if (h.value("layout", "row-major") != "row-major")
      throw_data(path.string() + ": unsupported layout");
    if (h.value("endian", "little") != "little")
      throw_data(path.string() + ": unsupported endianness");
    t.shape = h.at("shape").get<std::vector<std::size_t>>();
  } catch (const Json::exception& e) {
    throw_data(path.string() + ": malformed TNSR header (" + e.what() + ")");
  }
  t.data.resize(t.numel());
  const auto bytes = static_cast<std::streamsize>(t.data.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(t.data.data()), bytes))
    throw_data(path.string() + ": truncated TNSR payload");
  swap_bytes_if_needed(t.data);
  return t;
}

void write_tensor(const fs::path& path, const Tensor& tensor) {
  if (tensor.numel() != tensor.data.size())
    throw_data("tensor shape does not match payload");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write tensor " + path.string());
  Json h;
  h["dtype"] = "f32";
  h["endian"] = "little";
  h["layout"] = "row-major";
  h["shape"] = tensor.shape;
  out.write(kTensorMagic, 4);
  out << h.dump() << '\n';
  std::vector<float> payload = tensor.data;
  swap_bytes_if_needed(payload);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

namespace {

void dump_value(const Json& j, std::string& out, int indent) {
  const auto pad = [&](int level) { out.append(static_cast<std::size_t>(2 * level), ' '); };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        pad(indent + 1);
        out += Json(it.key()).dump();
        out += ": ";
        dump_value(it.value(), out, indent + 1);
      }
      out += '\n';
      pad(indent);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Flat arrays of scalars stay on one line.
      bool scalars = true;
      for (const auto& e : j) scalars = scalars && !e.is_structured();
      if (scalars) {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump_value(j[i], out, indent);
        }
        out += ']';
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        pad(indent + 1);
        dump_value(j[i], out, indent + 1);
      }
      out += '\n';
      pad(indent);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string canonical_dump(const Json& j) {
  std::string out;
  dump_value(j, out, 0);
  out += '\n';
  return out;
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw_data(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << canonical_dump(j);
}

std::vector<Json> read_json_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  std::vector<Json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception&) {
      throw_data(path.string() + ":" + std::to_string(lineno) + ": invalid JSON line");
    }
  }
  return out;
}

Json pose_to_json(const Pose& pose) {
  const auto q = pose.rotation.wxyz();
  return Json{{"quat", {q[0], q[1], q[2], q[3]}},
              {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

Pose pose_from_json(const Json& j) {
  try {
    const auto q = j.at("quat").get<std::vector<double>>();
    if (q.size() != 4) throw_data("quat must have 4 entries");
    const Vec3 t = vec3_from_json(j.at("t"));
    if (!t.allFinite()) throw_data("non-finite translation");
    return Pose(Rotation(q[0], q[1], q[2], q[3]), t);
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed pose record: ") + e.what());
  }
}

Json intrinsics_to_json(const CameraIntrinsics& k) {
  return Json{{"f", k.f}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  try {
    CameraIntrinsics k;
    k.f = j.at("f").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    validate(k);
    return k;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed intrinsics: ") + e.what());
  }
}

Vec3 vec3_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw_data("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

Json vec_to_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace p6d
