// Python bindings. Poses cross the boundary as 4x4 homogeneous matrices,
// rotations as 3x3 matrices.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <vector>

#include "p6d/descriptor.hpp"
#include "p6d/error.hpp"
#include "p6d/geometry.hpp"
#include "p6d/metrics.hpp"
#include "p6d/pnp.hpp"
#include "p6d/pose_align.hpp"
#include "p6d/retarget.hpp"
#include "p6d/scale.hpp"
#include "p6d/so3_sampling.hpp"

namespace py = pybind11;
using namespace p6d;

namespace {

using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Pose> to_poses(const std::vector<Mat4>& ms) {
  std::vector<Pose> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.emplace_back(m);
  return out;
}

}  // namespace

PYBIND11_MODULE(_p6d, m) {
  m.doc() = "6D object pose estimation, tracking and retargeting";
  m.attr("__version__") = P6D_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init([](double f, double cx, double cy, int width, int height) {
             CameraIntrinsics k{f, cx, cy, width, height};
             validate(k);
             return k;
           }),
           py::arg("f"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readwrite("f", &CameraIntrinsics::f)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height)
      .def("matrix", &CameraIntrinsics::matrix)
      .def("project", [](const CameraIntrinsics& k, const Vec3& p) { return project(p, k); });

  m.def(
      "sample_so3",
      [](std::size_t n) {
        std::vector<Mat3> out;
        for (const auto& r : sample_so3(n)) out.push_back(r.matrix());
        return out;
      },
      py::arg("n"), "Deterministic near-uniform rotations as 3x3 matrices.");

  m.def(
      "angular_distance", [](const Mat3& a, const Mat3& b) { return angular_distance(Rotation(a), Rotation(b)); },
      py::arg("a"), py::arg("b"), "Geodesic distance in radians.");

  m.def(
      "se3_exp", [](const Twist& xi) { return se3_exp(xi).matrix(); }, py::arg("xi"),
      "Twist (omega, v) to a 4x4 pose.");
  m.def(
      "se3_log", [](const Mat4& p) { return Twist(se3_log(Pose(p))); }, py::arg("pose"));
  m.def(
      "interpolate", [](const Mat4& a, const Mat4& b, double alpha) { return interpolate(Pose(a), Pose(b), alpha).matrix(); },
      py::arg("a"), py::arg("b"), py::arg("alpha"), "Point on the SE(3) geodesic from a to b.");

  m.def(
      "estimate_translation",
      [](const Eigen::Vector4d& bbox, const Vec3& extents, const CameraIntrinsics& k) {
        return estimate_translation({bbox[0], bbox[1], bbox[2], bbox[3]}, {extents[0], extents[1], extents[2]}, k);
      },
      py::arg("bbox"), py::arg("extents"), py::arg("k"),
      "Object translation from a (cx, cy, w, h) box and metric (width, height, depth) extents.");

  m.def(
      "global_rescale",
      [](const std::vector<double>& relative, const std::vector<std::optional<double>>& metric) {
        if (relative.size() != metric.size()) throw_data("relative and metric lengths differ");
        std::vector<ScaleObservation> obs(relative.size());
        for (std::size_t i = 0; i < obs.size(); ++i) obs[i] = {relative[i], metric[i]};
        const GlobalScale g = global_rescale(obs);
        return py::make_tuple(g.rho, g.scales);
      },
      py::arg("relative"), py::arg("metric"), "Returns (rho, scales); metric entries may be None.");

  m.def(
      "solve_pnp",
      [](const Points3& p3, const Points2& p2, const CameraIntrinsics& k, bool ransac, std::uint64_t seed) {
        std::vector<Vec3> a(static_cast<std::size_t>(p3.rows()));
        std::vector<Vec2> b(static_cast<std::size_t>(p2.rows()));
        for (Eigen::Index i = 0; i < p3.rows(); ++i) a[static_cast<std::size_t>(i)] = p3.row(i).transpose();
        for (Eigen::Index i = 0; i < p2.rows(); ++i) b[static_cast<std::size_t>(i)] = p2.row(i).transpose();
        if (a.size() != b.size()) throw_data("point counts differ");
        PnPOptions o;
        o.ransac = ransac;
        o.seed = seed;
        PnPResult r;
        {
          py::gil_scoped_release release;
          r = solve_pnp(a, b, k, o);
        }
        py::dict out;
        out["pose"] = r.pose.matrix();
        out["rms"] = r.rms;
        out["inliers"] = std::vector<bool>(r.inliers.begin(), r.inliers.end());
        return out;
      },
      py::arg("points3d"), py::arg("points2d"), py::arg("k"), py::arg("ransac") = false, py::arg("seed") = 0,
      "Model-to-camera pose from N x 3 model points and N x 2 pixels.");

  py::class_<DescriptorIndex>(m, "DescriptorIndex")
      .def(py::init<std::size_t>(), py::arg("dim"))
      .def_property_readonly("dim", &DescriptorIndex::dim)
      .def("__len__", &DescriptorIndex::size)
      .def_property_readonly("ids", &DescriptorIndex::ids)
      .def(
          "add",
          [](DescriptorIndex& idx, const std::string& id, const std::vector<float>& d) { idx.add(id, d); },
          py::arg("id"), py::arg("descriptor"))
      .def("sort_by_id", &DescriptorIndex::sort_by_id)
      .def("save", &DescriptorIndex::save, py::arg("path"))
      .def_static("load", &DescriptorIndex::load, py::arg("path"))
      .def(
          "retrieve",
          [](const DescriptorIndex& idx, const std::vector<float>& q, std::size_t k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& h : retrieve(q, idx, k)) out.emplace_back(h.object_id, h.score);
            return out;
          },
          py::arg("query"), py::arg("k") = 1, "Top-k (object_id, score) by cosine similarity.");

  py::class_<KinematicChain>(m, "KinematicChain")
      .def_static("panda", &panda_chain)
      .def_static("from_json", [](const std::string& s) { return chain_from_json(Json::parse(s)); }, py::arg("text"))
      .def("to_json", [](const KinematicChain& c) { return chain_to_json(c).dump(); })
      .def_property_readonly("dof", &KinematicChain::dof)
      .def_property_readonly("home", [](const KinematicChain& c) { return c.home; });

  m.def(
      "forward_kinematics",
      [](const KinematicChain& c, const Eigen::VectorXd& q) { return forward_kinematics(c, q).matrix(); },
      py::arg("chain"), py::arg("q"), "Object pose in the base frame.");

  m.def(
      "track_rot_error",
      [](const std::vector<Mat4>& pred, const std::vector<Mat4>& gt, const std::vector<Mat3>& symmetry) {
        SymmetrySet sym;
        for (const auto& s : symmetry) sym.emplace_back(s);
        if (sym.empty()) sym.push_back(Rotation::identity());
        return track_rot_error(to_poses(pred), to_poses(gt), sym);
      },
      py::arg("pred"), py::arg("gt"), py::arg("symmetry") = std::vector<Mat3>{},
      "Relative-rotation tracking error in degrees.");
}
