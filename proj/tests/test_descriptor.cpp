#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>

#include "p6d/descriptor.hpp"
#include "p6d/error.hpp"
#include "support.hpp"

using namespace p6d;

namespace {

PatchGrid random_grid(Rng& rng, std::size_t rows, std::size_t cols, std::size_t dim, double fg_rate = 0.5) {
  PatchGrid g(rows, cols, dim);
  for (auto& x : g.data) x = static_cast<float>(rng.normal());
  bool any = false;
  for (auto& f : g.foreground) any |= (f = rng.uniform() < fg_rate);
  if (!any) g.foreground[0] = 1;
  return g;
}

std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

// Two-stage mean written out with plain loops.
std::vector<double> naive_ffa(const std::vector<PatchGrid>& views) {
  const std::size_t dim = views[0].dim;
  std::vector<double> total(dim, 0.0);
  for (const auto& g : views) {
    std::vector<double> mean(dim, 0.0);
    int count = 0;
    for (std::size_t k = 0; k < g.rows * g.cols; ++k) {
      if (!g.foreground[k]) continue;
      ++count;
      for (std::size_t c = 0; c < dim; ++c) mean[c] += g.data[k * dim + c];
    }
    for (std::size_t c = 0; c < dim; ++c) total[c] += mean[c] / count;
  }
  double n = 0.0;
  for (double x : total) n += x * x;
  for (double& x : total) x /= std::sqrt(n);
  return total;
}

}  // namespace

TEST_SUITE("descriptor") {

TEST_CASE("ffa of a single foreground patch is its unit token") {
  PatchGrid g(2, 2, 3);
  g.foreground = {0, 1, 0, 0};
  g.data = {9, 9, 9, 3, 0, 4, 9, 9, 9, 9, 9, 9};
  const auto d = ffa_aggregate(std::span<const PatchGrid>(&g, 1));
  CHECK(d[0] == doctest::Approx(0.6));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(0.8));
}

TEST_CASE("ffa averages per-view means") {
  PatchGrid a(1, 2, 2), b(1, 2, 2);
  a.foreground = {1, 1};
  a.data = {1, 0, 3, 0};        // mean (2, 0)
  b.foreground = {1, 0};
  b.data = {0, 2, 100, 100};    // mean (0, 2)
  const std::vector<PatchGrid> views = {a, b};
  const auto d = ffa_aggregate(views);
  CHECK(d[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(d[1] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("ffa matches the naive two-stage mean over 600 views") {
  Rng rng(21);
  std::vector<PatchGrid> views;
  for (int v = 0; v < 600; ++v) views.push_back(random_grid(rng, 6, 6, 16));
  const auto d = ffa_aggregate(views);
  const auto ref = naive_ffa(views);
  for (std::size_t c = 0; c < ref.size(); ++c) CHECK(std::abs(d[static_cast<Eigen::Index>(c)] - ref[c]) < 1e-6);
}

TEST_CASE("ffa is invariant to view order and patch order") {
  Rng rng(22);
  std::vector<PatchGrid> views;
  for (int v = 0; v < 20; ++v) views.push_back(random_grid(rng, 4, 4, 8));
  const auto d = ffa_aggregate(views);
  std::vector<PatchGrid> shuffled(views.rbegin(), views.rend());
  // Reverse the patch order inside every view.
  for (auto& g : shuffled) {
    PatchGrid r(g.rows, g.cols, g.dim);
    const std::size_t n = g.patch_count();
    for (std::size_t k = 0; k < n; ++k) {
      r.foreground[k] = g.foreground[n - 1 - k];
      std::copy_n(g.data.begin() + static_cast<std::ptrdiff_t>((n - 1 - k) * g.dim), g.dim,
                  r.data.begin() + static_cast<std::ptrdiff_t>(k * g.dim));
    }
    g = r;
  }
  CHECK((ffa_aggregate(shuffled) - d).norm() < 1e-6);
}

TEST_CASE("cls aggregate") {
  const std::vector<std::vector<float>> one = {{3, 4}};
  const auto d = cls_aggregate(one);
  CHECK(d[0] == doctest::Approx(0.6));
  const std::vector<std::vector<float>> cancel = {{1, 2}, {-1, -2}};
  try {
    cls_aggregate(cancel);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "zero-norm aggregate");
  }
  Rng rng(23);
  std::vector<std::vector<float>> tokens;
  for (int i = 0; i < 50; ++i) tokens.push_back(random_unit(rng, 12));
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(12);
  for (const auto& t : tokens)
    for (int c = 0; c < 12; ++c) mean[c] += t[static_cast<std::size_t>(c)];
  CHECK((cls_aggregate(tokens) - mean.normalized()).norm() < 1e-6);
}

TEST_CASE("index build, sort order and persistence") {
  const auto dir = test::scratch_dir("descriptor_index");
  CHECK(build_index({}, DescriptorMode::Ffa).empty());

  Rng rng(24);
  std::vector<ObjectEntry> entries(3);
  const char* ids[] = {"mug", "can", "box"};
  for (int i = 0; i < 3; ++i) {
    entries[static_cast<std::size_t>(i)].object_id = ids[i];
    entries[static_cast<std::size_t>(i)].ffa_descriptor = random_unit(rng, 8);
  }
  const DescriptorIndex index = build_index(entries, DescriptorMode::Ffa);
  CHECK(index.ids() == std::vector<std::string>{"box", "can", "mug"});
  for (std::size_t i = 0; i < index.size(); ++i) {
    double n = 0;
    for (float x : index.row(i)) n += static_cast<double>(x) * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }

  index.save(dir / "a.p6dx");
  build_index(entries, DescriptorMode::Ffa).save(dir / "b.p6dx");
  std::ifstream a(dir / "a.p6dx", std::ios::binary), b(dir / "b.p6dx", std::ios::binary);
  const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
  CHECK(sa == sb);

  const DescriptorIndex back = DescriptorIndex::load(dir / "a.p6dx");
  CHECK(back.ids() == index.ids());
  CHECK(std::equal(back.row(2).begin(), back.row(2).end(), index.row(2).begin()));

  std::ofstream(dir / "bad.p6dx") << "XXXX";
  CHECK_THROWS_AS(DescriptorIndex::load(dir / "bad.p6dx"), Error);
}

TEST_CASE("retrieval matches a full scan") {
  Rng rng(25);
  const std::size_t dim = 32, n = 10000;
  DescriptorIndex index(dim);
  for (std::size_t i = 0; i < n; ++i) index.add("obj" + std::to_string(100000 + i), random_unit(rng, dim));
  index.sort_by_id();

  SUBCASE("self retrieval") {
    for (std::size_t i : {0ul, 17ul, 9999ul}) {
      const std::vector<float> q(index.row(i).begin(), index.row(i).end());
      const auto hits = retrieve(q, index, 3);
      CHECK(hits[0].object_id == index.ids()[i]);
      CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("order equals a brute-force argsort") {
    const auto q = random_unit(rng, dim);
    double qn = 0;
    for (float x : q) qn += static_cast<double>(x) * x;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0;
      for (std::size_t c = 0; c < dim; ++c) d += static_cast<double>(q[c]) / std::sqrt(qn) * index.row(i)[c];
      scores[i] = d;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    const auto hits = retrieve(q, index, n);
    REQUIRE(hits.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].object_id == index.ids()[order[i]]);
    for (std::size_t i = 1; i < n; ++i) CHECK(hits[i - 1].score >= hits[i].score);
  }
  SUBCASE("positive query scaling does not change scores") {
    auto q = random_unit(rng, dim);
    const auto a = retrieve(q, index, 5);
    for (auto& x : q) x *= 7.5f;
    const auto b = retrieve(q, index, 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(a[static_cast<std::size_t>(i)].object_id == b[static_cast<std::size_t>(i)].object_id);
      CHECK(a[static_cast<std::size_t>(i)].score == doctest::Approx(b[static_cast<std::size_t>(i)].score).epsilon(1e-6));
    }
  }
}

TEST_CASE("k larger than the index returns everything") {
  DescriptorIndex index(2);
  index.add("a", std::vector<float>{1, 0});
  index.add("b", std::vector<float>{0, 1});
  CHECK(retrieve(std::vector<float>{1, 1}, index, 10).size() == 2);
  // Equal scores: smaller id first.
  CHECK(retrieve(std::vector<float>{1, 1}, index, 10)[0].object_id == "a");
}

TEST_CASE("bundle round trip") {
  const auto dir = test::scratch_dir("descriptor_bundle");
  Rng rng(26);
  ObjectEntry e;
  e.object_id = "thing";
  e.mesh_ref = "thing.obj";
  e.native_scale = 0.01;
  for (int v = 0; v < 3; ++v) {
    ViewRecord r;
    r.rotation = random_rotation(rng);
    r.grid = random_grid(rng, 3, 3, 4);
    r.cls_token = random_unit(rng, 4);
    r.extents = {1.0 + v, 2.0, 3.0};
    e.views.push_back(r);
  }
  compute_descriptors(e);
  save_object_bundle(e, dir / "thing");
  const ObjectEntry back = load_object_bundle(dir / "thing");
  CHECK(back.object_id == "thing");
  CHECK(back.mesh_ref == "thing.obj");
  CHECK(back.views.size() == 3);
  CHECK(back.views[1].grid.data == e.views[1].grid.data);
  CHECK(back.views[1].grid.foreground == e.views[1].grid.foreground);
  CHECK(angular_distance(back.views[2].rotation, e.views[2].rotation) < 1e-7);
  CHECK(back.characteristic_size() == doctest::Approx(3.0));
  CHECK_THROWS_AS(load_object_bundle(dir / "missing"), Error);
}

}
