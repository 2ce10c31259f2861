#include "p6d/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "p6d/error.hpp"
#include "p6d/io.hpp"

namespace p6d {

namespace fs = std::filesystem;

PatchGrid::PatchGrid(std::size_t r, std::size_t c, std::size_t d)
    : rows(r), cols(c), dim(d), data(r * c * d, 0.0f), foreground(r * c, 0) {}

std::size_t PatchGrid::foreground_count() const {
  return static_cast<std::size_t>(std::count_if(foreground.begin(), foreground.end(),
                                                [](std::uint8_t f) { return f != 0; }));
}

void validate(const PatchGrid& grid) {
  if (grid.rows == 0 || grid.cols == 0 || grid.dim == 0)
    throw_data("patch grid has a zero dimension");
  if (grid.data.size() != grid.rows * grid.cols * grid.dim)
    throw_data("patch grid data length does not match its shape");
  if (grid.foreground.size() != grid.rows * grid.cols)
    throw_data("patch grid mask length does not match its shape");
}

double ObjectEntry::characteristic_size() const {
  double size = 0.0;
  for (const auto& v : views)
    size = std::max({size, v.extents.width, v.extents.height, v.extents.depth});
  return size;
}

DescriptorMode parse_descriptor_mode(const std::string& s) {
  if (s == "ffa") return DescriptorMode::Ffa;
  if (s == "cls") return DescriptorMode::Cls;
  throw_usage("descriptor mode must be 'ffa' or 'cls', got '" + s + "'");
}

std::string to_string(DescriptorMode mode) {
  return mode == DescriptorMode::Ffa ? "ffa" : "cls";
}

namespace {

Eigen::VectorXd normalized_or_throw(Eigen::VectorXd v) {
  const double n = v.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) throw_numerical("zero-norm aggregate");
  return v / n;
}

}  // namespace

Eigen::VectorXd ffa_aggregate(std::span<const PatchGrid> views) {
  if (views.empty()) throw_data("no views to aggregate");
  const std::size_t dim = views.front().dim;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& g : views) {
    validate(g);
    if (g.dim != dim) throw_data("views disagree on descriptor dimension");
    Eigen::VectorXd view_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    std::size_t count = 0;
    for (std::size_t k = 0; k < g.patch_count(); ++k) {
      if (!g.foreground[k]) continue;
      const auto p = g.patch(k);
      for (std::size_t c = 0; c < dim; ++c) view_sum[static_cast<Eigen::Index>(c)] += p[c];
      ++count;
    }
    if (count == 0) throw_data("empty foreground");
    sum += view_sum / static_cast<double>(count);
  }
  return normalized_or_throw(sum / static_cast<double>(views.size()));
}

Eigen::VectorXd cls_aggregate(std::span<const std::vector<float>> tokens) {
  if (tokens.empty()) throw_data("no class tokens to aggregate");
  const std::size_t dim = tokens.front().size();
  if (dim == 0) throw_data("empty class token");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& t : tokens) {
    if (t.size() != dim) throw_data("class tokens disagree on dimension");
    for (std::size_t c = 0; c < dim; ++c) sum[static_cast<Eigen::Index>(c)] += t[c];
  }
  return normalized_or_throw(sum / static_cast<double>(tokens.size()));
}

std::vector<float> to_float(const Eigen::VectorXd& v) {
  std::vector<float> out(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
  return out;
}

void compute_descriptors(ObjectEntry& entry) {
  std::vector<PatchGrid> grids;
  std::vector<std::vector<float>> tokens;
  grids.reserve(entry.views.size());
  for (const auto& v : entry.views) {
    grids.push_back(v.grid);
    if (!v.cls_token.empty()) tokens.push_back(v.cls_token);
  }
  entry.ffa_descriptor = to_float(ffa_aggregate(grids));
  if (!tokens.empty()) entry.cls_descriptor = to_float(cls_aggregate(tokens));
}

void DescriptorIndex::add(const std::string& id, std::span<const float> descriptor) {
  if (dim_ == 0) dim_ = descriptor.size();
  if (descriptor.size() != dim_)
    throw_data("descriptor for '" + id + "' has dimension " + std::to_string(descriptor.size()) +
               ", index expects " + std::to_string(dim_));
  double n2 = 0.0;
  for (float x : descriptor) n2 += static_cast<double>(x) * x;
  const double n = std::sqrt(n2);
  if (!(n > 0.0) || !std::isfinite(n)) throw_numerical("zero-norm descriptor for '" + id + "'");
  ids_.push_back(id);
  for (float x : descriptor) rows_.push_back(static_cast<float>(x / n));
}

void DescriptorIndex::sort_by_id() {
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  std::vector<std::string> ids;
  std::vector<float> rows;
  ids.reserve(ids_.size());
  rows.reserve(rows_.size());
  for (auto i : order) {
    ids.push_back(ids_[i]);
    const auto r = row(i);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  ids_ = std::move(ids);
  rows_ = std::move(rows);
}

namespace {

constexpr char kIndexMagic[4] = {'P', '6', 'D', 'X'};

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const fs::path& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw_data(path.string() + ": truncated index");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void DescriptorIndex::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write index " + path.string());
  out.write(kIndexMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(out, ids_.size());
  std::size_t offset = 20;
  for (const auto& id : ids_) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    offset += 4 + id.size();
  }
  while (offset % 4 != 0) {
    out.put('\0');
    ++offset;
  }
  for (float f : rows_) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_le<std::uint32_t>(out, u);
  }
}

DescriptorIndex DescriptorIndex::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open index " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kIndexMagic, 4) != 0)
    throw_data(path.string() + ": bad index magic");
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kVersion) throw_data(path.string() + ": unsupported index version");
  DescriptorIndex idx(get_le<std::uint32_t>(in, path));
  const auto count = get_le<std::uint64_t>(in, path);
  std::size_t offset = 20;
  idx.ids_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(in, path);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw_data(path.string() + ": truncated index");
    idx.ids_.push_back(std::move(id));
    offset += 4 + len;
  }
  while (offset % 4 != 0) {
    in.get();
    ++offset;
  }
  idx.rows_.resize(count * idx.dim_);
  for (auto& f : idx.rows_) {
    const auto u = get_le<std::uint32_t>(in, path);
    std::memcpy(&f, &u, 4);
  }
  return idx;
}

DescriptorIndex build_index(std::span<const ObjectEntry> entries, DescriptorMode mode) {
  DescriptorIndex index;
  for (const auto& e : entries) {
    const auto& d = mode == DescriptorMode::Ffa ? e.ffa_descriptor : e.cls_descriptor;
    if (d.empty()) throw_data("object '" + e.object_id + "' lacks a " + to_string(mode) + " descriptor");
    index.add(e.object_id, d);
  }
  index.sort_by_id();
  return index;
}

namespace {

// Eight independent accumulators let the compiler vectorize the scan.
float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace

std::vector<RetrievalHit> retrieve(std::span<const float> query, const DescriptorIndex& index,
                                   std::size_t k) {
  if (index.empty()) throw_data("empty index");
  if (k == 0) throw_usage("k must be at least 1");
  if (query.size() != index.dim())
    throw_data("query dimension " + std::to_string(query.size()) + " does not match index dimension " +
               std::to_string(index.dim()));
  double n2 = 0.0;
  for (float x : query) n2 += static_cast<double>(x) * x;
  const double n = std::sqrt(n2);
  if (!(n > 0.0) || !std::isfinite(n)) throw_data("zero-norm query");
  std::vector<float> q(query.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<float>(query[i] / n);

  std::vector<float> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i)
    scores[i] = dot(q.data(), index.row(i).data(), q.size());

  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t top = std::min(k, order.size());
  // Rows are sorted by id, so the index breaks ties by id.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  std::vector<RetrievalHit> hits;
  hits.reserve(top);
  for (std::size_t i = 0; i < top; ++i) hits.push_back({index.ids()[order[i]], scores[order[i]]});
  return hits;
}

std::vector<RetrievalHit> retrieve(const Eigen::VectorXd& query, const DescriptorIndex& index,
                                   std::size_t k) {
  const auto q = to_float(query);
  return retrieve(std::span<const float>(q), index, k);
}

ObjectEntry load_object_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw_data("bundle directory not found: " + dir.string());
  ObjectEntry e;
  e.object_id = dir.filename().string();
  if (fs::exists(dir / "object.json")) {
    const Json meta = read_json(dir / "object.json");
    e.object_id = meta.value("object_id", e.object_id);
    e.mesh_ref = meta.value("mesh", std::string{});
    e.native_scale = meta.value("native_scale", 1.0);
    e.native_scale_trusted = meta.value("native_scale_trusted", false);
  }

  const Tensor views = read_tensor(dir / "views.tnsr");
  const Tensor masks = read_tensor(dir / "fg_masks.tnsr");
  const Json rotations = read_json(dir / "rotations.json");
  const Json extents = read_json(dir / "extents.json");
  if (views.shape.size() != 4) throw_data((dir / "views.tnsr").string() + ": expected shape [M,rows,cols,dim]");
  const std::size_t m = views.shape[0], rows = views.shape[1], cols = views.shape[2], dim = views.shape[3];
  if (masks.shape != std::vector<std::size_t>{m, rows, cols})
    throw_data((dir / "fg_masks.tnsr").string() + ": shape does not match views.tnsr");
  if (!rotations.is_array() || rotations.size() != m)
    throw_data((dir / "rotations.json").string() + ": expected " + std::to_string(m) + " rotations");
  if (!extents.is_array() || extents.size() != m)
    throw_data((dir / "extents.json").string() + ": expected " + std::to_string(m) + " extents");

  Tensor cls;
  const bool has_cls = fs::exists(dir / "cls.tnsr");
  if (has_cls) {
    cls = read_tensor(dir / "cls.tnsr");
    if (cls.shape.size() != 2 || cls.shape[0] != m)
      throw_data((dir / "cls.tnsr").string() + ": expected shape [M,dim]");
  }

  const std::size_t grid_len = rows * cols * dim;
  e.views.resize(m);
  for (std::size_t v = 0; v < m; ++v) {
    ViewRecord& rec = e.views[v];
    const auto q = rotations[v].get<std::vector<double>>();
    if (q.size() != 4) throw_data((dir / "rotations.json").string() + ": quaternion must have 4 entries");
    rec.rotation = Rotation(q[0], q[1], q[2], q[3]);
    const auto ex = extents[v].get<std::vector<double>>();
    if (ex.size() != 3 || !(ex[0] > 0 && ex[1] > 0 && ex[2] > 0))
      throw_data((dir / "extents.json").string() + ": extents must be three positive values");
    rec.extents = {ex[0], ex[1], ex[2]};
    rec.grid = PatchGrid(rows, cols, dim);
    std::copy_n(views.data.begin() + static_cast<std::ptrdiff_t>(v * grid_len), grid_len, rec.grid.data.begin());
    for (std::size_t k = 0; k < rows * cols; ++k)
      rec.grid.foreground[k] = masks.data[v * rows * cols + k] > 0.5f ? 1 : 0;
    if (has_cls) {
      const std::size_t cd = cls.shape[1];
      rec.cls_token.assign(cls.data.begin() + static_cast<std::ptrdiff_t>(v * cd),
                           cls.data.begin() + static_cast<std::ptrdiff_t>((v + 1) * cd));
    }
  }
  compute_descriptors(e);
  return e;
}

void save_object_bundle(const ObjectEntry& entry, const fs::path& dir) {
  if (entry.views.empty()) throw_data("object has no views");
  fs::create_directories(dir);
  const auto& g0 = entry.views.front().grid;
  const std::size_t m = entry.views.size();
  Tensor views{{m, g0.rows, g0.cols, g0.dim}, {}};
  Tensor masks{{m, g0.rows, g0.cols}, {}};
  Tensor cls{{m, entry.views.front().cls_token.size()}, {}};
  Json rotations = Json::array(), extents = Json::array();
  views.data.reserve(views.numel());
  for (const auto& v : entry.views) {
    if (v.grid.rows != g0.rows || v.grid.cols != g0.cols || v.grid.dim != g0.dim)
      throw_data("views disagree on grid shape");
    views.data.insert(views.data.end(), v.grid.data.begin(), v.grid.data.end());
    for (auto f : v.grid.foreground) masks.data.push_back(f ? 1.0f : 0.0f);
    cls.data.insert(cls.data.end(), v.cls_token.begin(), v.cls_token.end());
    const auto q = v.rotation.wxyz();
    rotations.push_back({q[0], q[1], q[2], q[3]});
    extents.push_back({v.extents.width, v.extents.height, v.extents.depth});
  }
  write_tensor(dir / "views.tnsr", views);
  write_tensor(dir / "fg_masks.tnsr", masks);
  if (cls.shape[1] > 0) write_tensor(dir / "cls.tnsr", cls);
  write_json(dir / "rotations.json", rotations);
  write_json(dir / "extents.json", extents);
  write_json(dir / "object.json", Json{{"object_id", entry.object_id},
                                       {"mesh", entry.mesh_ref},
                                       {"native_scale", entry.native_scale},
                                       {"native_scale_trusted", entry.native_scale_trusted}});
}

}  // namespace p6d
