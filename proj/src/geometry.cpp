#include "majutsu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "earcut.hpp"
#include "majutsu/layout.hpp"

namespace majutsu::geometry {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kMinTriangleArea = 1e-9;

double normalize_half_turn(double yaw) {
  double y = std::fmod(yaw, kPi);
  if (y < 0.0) y += kPi;
  if (y >= kPi) y -= kPi;
  return y;
}
}  // namespace

double signed_area(const std::vector<Vec2>& ring) {
  double a = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(ring[i], ring[(i + 1) % n]);
  return 0.5 * a;
}

double Polygon::area() const {
  double a = std::abs(signed_area(outer));
  for (const auto& h : holes) a -= std::abs(signed_area(h));
  return a;
}

Aabb Mesh::bounds() const {
  if (vertices.empty()) return {};
  Aabb b{vertices.front(), vertices.front()};
  for (const Vec3& v : vertices) {
    b.min = {std::min(b.min.x, v.x), std::min(b.min.y, v.y), std::min(b.min.z, v.z)};
    b.max = {std::max(b.max.x, v.x), std::max(b.max.y, v.y), std::max(b.max.z, v.z)};
  }
  return b;
}

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Vec3 a = vertices[tri[0]], b = vertices[tri[1]], c = vertices[tri[2]];
  return 0.5 * norm(cross(b - a, c - a));
}

double Mesh::surface_area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
  return s;
}

double Mesh::signed_volume() const {
  double v = 0.0;
  for (const auto& tri : triangles) {
    v += dot(vertices[tri[0]], cross(vertices[tri[1]], vertices[tri[2]]));
  }
  return v / 6.0;
}

void compute_vertex_normals(Mesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size());
  for (const auto& tri : mesh.triangles) {
    const Vec3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
    const Vec3 n = cross(b - a, c - a);  // area weighted
    for (auto i : tri) acc[i] = acc[i] + n;
  }
  mesh.normals.resize(mesh.vertices.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const Vec3 n = normalized(acc[i]);
    mesh.normals[i] = norm(n) > 0.0 ? n : Vec3{0, 0, 1};
  }
}

Vec2 OrientedBox::axis_w() const { return {std::cos(yaw), std::sin(yaw)}; }
Vec2 OrientedBox::axis_l() const { return {-std::sin(yaw), std::cos(yaw)}; }

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 u = axis_w() * half_w, v = axis_l() * half_l;
  return {center - u - v, center + u - v, center + u + v, center - u + v};
}

bool OrientedBox::contains(Vec2 p, double eps) const {
  const Vec2 d = p - center;
  return std::abs(dot(d, axis_w())) <= half_w + eps && std::abs(dot(d, axis_l())) <= half_l + eps;
}

Vec3 SimilarityPlacement::apply(Vec3 local) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double x = local.x * xy_scale, y = local.y * xy_scale;
  return {translation.x + c * x - s * y, translation.y + s * x + c * y,
          translation.z + local.z * z_scale};
}

bool SimilarityPlacement::valid() const {
  return std::isfinite(translation.x) && std::isfinite(translation.y) &&
         std::isfinite(translation.z) && std::isfinite(yaw) && std::isfinite(xy_scale) &&
         std::isfinite(z_scale) && xy_scale > 0.0 && z_scale > 0.0;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Vec2& p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

OrientedBox compute_obb(const std::vector<Vec2>& points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "points");
  const std::vector<Vec2> hull = convex_hull(points);
  if (hull.size() == 1) return {hull.front(), 0.0, 0.0, 0.0};

  bool have = false;
  OrientedBox best;
  double best_area = 0.0;
  const std::size_t n = hull.size();
  const std::size_t edges = n == 2 ? 1 : n;
  for (std::size_t e = 0; e < edges; ++e) {
    const Vec2 d = hull[(e + 1) % n] - hull[e];
    const double len = norm(d);
    if (len <= 0.0) continue;
    const Vec2 u = d * (1.0 / len);
    const Vec2 v{-u.y, u.x};
    double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
    for (const Vec2& p : hull) {
      const double pu = dot(p, u), pv = dot(p, v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    OrientedBox box;
    box.center = u * (0.5 * (umin + umax)) + v * (0.5 * (vmin + vmax));
    box.half_w = 0.5 * (umax - umin);
    box.half_l = 0.5 * (vmax - vmin);
    double yaw = std::atan2(u.y, u.x);
    if (box.half_w > box.half_l) {
      std::swap(box.half_w, box.half_l);
      yaw += 0.5 * kPi;
    }
    box.yaw = normalize_half_turn(yaw);
    if (box.yaw > kPi - 1e-12) box.yaw = 0.0;
    const double area = box.area();
    const double tie = 1e-12 * std::max(1.0, area);
    if (!have || area < best_area - tie ||
        (std::abs(area - best_area) <= tie && box.yaw < best.yaw)) {
      best = box;
      best_area = area;
      have = true;
    }
  }
  return best;
}

SimilarityPlacement fit_placement(const Aabb& asset_bounds, const OrientedBox& obb,
                                  double target_height) {
  const Vec3 ext = asset_bounds.extent();
  if (!(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0)) {
    throw Error(ErrorCode::DegenerateAsset, "", "asset bounds need positive extents");
  }
  if (!(obb.half_w > 0.0 && obb.half_l > 0.0) || !(target_height > 0.0)) {
    throw Error(ErrorCode::DegenerateOBB, "", "placement box has zero extent");
  }
  SimilarityPlacement p;
  p.yaw = obb.yaw;
  p.xy_scale = std::min(2.0 * obb.half_w / ext.x, 2.0 * obb.half_l / ext.y);
  p.z_scale = target_height / ext.z;
  // Put the asset's base center on the box center at z = 0.
  const Vec2 local_center{0.5 * (asset_bounds.min.x + asset_bounds.max.x),
                          0.5 * (asset_bounds.min.y + asset_bounds.max.y)};
  const double c = std::cos(p.yaw), s = std::sin(p.yaw);
  const Vec2 rotated{c * local_center.x * p.xy_scale - s * local_center.y * p.xy_scale,
                     s * local_center.x * p.xy_scale + c * local_center.y * p.xy_scale};
  p.translation = {obb.center.x - rotated.x, obb.center.y - rotated.y,
                   -asset_bounds.min.z * p.z_scale};
  return p;
}

PointCloud sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "");
  PointCloud cloud;
  if (n == 0) return cloud;
  std::vector<double> cumulative(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.triangle_area(t);
    cumulative[t] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyMesh, "", "mesh has zero area");
  std::mt19937_64 rng(seed);
  cloud.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = unit_double(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto t = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative.size() - 1)));
    const auto& tri = mesh.triangles[t];
    const double r1 = std::sqrt(unit_double(rng));
    const double r2 = unit_double(rng);
    const Vec3 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
    cloud.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
  }
  return cloud;
}

IsoCamera::IsoCamera(const Aabb& bounds, int resolution) : resolution_(resolution) {
  const Vec3 to_camera{std::cos(kElevation) * std::cos(kAzimuth),
                       std::cos(kElevation) * std::sin(kAzimuth), std::sin(kElevation)};
  right_ = {-std::sin(kAzimuth), std::cos(kAzimuth), 0.0};
  up_ = cross(to_camera, right_);
  double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
  for (int k = 0; k < 8; ++k) {
    const Vec3 p{(k & 1) ? bounds.max.x : bounds.min.x, (k & 2) ? bounds.max.y : bounds.min.y,
                 (k & 4) ? bounds.max.z : bounds.min.z};
    const double u = dot(p, right_), v = dot(p, up_);
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  double span = std::max(umax - umin, vmax - vmin);
  if (!(span > 0.0)) span = 1.0;
  scale_ = resolution * (1.0 - 2.0 * kMargin) / span;
  origin_ = {0.5 * (umin + umax), 0.5 * (vmin + vmax)};
}

Vec2 IsoCamera::project(Vec3 p) const {
  const double half = 0.5 * resolution_;
  return {half + (dot(p, right_) - origin_.x) * scale_,
          half - (dot(p, up_) - origin_.y) * scale_};
}

SilhouetteMask render_iso_silhouette(const Mesh& mesh, int resolution) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "");
  SilhouetteMask out{resolution, Bitmask(resolution, resolution, 0)};
  const IsoCamera camera(mesh.bounds(), resolution);
  std::vector<Vec2> projected(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    projected[i] = camera.project(mesh.vertices[i]);
  }
  for (const auto& tri : mesh.triangles) {
    const Vec2 a = projected[tri[0]], b = projected[tri[1]], c = projected[tri[2]];
    const double area2 = cross(b - a, c - a);
    if (area2 == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}))));
    const int x1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}))));
    const int y1 = std::min(resolution - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (out.bits.at(x, y)) continue;
        const Vec2 p{x + 0.5, y + 0.5};
        const double w0 = cross(b - a, p - a);
        const double w1 = cross(c - b, p - b);
        const double w2 = cross(a - c, p - c);
        const bool inside = area2 > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)
                                        : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
        if (inside) out.bits.at(x, y) = 1;
      }
    }
  }
  return out;
}

double silhouette_iou(const SilhouetteMask& a, const SilhouetteMask& b) {
  if (a.resolution != b.resolution || a.bits.width() != b.bits.width() ||
      a.bits.height() != b.bits.height()) {
    throw Error(ErrorCode::ResolutionMismatch,
                std::to_string(a.resolution) + " vs " + std::to_string(b.resolution));
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i] != 0, y = b.bits[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Ear-clipped cap triangles, indices into the concatenation outer + holes,
// all wound counter-clockwise.
std::vector<std::array<std::uint32_t, 3>> cap_triangles(const Polygon& polygon,
                                                        const std::vector<Vec2>& flat) {
  using Point = std::array<double, 2>;
  std::vector<std::vector<Point>> rings;
  rings.reserve(1 + polygon.holes.size());
  auto add = [&](const std::vector<Vec2>& ring) {
    std::vector<Point> r;
    r.reserve(ring.size());
    for (const Vec2& p : ring) r.push_back({p.x, p.y});
    rings.push_back(std::move(r));
  };
  add(polygon.outer);
  for (const auto& h : polygon.holes) add(h);
  const std::vector<std::uint32_t> idx = mapbox::earcut<std::uint32_t, double>(rings);
  std::vector<std::array<std::uint32_t, 3>> tris;
  tris.reserve(idx.size() / 3);
  for (std::size_t k = 0; k + 2 < idx.size(); k += 3) {
    std::array<std::uint32_t, 3> t{idx[k], idx[k + 1], idx[k + 2]};
    const double a2 = cross(flat[t[1]] - flat[t[0]], flat[t[2]] - flat[t[0]]);
    if (std::abs(a2) * 0.5 <= kMinTriangleArea) continue;
    if (a2 < 0.0) std::swap(t[1], t[2]);
    tris.push_back(t);
  }
  return tris;
}

std::vector<Vec2> flatten(const Polygon& polygon) {
  std::vector<Vec2> flat = polygon.outer;
  for (const auto& h : polygon.holes) flat.insert(flat.end(), h.begin(), h.end());
  return flat;
}

bool polygon_usable(const Polygon& p) {
  if (p.outer.size() < 3 || !(signed_area(p.outer) > 0.0)) return false;
  for (const auto& h : p.holes) {
    if (h.size() < 3) return false;
  }
  for (const Vec2& v : p.outer) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
  }
  return true;
}

}  // namespace

Mesh extrude_footprint(const Polygon& footprint, double height) {
  if (!(height > 0.0) || !std::isfinite(height)) throw Error(ErrorCode::ZeroHeight, format_double(height));
  if (!polygon_usable(footprint)) throw Error(ErrorCode::InvalidPolygon, "");
  const std::vector<Vec2> flat = flatten(footprint);
  const auto n = static_cast<std::uint32_t>(flat.size());
  Mesh mesh;
  mesh.vertices.reserve(2 * n);
  for (const Vec2& p : flat) mesh.vertices.push_back({p.x, p.y, 0.0});
  for (const Vec2& p : flat) mesh.vertices.push_back({p.x, p.y, height});

  for (const auto& t : cap_triangles(footprint, flat)) {
    mesh.triangles.push_back({t[0], t[2], t[1]});          // bottom faces down
    mesh.triangles.push_back({t[0] + n, t[1] + n, t[2] + n});  // top faces up
  }
  // Side walls; for CCW outer and CW holes the solid is on the left of travel.
  std::uint32_t base = 0;
  auto walls = [&](std::size_t count) {
    for (std::uint32_t k = 0; k < count; ++k) {
      const std::uint32_t a = base + k;
      const std::uint32_t b = base + (k + 1) % static_cast<std::uint32_t>(count);
      mesh.triangles.push_back({a, b, b + n});
      mesh.triangles.push_back({a, b + n, a + n});
    }
    base += static_cast<std::uint32_t>(count);
  };
  walls(footprint.outer.size());
  for (const auto& h : footprint.holes) walls(h.size());
  compute_vertex_normals(mesh);
  return mesh;
}

Mesh triangulate_polygon(const Polygon& polygon) {
  Mesh mesh;
  if (!polygon_usable(polygon)) return mesh;
  const std::vector<Vec2> flat = flatten(polygon);
  for (const Vec2& p : flat) mesh.vertices.push_back({p.x, p.y, 0.0});
  mesh.triangles = cap_triangles(polygon, flat);
  mesh.normals.assign(mesh.vertices.size(), Vec3{0.0, 0.0, 1.0});
  return mesh;
}

Mesh triangulate_layer_mask(const Bitmask& mask, double meters_per_pixel) {
  Mesh out;
  for (const Polygon& poly : layout::trace_all_components(mask, meters_per_pixel)) {
    append_mesh(out, triangulate_polygon(poly));
  }
  return out;
}

void append_mesh(Mesh& into, const Mesh& other) {
  const auto offset = static_cast<std::uint32_t>(into.vertices.size());
  into.vertices.insert(into.vertices.end(), other.vertices.begin(), other.vertices.end());
  into.normals.insert(into.normals.end(), other.normals.begin(), other.normals.end());
  if (!other.uvs.empty() || !into.uvs.empty()) {
    into.uvs.resize(offset, Vec2{});
    if (other.uvs.empty()) {
      into.uvs.resize(into.vertices.size(), Vec2{});
    } else {
      into.uvs.insert(into.uvs.end(), other.uvs.begin(), other.uvs.end());
    }
  }
  for (auto t : other.triangles) into.triangles.push_back({t[0] + offset, t[1] + offset, t[2] + offset});
}

}  // namespace majutsu::geometry
