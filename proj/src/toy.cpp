#include "jsenet/toy.hpp"

#include <algorithm>
#include <random>

namespace jsenet {

namespace {

struct Box {
  Vec3 lo, hi;
  std::int32_t label;
  Color color;
};

const Box kBoxes[] = {
    {{0.35, 0.40, 0.0}, {0.85, 0.90, 0.5}, 1, {0.80f, 0.25f, 0.20f}},
    {{1.15, 1.05, 0.0}, {1.65, 1.55, 0.5}, 2, {0.20f, 0.35f, 0.80f}},
};
const Color kFloorColor{0.55f, 0.55f, 0.50f};

void add_quad(TriangleMesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, std::int32_t label,
              const Color& color) {
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const Vec3* v : {&a, &b, &c, &d}) {
    mesh.vertices.push_back(*v);
    mesh.colors.push_back(color);
    mesh.labels.push_back(label);
  }
  mesh.faces.push_back({base, base + 1, base + 2});
  mesh.faces.push_back({base, base + 2, base + 3});
}

}  // namespace

TriangleMesh make_toy_mesh() {
  TriangleMesh mesh;
  add_quad(mesh, {0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}, 0, kFloorColor);
  for (const Box& b : kBoxes) {
    const Vec3& l = b.lo;
    const Vec3& h = b.hi;
    add_quad(mesh, {l.x(), l.y(), h.z()}, {h.x(), l.y(), h.z()}, {h.x(), h.y(), h.z()}, {l.x(), h.y(), h.z()},
             b.label, b.color);
    add_quad(mesh, {l.x(), l.y(), l.z()}, {h.x(), l.y(), l.z()}, {h.x(), l.y(), h.z()}, {l.x(), l.y(), h.z()},
             b.label, b.color);
    add_quad(mesh, {l.x(), h.y(), l.z()}, {h.x(), h.y(), l.z()}, {h.x(), h.y(), h.z()}, {l.x(), h.y(), h.z()},
             b.label, b.color);
    add_quad(mesh, {l.x(), l.y(), l.z()}, {l.x(), h.y(), l.z()}, {l.x(), h.y(), h.z()}, {l.x(), l.y(), h.z()},
             b.label, b.color);
    add_quad(mesh, {h.x(), l.y(), l.z()}, {h.x(), h.y(), l.z()}, {h.x(), h.y(), h.z()}, {h.x(), l.y(), h.z()},
             b.label, b.color);
  }
  return mesh;
}

PointCloud make_toy_scene(std::uint64_t seed, double density, double color_noise) {
  const MeshSampling sampled = sample_mesh(make_toy_mesh(), density, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<float> noise(0.0f, static_cast<float>(color_noise));
  PointCloud out;
  const PointCloud& s = sampled.cloud;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Vec3& p = s.positions[i];
    if (s.labels[i] == 0) {
      const bool hidden = std::any_of(std::begin(kBoxes), std::end(kBoxes), [&](const Box& b) {
        return p.x() > b.lo.x() && p.x() < b.hi.x() && p.y() > b.lo.y() && p.y() < b.hi.y();
      });
      if (hidden) continue;
    }
    Color c = s.colors[i];
    for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k] + noise(rng), 0.0f, 1.0f);
    out.push_back(p, c, s.labels[i]);
  }
  return out;
}

}  // namespace jsenet
