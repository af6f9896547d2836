// Indexed triangle meshes (units: meters), ASCII OBJ io and the watertight
// check used to gate penetration queries.
#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "handshadow/math.hpp"

namespace handshadow {

struct Tri {
  int a = 0, b = 0, c = 0;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;

  bool empty() const { return triangles.empty(); }
};

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(b - a, c - a));
}

inline Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  return cross(b - a, c - a);
}

// Every directed edge must appear exactly once and its reverse exactly once:
// closed, consistently oriented, no fins. Disjoint closed components pass.
inline bool is_watertight(const TriMesh& m) {
  std::unordered_map<uint64_t, int> directed;
  directed.reserve(m.triangles.size() * 3);
  auto key = [](int a, int b) {
    return (uint64_t(uint32_t(a)) << 32) | uint64_t(uint32_t(b));
  };
  for (const Tri& t : m.triangles) {
    const int e[3][2] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
    for (auto& ed : e) {
      if (ed[0] == ed[1]) return false;
      if (++directed[key(ed[0], ed[1])] > 1) return false;
    }
  }
  for (const auto& [k, n] : directed) {
    uint64_t rev = (k << 32) | (k >> 32);
    auto it = directed.find(rev);
    if (it == directed.end() || it->second != 1) return false;
  }
  return true;
}

inline void validate_mesh(const TriMesh& m, double min_area = 1e-12) {
  const int n = int(m.vertices.size());
  for (size_t i = 0; i < m.triangles.size(); ++i) {
    const Tri& t = m.triangles[i];
    if (t.a < 0 || t.b < 0 || t.c < 0 || t.a >= n || t.b >= n || t.c >= n)
      throw MeshError("triangle " + std::to_string(i) +
                      ": vertex index out of range");
    if (triangle_area(m.vertices[size_t(t.a)], m.vertices[size_t(t.b)],
                      m.vertices[size_t(t.c)]) <= min_area)
      throw MeshError("triangle " + std::to_string(i) + ": degenerate (area <= " +
                      std::to_string(min_area) + ")");
  }
}

// ASCII OBJ. Accepts `v` and `f` records; faces with more than three corners
// are fan-triangulated; `f` corner syntax v, v/vt, v//vn, v/vt/vn. Other
// record types are skipped.
inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open OBJ file: " + path);
  TriMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x >> v.y >> v.z))
        throw MeshError(path + ":" + std::to_string(lineno) +
                        ": malformed vertex record");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string corner;
      while (ss >> corner) {
        size_t slash = corner.find('/');
        std::string first = slash == std::string::npos ? corner : corner.substr(0, slash);
        int i = 0;
        try {
          i = std::stoi(first);
        } catch (...) {
          throw MeshError(path + ":" + std::to_string(lineno) +
                          ": malformed face index '" + corner + "'");
        }
        if (i < 0) i = int(mesh.vertices.size()) + i + 1;  // relative indexing
        if (i < 1 || i > int(mesh.vertices.size()))
          throw MeshError(path + ":" + std::to_string(lineno) +
                          ": face index " + first + " out of range (OBJ is 1-based)");
        idx.push_back(i - 1);
      }
      if (idx.size() < 3)
        throw MeshError(path + ":" + std::to_string(lineno) +
                        ": face with fewer than 3 corners");
      for (size_t k = 2; k < idx.size(); ++k)
        mesh.triangles.push_back({idx[0], idx[int(k) - 1], idx[k]});
    }
  }
  return mesh;
}

// LF line endings, 1-based indices, 6 decimal places.
inline void write_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MeshError("cannot open OBJ file for writing: " + path);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const Tri& t : mesh.triangles) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", t.a + 1, t.b + 1, t.c + 1);
    out << buf;
  }
  if (!out) throw MeshError("write failed: " + path);
}

struct Aabb {
  Vec3 lo{1e30, 1e30, 1e30};
  Vec3 hi{-1e30, -1e30, -1e30};

  void expand(const Vec3& p) {
    lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y); lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y); hi.z = std::max(hi.z, p.z);
  }
  void expand(const Aabb& b) {
    expand(b.lo);
    expand(b.hi);
  }
  bool contains(const Aabb& b) const {
    return lo.x <= b.lo.x && lo.y <= b.lo.y && lo.z <= b.lo.z &&
           hi.x >= b.hi.x && hi.y >= b.hi.y && hi.z >= b.hi.z;
  }
  bool overlaps(const Aabb& b, double margin = 0.0) const {
    return lo.x <= b.hi.x + margin && b.lo.x <= hi.x + margin &&
           lo.y <= b.hi.y + margin && b.lo.y <= hi.y + margin &&
           lo.z <= b.hi.z + margin && b.lo.z <= hi.z + margin;
  }
};

inline Aabb mesh_bounds(const TriMesh& m) {
  Aabb b;
  for (const Vec3& v : m.vertices) b.expand(v);
  return b;
}

}  // namespace handshadow
