// Text formats for rigs and pose parameters.
//
// Rig file: key/value header, joint and limit tables, the rest mesh (either
// OBJ records embedded between mesh_begin/mesh_end or a mesh_obj reference
// relative to the rig file), then per-vertex skin weights. Angles are degrees.
//
// Params file: per hand, beta, per-joint theta in degrees, the global
// rotation as a 3x3 row-major matrix and the translation in meters.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "handshadow/rig.hpp"

namespace handshadow {

inline void save_rig(const HandRig& rig, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RigError("cannot open rig file for writing: " + path);
  char buf[256];
  out << "handshadow-rig 1\n";
  out << "handedness " << to_string(rig.handedness) << "\n";
  out << "joints " << kNumJoints << "\n";
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& jt = rig.joints[size_t(j)];
    std::snprintf(buf, sizeof buf,
                  "joint %d parent %d finger %d offset %.17g %.17g %.17g axis %.17g %.17g %.17g\n",
                  j, jt.parent, jt.finger, jt.offset.x, jt.offset.y, jt.offset.z,
                  jt.axis.x, jt.axis.y, jt.axis.z);
    out << buf;
  }
  out << "limits " << kNumArticulated << "\n";
  for (int j = 0; j < kNumArticulated; ++j) {
    const Vec3& b = rig.limits.bounds_deg[size_t(j)];
    std::snprintf(buf, sizeof buf, "limit %d %.17g %.17g %.17g\n", j, b.x, b.y, b.z);
    out << buf;
  }
  out << "mesh_begin\n";
  for (const Vec3& v : rig.rest_mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const Tri& t : rig.rest_mesh.triangles)
    out << "f " << t.a + 1 << " " << t.b + 1 << " " << t.c + 1 << "\n";
  out << "mesh_end\n";
  out << "weights " << rig.skin_weights.size() << "\n";
  for (size_t v = 0; v < rig.skin_weights.size(); ++v) {
    int n = 0;
    for (const auto& inf : rig.skin_weights[v])
      if (inf.weight > 0.0) ++n;
    out << "w " << v << " " << n;
    for (const auto& inf : rig.skin_weights[v]) {
      if (inf.weight <= 0.0) continue;
      std::snprintf(buf, sizeof buf, " %d %.17g", inf.joint, inf.weight);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw RigError("write failed: " + path);
}

inline HandRig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RigError("cannot open rig file: " + path);
  HandRig rig;
  std::string line, tag;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw RigError(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto next = [&](std::istringstream& ss) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      ss = std::istringstream(line);
      return true;
    }
    return false;
  };

  std::istringstream ss;
  if (!next(ss)) fail("empty file");
  std::string magic;
  int version = 0;
  ss >> magic >> version;
  if (magic != "handshadow-rig" || version != 1)
    fail("not a handshadow-rig v1 file");

  if (!next(ss)) fail("missing handedness");
  std::string hd;
  ss >> tag >> hd;
  if (tag != "handedness" || (hd != "left" && hd != "right"))
    fail("expected 'handedness left|right'");
  rig.handedness = hd == "left" ? Handedness::Left : Handedness::Right;

  if (!next(ss)) fail("missing joints");
  int njoints = 0;
  ss >> tag >> njoints;
  if (tag != "joints") fail("expected 'joints <count>'");
  if (njoints != kNumJoints)
    fail("expected 15 articulated joints plus the wrist root (16 total), got " +
         std::to_string(njoints));
  for (int j = 0; j < njoints; ++j) {
    if (!next(ss)) fail("truncated joint table");
    int idx = -1;
    HandRig::Joint jt;
    std::string t1, t2, t3, t4;
    ss >> tag >> idx >> t1 >> jt.parent >> t2 >> jt.finger >> t3 >> jt.offset.x >>
        jt.offset.y >> jt.offset.z >> t4 >> jt.axis.x >> jt.axis.y >> jt.axis.z;
    if (!ss || tag != "joint" || idx != j) fail("malformed joint record");
    rig.joints[size_t(j)] = jt;
  }

  if (!next(ss)) fail("missing limits");
  int nlimits = 0;
  ss >> tag >> nlimits;
  if (tag != "limits" || nlimits != kNumArticulated)
    fail("expected 'limits 15'");
  for (int j = 0; j < nlimits; ++j) {
    if (!next(ss)) fail("truncated limit table");
    int idx = -1;
    Vec3 b;
    ss >> tag >> idx >> b.x >> b.y >> b.z;
    if (!ss || tag != "limit" || idx != j) fail("malformed limit record");
    rig.limits.bounds_deg[size_t(j)] = b;
  }

  if (!next(ss)) fail("missing mesh");
  ss >> tag;
  if (tag == "mesh_obj") {
    std::string rel;
    ss >> rel;
    auto dir = std::filesystem::path(path).parent_path();
    rig.rest_mesh = load_obj((dir / rel).string());
  } else if (tag == "mesh_begin") {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line == "mesh_end") break;
      std::istringstream ls(line);
      std::string rec;
      if (!(ls >> rec)) continue;
      if (rec == "v") {
        Vec3 v;
        if (!(ls >> v.x >> v.y >> v.z)) fail("malformed embedded vertex");
        rig.rest_mesh.vertices.push_back(v);
      } else if (rec == "f") {
        int a, b, c;
        if (!(ls >> a >> b >> c)) fail("malformed embedded face");
        int n = int(rig.rest_mesh.vertices.size());
        if (a < 1 || b < 1 || c < 1 || a > n || b > n || c > n)
          fail("embedded face index out of range (1-based)");
        rig.rest_mesh.triangles.push_back({a - 1, b - 1, c - 1});
      }
    }
  } else {
    fail("expected 'mesh_begin' or 'mesh_obj <path>'");
  }

  if (!next(ss)) fail("missing weights");
  size_t nweights = 0;
  ss >> tag >> nweights;
  if (tag != "weights") fail("expected 'weights <count>'");
  if (nweights != rig.rest_mesh.vertices.size())
    fail("weight count does not match mesh vertex count");
  rig.skin_weights.assign(nweights, {});
  for (size_t v = 0; v < nweights; ++v) {
    if (!next(ss)) fail("truncated weights");
    size_t idx = 0;
    int n = 0;
    ss >> tag >> idx >> n;
    if (!ss || tag != "w" || idx != v || n < 1 || n > 4)
      fail("malformed weight record");
    for (int k = 0; k < n; ++k) {
      ss >> rig.skin_weights[v][size_t(k)].joint >> rig.skin_weights[v][size_t(k)].weight;
      if (!ss) fail("malformed weight record");
    }
  }

  rig.finalize();  // validates invariants: ordering, sums, watertightness
  return rig;
}

// --- params -------------------------------------------------------------------

inline void save_params(std::span<const std::pair<Handedness, HandParams>> hands,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RigError("cannot open params file for writing: " + path);
  char buf[512];
  out << "handshadow-params 1\n";
  out << "hands " << hands.size() << "\n";
  for (const auto& [hd, p] : hands) {
    out << "hand " << to_string(hd) << "\n";
    std::snprintf(buf, sizeof buf, "beta %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  p.beta[0], p.beta[1], p.beta[2], p.beta[3], p.beta[4], p.beta[5]);
    out << buf;
    for (int j = 0; j < kNumArticulated; ++j) {
      std::snprintf(buf, sizeof buf, "theta_deg %d %.17g %.17g %.17g\n", j,
                    rad_to_deg(p.theta[size_t(j * 3)]),
                    rad_to_deg(p.theta[size_t(j * 3 + 1)]),
                    rad_to_deg(p.theta[size_t(j * 3 + 2)]));
      out << buf;
    }
    Mat3 m = quat_to_mat3(p.q.normalized());
    std::snprintf(buf, sizeof buf,
                  "Q %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  m.m[0], m.m[1], m.m[2], m.m[3], m.m[4], m.m[5], m.m[6], m.m[7],
                  m.m[8]);
    out << buf;
    std::snprintf(buf, sizeof buf, "t %.17g %.17g %.17g\n", p.t.x, p.t.y, p.t.z);
    out << buf;
  }
  if (!out) throw RigError("write failed: " + path);
}

inline std::vector<std::pair<Handedness, HandParams>> load_params(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RigError("cannot open params file: " + path);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw RigError(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto next = [&](std::istringstream& ss) {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      ss = std::istringstream(line);
      return true;
    }
    return false;
  };

  std::istringstream ss;
  std::string tag;
  int version = 0;
  if (!next(ss)) fail("empty file");
  ss >> tag >> version;
  if (tag != "handshadow-params" || version != 1)
    fail("not a handshadow-params v1 file");
  if (!next(ss)) fail("missing hand count");
  size_t nhands = 0;
  ss >> tag >> nhands;
  if (tag != "hands" || nhands < 1 || nhands > 2)
    fail("expected 'hands 1|2'");

  std::vector<std::pair<Handedness, HandParams>> out;
  for (size_t h = 0; h < nhands; ++h) {
    if (!next(ss)) fail("truncated params");
    std::string hd;
    ss >> tag >> hd;
    if (tag != "hand" || (hd != "left" && hd != "right"))
      fail("expected 'hand left|right'");
    HandParams p;
    if (!next(ss)) fail("missing beta");
    ss >> tag;
    if (tag != "beta") fail("expected beta");
    for (double& b : p.beta) ss >> b;
    if (!ss) fail("malformed beta");
    for (int j = 0; j < kNumArticulated; ++j) {
      if (!next(ss)) fail("missing theta_deg");
      int idx = -1;
      double x, y, z;
      ss >> tag >> idx >> x >> y >> z;
      if (!ss || tag != "theta_deg" || idx != j) fail("malformed theta_deg record");
      p.theta[size_t(j * 3)] = deg_to_rad(x);
      p.theta[size_t(j * 3 + 1)] = deg_to_rad(y);
      p.theta[size_t(j * 3 + 2)] = deg_to_rad(z);
    }
    if (!next(ss)) fail("missing Q");
    ss >> tag;
    if (tag != "Q") fail("expected Q");
    Mat3 m;
    for (double& e : m.m) ss >> e;
    if (!ss) fail("malformed Q matrix");
    p.q = mat3_to_quat(m);
    if (!next(ss)) fail("missing t");
    ss >> tag >> p.t.x >> p.t.y >> p.t.z;
    if (!ss || tag != "t") fail("malformed t record");
    out.emplace_back(hd == "left" ? Handedness::Left : Handedness::Right, p);
  }
  return out;
}

}  // namespace handshadow
