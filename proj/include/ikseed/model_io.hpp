#pragma once

// Robot-model file loader (JSON).
//
//   {
//     "name": "...",
//     "base_link": "base",                      // optional
//     "base_dof": ["x", "y", "theta"],          // subset of x, y, z, theta
//     "base_limits": {"y": [-1, 1]},            // optional per base DOF
//     "joints": [
//       {"name": "j1", "kind": "revolute", "axis": [0, 0, 1],
//        "origin": {"translation": [0, 0, 0.1], "quaternion": [1, 0, 0, 0]},
//        "limits": [-1.5, 1.5],
//        "parent": "base", "child": "j1_link",   // optional
//        "coupling": {"offset": 0, "terms": {"j0": -2.0}}}   // optional
//     ],
//     "frames": {"right": {"arm_base": "...", "lower_arm": "...",
//                          "wrist_joints": ["...", "...", "..."], "hand": "..."}}
//   }
//
// `parent` defaults to the previous joint's child link (the base link for the
// first joint) and `child` defaults to the joint name. Base DOF become virtual
// joints base_x, base_y, base_z, base_theta between link "world" and the base
// link, always in that order.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ikseed {

inline constexpr std::array<const char*, 4> kBaseDofNames = {"x", "y", "z", "theta"};

namespace detail {

using json = nlohmann::json;

inline Vec3 read_vec3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

/// (w, x, y, z) unit quaternion.
inline Quat read_quat(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ParseError(what + ": expected quaternion [w, x, y, z]");
  std::array<double, 4> c{};
  for (int i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": expected numbers");
    c[i] = j[i].get<double>();
  }
  Quat q(c[0], c[1], c[2], c[3]);
  const double n = q.norm();
  if (!(n > 1e-12)) throw ValidationError(what + ": zero quaternion");
  if (std::abs(n - 1.0) > 1e-6) throw ValidationError(what + ": quaternion is not unit length");
  q.normalize();
  return q;
}

inline Pose read_pose(const json& j, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected an object");
  Pose p;
  if (j.contains("translation")) p.translation = read_vec3(j["translation"], what + ".translation");
  if (j.contains("quaternion")) p.rotation = read_quat(j["quaternion"], what + ".quaternion").toRotationMatrix();
  return p;
}

inline json write_pose(const Pose& p) {
  const Quat q = p.quaternion();
  return {{"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"quaternion", {q.w(), q.x(), q.y(), q.z()}}};
}

inline std::string read_string(const json& j, const char* key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_string()) throw ParseError(what + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

struct ModelOptions {
  /// Replaces the file's base_dof list when set.
  std::optional<std::vector<std::string>> base_dof;
};

inline KinematicChain load_chain(const std::string& model_text, const ModelOptions& options = {}) {
  using detail::json;
  const json doc = detail::parse_json_text(model_text, "robot model");
  if (!doc.is_object()) throw ParseError("robot model: top level must be an object");

  KinematicChain::Definition def;
  def.name = doc.value("name", std::string("robot"));
  const std::string base_link = doc.value("base_link", std::string("base"));

  std::vector<std::string> base_dof;
  if (options.base_dof) {
    base_dof = *options.base_dof;
  } else if (doc.contains("base_dof")) {
    if (!doc["base_dof"].is_array()) throw ParseError("robot model: base_dof must be an array");
    for (const auto& d : doc["base_dof"]) {
      if (!d.is_string()) throw ParseError("robot model: base_dof entries must be strings");
      base_dof.push_back(d.get<std::string>());
    }
  }
  for (const auto& d : base_dof) {
    if (std::find(kBaseDofNames.begin(), kBaseDofNames.end(), d) == kBaseDofNames.end())
      throw ValidationError("robot model: unknown base DOF '" + d + "'");
    if (std::count(base_dof.begin(), base_dof.end(), d) > 1)
      throw ValidationError("robot model: duplicate base DOF '" + d + "'");
  }

  std::string prev_link = base_link;
  if (!base_dof.empty()) {
    def.root_link = "world";
    prev_link = "world";
    std::vector<std::string> present;
    for (const char* n : kBaseDofNames)
      if (std::find(base_dof.begin(), base_dof.end(), n) != base_dof.end()) present.emplace_back(n);
    for (std::size_t k = 0; k < present.size(); ++k) {
      const std::string& d = present[k];
      Joint jt;
      jt.name = "base_" + d;
      jt.parent = prev_link;
      jt.child = (k + 1 == present.size()) ? base_link : jt.name + "_link";
      if (d == "theta") {
        jt.kind = JointKind::Revolute;
        jt.axis = Vec3::UnitZ();
        jt.lower = -std::numbers::pi;
        jt.upper = std::numbers::pi;
      } else {
        jt.kind = JointKind::Prismatic;
        jt.axis = d == "x" ? Vec3::UnitX() : d == "y" ? Vec3::UnitY() : Vec3::UnitZ();
        jt.lower = -10.0;
        jt.upper = 10.0;
      }
      if (doc.contains("base_limits") && doc["base_limits"].contains(d)) {
        const auto& lim = doc["base_limits"][d];
        if (!lim.is_array() || lim.size() != 2 || !lim[0].is_number() || !lim[1].is_number())
          throw ParseError("robot model: base_limits." + d + " must be [lo, hi]");
        jt.lower = lim[0].get<double>();
        jt.upper = lim[1].get<double>();
      }
      prev_link = jt.child;
      def.joints.push_back(std::move(jt));
    }
  } else {
    def.root_link = base_link;
  }

  if (!doc.contains("joints") || !doc["joints"].is_array()) throw ParseError("robot model: missing joints array");
  for (const auto& jj : doc["joints"]) {
    if (!jj.is_object()) throw ParseError("robot model: joint entries must be objects");
    Joint jt;
    jt.name = detail::read_string(jj, "name", "joint");
    const std::string what = "joint '" + jt.name + "'";
    const std::string kind = detail::read_string(jj, "kind", what);
    if (kind == "revolute") jt.kind = JointKind::Revolute;
    else if (kind == "prismatic") jt.kind = JointKind::Prismatic;
    else if (kind == "fixed") jt.kind = JointKind::Fixed;
    else throw ParseError(what + ": unknown kind '" + kind + "'");
    jt.parent = jj.contains("parent") ? detail::read_string(jj, "parent", what) : prev_link;
    jt.child = jj.contains("child") ? detail::read_string(jj, "child", what) : jt.name;
    if (jj.contains("origin")) jt.origin = detail::read_pose(jj["origin"], what + ".origin");
    if (jt.moves()) {
      if (!jj.contains("axis")) throw ParseError(what + ": missing axis");
      jt.axis = detail::read_vec3(jj["axis"], what + ".axis");
      if (jj.contains("coupling")) {
        const auto& c = jj["coupling"];
        JointCoupling coupling;
        coupling.offset = c.value("offset", 0.0);
        if (!c.contains("terms") || !c["terms"].is_object())
          throw ParseError(what + ": coupling needs a terms object");
        for (const auto& [src, gain] : c["terms"].items()) {
          if (!gain.is_number()) throw ParseError(what + ": coupling gains must be numbers");
          coupling.terms.emplace_back(src, gain.get<double>());
        }
        jt.coupling = std::move(coupling);
      }
      if (jj.contains("limits")) {
        const auto& lim = jj["limits"];
        if (!lim.is_array() || lim.size() != 2 || !lim[0].is_number() || !lim[1].is_number())
          throw ParseError(what + ": limits must be [lo, hi]");
        jt.lower = lim[0].get<double>();
        jt.upper = lim[1].get<double>();
      } else if (!jt.coupling) {
        throw ParseError(what + ": missing limits");
      }
    }
    prev_link = jt.child;
    def.joints.push_back(std::move(jt));
  }

  if (doc.contains("frames")) {
    if (!doc["frames"].is_object()) throw ParseError("robot model: frames must be an object keyed by arm");
    for (const auto& [arm_name, f] : doc["frames"].items()) {
      ArmSpec arm;
      arm.name = arm_name;
      const std::string what = "frames." + arm_name;
      arm.arm_base = detail::read_string(f, "arm_base", what);
      arm.lower_arm = detail::read_string(f, "lower_arm", what);
      arm.hand = detail::read_string(f, "hand", what);
      if (!f.contains("wrist_joints") || !f["wrist_joints"].is_array())
        throw ParseError(what + ": missing wrist_joints");
      for (const auto& w : f["wrist_joints"]) {
        if (!w.is_string()) throw ParseError(what + ": wrist_joints entries must be strings");
        arm.wrist_joints.push_back(w.get<std::string>());
      }
      def.arms.push_back(std::move(arm));
    }
  }
  return KinematicChain(std::move(def));
}

inline KinematicChain load_chain_file(const std::filesystem::path& path, const ModelOptions& options = {}) {
  return load_chain(detail::read_file(path), options);
}

}  // namespace ikseed
