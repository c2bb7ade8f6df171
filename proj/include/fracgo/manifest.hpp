#pragma once

#include <json.hpp>

#include "fracgo/medium.hpp"

namespace fracgo {

using json = nlohmann::json;

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string manifest_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

inline json to_json(const GridD& g) {
  return json{{"dim", g.dim},
              {"sizes", {g.sizes[0], g.sizes[1]}},
              {"periods", {g.periods[0], g.periods[1]}},
              {"origin", {g.origin[0], g.origin[1]}}};
}

inline json to_json(const Omega& o) {
  if (o.kind == Omega::Kind::Disk)
    return json{{"kind", "disk"}, {"center", {o.center[0], o.center[1]}}, {"radius", o.radius}};
  return json{{"kind", "rect"}, {"lo", {o.lo[0], o.lo[1]}}, {"hi", {o.hi[0], o.hi[1]}}};
}

inline json to_json(const Medium& m) {
  json idx;
  if (auto* c = std::get_if<ConstantIndex>(&m.index)) idx = {{"kind", "constant"}, {"r0", c->r0}};
  else if (std::holds_alternative<ExpSlabIndex>(m.index)) idx = {{"kind", "exp_slab"}};
  else if (auto* rb = std::get_if<RadialBumpIndex>(&m.index))
    idx = {{"kind", "radial_bump"}, {"beta", rb->beta}, {"sigma", rb->sigma}, {"t0", rb->t0}, {"t1", rb->t1}};
  else idx = {{"kind", "sampled"}};
  json pot;
  if (std::holds_alternative<PotentialZero>(m.potential)) pot = {{"kind", "zero"}};
  else if (auto* c = std::get_if<PotentialConst>(&m.potential)) pot = {{"kind", "constant"}, {"q0", c->q0}};
  else if (auto* gq = std::get_if<PotentialGaussian>(&m.potential))
    pot = {{"kind", "gaussian"}, {"amp", gq->amp}, {"center", {gq->center[0], gq->center[1]}}, {"sigma", gq->sigma}};
  else pot = {{"kind", "sampled"}};
  return json{{"index", idx}, {"potential", pot}, {"s", m.s}, {"omega", to_json(m.omega)}, {"dim", m.dim}};
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << j.dump(2) << '\n';
}

}  // namespace fracgo
