#include "racglab/walls.hpp"

#include <unordered_set>

#include "racglab/errors.hpp"

namespace racglab {

Wall wall_of_edge(const Group& group, const GroupElement& g, Letter v) {
  return Wall(group.conjugate(g, group.generator(v)));
}

namespace {

// Peels t = g v g^-1 one conjugation at a time. Empty when t is not a reflection.
std::optional<DualEdge> peel(const Group& group, const GroupElement& t) {
  GroupElement core = t;
  GroupElement prefix = group.identity();
  while (core.length() > 1) {
    bool peeled = false;
    for (std::size_t s = 0; s < group.rank() && !peeled; ++s) {
      auto gs = group.generator(static_cast<Letter>(s));
      auto next = group.conjugate(gs, core);
      if (next.length() + 2 == core.length()) {
        core = next;
        prefix = group.multiply(prefix, static_cast<Letter>(s));
        peeled = true;
      }
    }
    if (!peeled) return std::nullopt;
  }
  if (core.length() != 1) return std::nullopt;
  return DualEdge{prefix, core.word()[0]};
}

}  // namespace

Wall make_wall(const Group& group, const GroupElement& t) {
  if (t.group_id() != group.id()) throw ValidationError("wall belongs to a different group");
  if (!peel(group, t))
    throw ValidationError("'" + group.format(t) + "' is not a reflection");
  return Wall(t);
}

DualEdge dual_edge(const Group& group, const Wall& w) {
  auto e = peel(group, w.reflection());
  if (!e) throw ValidationError("wall reflection is not a conjugate of a generator");
  return *e;
}

Side side(const Group& group, const Wall& w, const GroupElement& x) {
  // |t x| = d(t, x) because t is an involution; parity rules out equality.
  return group.distance(w.reflection(), x) > x.length() ? Side::Plus : Side::Minus;
}

std::vector<Wall> walls_separating(const Group& group, const GroupElement& x,
                                   const GroupElement& y) {
  std::vector<Wall> out;
  GroupElement p = x;
  for (Letter s : group.geodesic_word(x, y)) {
    out.push_back(wall_of_edge(group, p, s));
    p = group.multiply(p, s);
  }
  return out;
}

bool crosses(const Group& group, const Wall& w1, const Wall& w2) {
  if (w1 == w2) return false;
  const auto& t1 = w1.reflection();
  const auto& t2 = w2.reflection();
  return group.multiply(t1, t2) == group.multiply(t2, t1);
}

Nesting wall_nesting(const Group& group, const Wall& w1, const Wall& w2) {
  if (w1 == w2) throw ValidationError("nesting of a wall with itself");
  if (crosses(group, w1, w2)) throw ValidationError("nesting of crossing walls");
  // A dual edge of w2 crosses no other wall, so both its ends sit on one side
  // of w1; symmetrically for w1. The half-space of w2 away from w1 is nested
  // in the half-space of w1 that contains w2.
  auto e1 = dual_edge(group, w1);
  auto e2 = dual_edge(group, w2);
  return Nesting{side(group, w1, e2.from), opposite(side(group, w2, e1.from))};
}

StrongSeparation strongly_separated_at_scale(const Group& group, const Wall& w1, const Wall& w2,
                                             int scale, std::size_t cap) {
  if (w1 == w2 || crosses(group, w1, w2))
    throw ValidationError("strong separation needs two disjoint walls");
  auto e1 = dual_edge(group, w1);
  auto e2 = dual_edge(group, w2);
  auto path = group.vertex_path(e1.from, group.geodesic_word(e1.from, e2.from));
  StrongSeparation out;
  out.scale = scale;
  out.centre = path[path.size() / 2];

  BallIndex ball = enumerate_ball(group, scale, cap);
  std::unordered_set<Wall, WallHash> seen;
  for (std::uint32_t i = 0; i < ball.size(); ++i) {
    auto x = group.multiply(out.centre, ball.elements[i]);
    for (std::size_t s = 0; s < group.rank(); ++s) {
      if (ball.neighbour(i, static_cast<Letter>(s)) == BallIndex::kOutside) continue;
      auto w = wall_of_edge(group, x, static_cast<Letter>(s));
      if (!seen.insert(w).second) continue;
      if (crosses(group, w, w1) && crosses(group, w, w2)) {
        out.separated = false;
        out.witness = w;
        out.walls_scanned = seen.size();
        return out;
      }
    }
  }
  out.separated = true;
  out.walls_scanned = seen.size();
  return out;
}

namespace {

// The half-space of w that g^n maps strictly inside itself, if any.
std::optional<Side> nested_translate(const Group& group, const GroupElement& gn, const Wall& w) {
  Wall moved = make_wall(group, group.conjugate(gn, w.reflection()));
  if (moved == w || crosses(group, w, moved)) return std::nullopt;
  Nesting n = wall_nesting(group, w, moved);
  // g^n sends H^+(w) to the side of the moved wall containing g^n itself.
  Side image_of_plus = side(group, moved, gn);
  Side image_of_outer = n.outer == Side::Plus ? image_of_plus : opposite(image_of_plus);
  if (image_of_outer != n.inner) return std::nullopt;
  return n.outer;
}

}  // namespace

bool skewers(const Group& group, const GroupElement& g, const Wall& w, int power) {
  if (power < 1) throw ValidationError("skewer power must be positive");
  GroupElement gk = group.identity();
  for (int k = 1; k <= std::max(power, 2); ++k) {
    gk = group.multiply(gk, g);
    if (gk.is_identity())
      throw ValidationError("element '" + group.format(g) + "' has finite order " +
                            std::to_string(k));
  }
  auto first = nested_translate(group, group.power(g, power), w);
  if (!first) return false;
  auto second = nested_translate(group, group.power(g, 2L * power), w);
  return second && *second == *first;
}

VertexSet morse_walls(const DefiningGraph& g) {
  VertexSet out = 0;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (special_subgroup_is_morse(g, g.star(v))) out |= vertex_bit(v);
  return out;
}

}  // namespace racglab
