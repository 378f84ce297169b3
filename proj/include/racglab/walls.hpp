#pragma once

#include <optional>
#include <vector>

#include "racglab/group.hpp"

namespace racglab {

enum class Side : int { Minus = -1, Plus = 1 };

inline Side opposite(Side s) { return s == Side::Plus ? Side::Minus : Side::Plus; }
inline char side_char(Side s) { return s == Side::Plus ? '+' : '-'; }

// A hyperplane of the Davis complex, named by its reflection t = g v g^-1.
// Edges dual to the same hyperplane give the same canonical reflection.
class Wall {
 public:
  const GroupElement& reflection() const { return reflection_; }

  friend bool operator==(const Wall& a, const Wall& b) { return a.reflection_ == b.reflection_; }
  friend auto operator<=>(const Wall& a, const Wall& b) { return a.reflection_ <=> b.reflection_; }

 private:
  friend Wall wall_of_edge(const Group&, const GroupElement&, Letter);
  friend Wall make_wall(const Group&, const GroupElement&);
  explicit Wall(GroupElement t) : reflection_(std::move(t)) {}

  GroupElement reflection_;
};

struct WallHash {
  std::size_t operator()(const Wall& w) const noexcept { return ElementHash{}(w.reflection()); }
};

struct HalfSpaceRef {
  Wall wall;
  Side sign;
};

// Wall dual to the Cayley edge (g, g v).
Wall wall_of_edge(const Group& group, const GroupElement& g, Letter v);

// Validates that t is a reflection (a conjugate of a generator). Throws ValidationError.
Wall make_wall(const Group& group, const GroupElement& t);

// An edge (g, g v) dual to the wall, with g as short as possible.
struct DualEdge {
  GroupElement from;
  Letter generator;
};
DualEdge dual_edge(const Group& group, const Wall& w);

// + when x lies on the identity's side of w.
Side side(const Group& group, const Wall& w, const GroupElement& x);

// One wall per letter of the canonical geodesic from x to y.
std::vector<Wall> walls_separating(const Group& group, const GroupElement& x,
                                   const GroupElement& y);

bool crosses(const Group& group, const Wall& w1, const Wall& w2);

// For disjoint walls: H^inner(w2) is contained in H^outer(w1).
struct Nesting {
  Side outer;  // half-space of w1
  Side inner;  // half-space of w2
};
// Throws ValidationError on crossing or equal walls.
Nesting wall_nesting(const Group& group, const Wall& w1, const Wall& w2);

struct StrongSeparation {
  bool separated = false;  // "at scale": a false answer is definitive
  int scale = 0;
  GroupElement centre;
  std::optional<Wall> witness;  // a wall crossing both, when not separated
  std::size_t walls_scanned = 0;
};
StrongSeparation strongly_separated_at_scale(const Group& group, const Wall& w1, const Wall& w2,
                                             int scale, std::size_t cap = default_ball_cap());

// Throws ValidationError when g has finite order (g^k = e for some k <= max(power, 2)).
bool skewers(const Group& group, const GroupElement& g, const Wall& w, int power);

// Generators whose hyperplane is Morse: the star of v spans a Morse special subgroup.
VertexSet morse_walls(const DefiningGraph& g);

}  // namespace racglab
