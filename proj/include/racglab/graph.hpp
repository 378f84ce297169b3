#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace racglab {

// Bit i set <=> vertex i in the set. Graphs are capped at 64 vertices.
using VertexSet = std::uint64_t;

inline constexpr std::size_t kMaxVertices = 64;

inline constexpr VertexSet vertex_bit(std::size_t v) { return VertexSet{1} << v; }

// Finite simplicial graph presenting a right-angled Coxeter group. Vertex
// declaration order fixes the generator order used everywhere downstream.
class DefiningGraph {
 public:
  DefiningGraph(std::vector<std::string> vertices,
                const std::vector<std::pair<std::string, std::string>>& edges);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t v) const { return labels_.at(v); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool adjacent(std::size_t u, std::size_t v) const { return (adj_[u] >> v) & 1U; }
  VertexSet neighbours(std::size_t v) const { return adj_[v]; }
  VertexSet all() const;
  // v together with its neighbours.
  VertexSet star(std::size_t v) const { return adj_[v] | vertex_bit(v); }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  nlohmann::json to_json() const;
  std::vector<std::string> labels_of(VertexSet set) const;
  VertexSet set_of(const std::vector<std::string>& labels) const;

  friend bool operator==(const DefiningGraph& a, const DefiningGraph& b) {
    return a.labels_ == b.labels_ && a.adj_ == b.adj_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<VertexSet> adj_;
};

// Parses the canonical graph file format
// {"vertices": [...], "edges": [[u, v], ...]}. Throws ValidationError.
DefiningGraph parse_graph(std::string_view text);
DefiningGraph load_graph(const std::string& path);

// An induced 4-cycle listed in cyclic order; opposite corners are (0,2), (1,3).
using Square = std::array<std::size_t, 4>;

std::vector<Square> induced_squares(const DefiningGraph& g);

// Gamma = A * B with A the complement component holding the earliest vertex.
std::optional<std::pair<VertexSet, VertexSet>> join_decomposition(const DefiningGraph& g);

// Earliest vertex adjacent to every other vertex. Needs at least two vertices.
std::optional<std::size_t> dominating_vertex(const DefiningGraph& g);

VertexSet square_free_vertices(const DefiningGraph& g);

// Two non-adjacent vertices, a suspension of a clique, or a clique.
bool is_elementary_racg(const DefiningGraph& g);

// Every induced square with a diametrically opposite pair inside `sub` lies in `sub`.
bool special_subgroup_is_morse(const DefiningGraph& g, VertexSet sub);

struct GraphReport {
  std::optional<std::pair<VertexSet, VertexSet>> join;
  std::optional<std::size_t> dominating_vertex;
  VertexSet square_free = 0;
  bool is_elementary = false;
  bool seed_ok = false;
  std::vector<std::string> reasons;  // why seed_ok is false; empty otherwise

  nlohmann::json to_json(const DefiningGraph& g) const;
};

GraphReport graph_report(const DefiningGraph& g);

// Small named families used by tests, examples and the CLI.
namespace graphs {
DefiningGraph path(std::size_t n);
DefiningGraph cycle(std::size_t n);
DefiningGraph complete(std::size_t n);
DefiningGraph discrete(std::size_t n);
DefiningGraph star(std::size_t leaves);
}  // namespace graphs

}  // namespace racglab
