#include "racglab/graph.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "racglab/errors.hpp"

namespace racglab {

namespace {

bool contains(VertexSet set, std::size_t v) { return (set >> v) & 1U; }

}  // namespace

DefiningGraph::DefiningGraph(std::vector<std::string> vertices,
                             const std::vector<std::pair<std::string, std::string>>& edges)
    : labels_(std::move(vertices)), adj_(labels_.size(), 0) {
  if (labels_.empty()) throw ValidationError("graph has no vertices");
  if (labels_.size() > kMaxVertices)
    throw ValidationError("graph has more than 64 vertices");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw ValidationError("empty vertex label");
    if (labels_[i].find('.') != std::string::npos)
      throw ValidationError("vertex label '" + labels_[i] + "' contains '.'");
    for (std::size_t j = 0; j < i; ++j)
      if (labels_[i] == labels_[j])
        throw ValidationError("duplicate vertex label '" + labels_[i] + "'");
  }
  for (const auto& [u, v] : edges) {
    auto iu = index_of(u);
    auto iv = index_of(v);
    if (!iu) throw ValidationError("edge endpoint '" + u + "' not declared");
    if (!iv) throw ValidationError("edge endpoint '" + v + "' not declared");
    if (*iu == *iv) throw ValidationError("loop edge at '" + u + "'");
    if (adjacent(*iu, *iv))
      throw ValidationError("multi-edge between '" + u + "' and '" + v + "'");
    adj_[*iu] |= vertex_bit(*iv);
    adj_[*iv] |= vertex_bit(*iu);
  }
}

std::optional<std::size_t> DefiningGraph::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] == label) return i;
  return std::nullopt;
}

VertexSet DefiningGraph::all() const {
  return size() == 64 ? ~VertexSet{0} : vertex_bit(size()) - 1;
}

std::vector<std::pair<std::size_t, std::size_t>> DefiningGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t u = 0; u < size(); ++u)
    for (std::size_t v = u + 1; v < size(); ++v)
      if (adjacent(u, v)) out.emplace_back(u, v);
  return out;
}

nlohmann::json DefiningGraph::to_json() const {
  nlohmann::json edges_json = nlohmann::json::array();
  for (auto [u, v] : edges()) edges_json.push_back({labels_[u], labels_[v]});
  return {{"vertices", labels_}, {"edges", edges_json}};
}

std::vector<std::string> DefiningGraph::labels_of(VertexSet set) const {
  std::vector<std::string> out;
  for (std::size_t v = 0; v < size(); ++v)
    if (contains(set, v)) out.push_back(labels_[v]);
  return out;
}

VertexSet DefiningGraph::set_of(const std::vector<std::string>& labels) const {
  VertexSet set = 0;
  for (const auto& l : labels) {
    auto i = index_of(l);
    if (!i) throw ValidationError("unknown vertex '" + l + "'");
    set |= vertex_bit(*i);
  }
  return set;
}

DefiningGraph parse_graph(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed graph JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("vertices") || !doc["vertices"].is_array())
    throw ValidationError("graph JSON needs a \"vertices\" array");
  std::vector<std::string> vertices;
  for (const auto& v : doc["vertices"]) {
    if (!v.is_string()) throw ValidationError("vertex labels must be strings");
    vertices.push_back(v.get<std::string>());
  }
  std::vector<std::pair<std::string, std::string>> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw ValidationError("\"edges\" must be an array");
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
        throw ValidationError("each edge must be a pair of vertex labels");
      edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  }
  return DefiningGraph(std::move(vertices), edges);
}

DefiningGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("file not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

std::vector<Square> induced_squares(const DefiningGraph& g) {
  // Each induced square is reported once, starting at its earliest vertex and
  // continuing to its smaller neighbour on the cycle.
  std::vector<Square> out;
  const std::size_t n = g.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t c = a + 1; c < n; ++c) {
      if (g.adjacent(a, c)) continue;
      VertexSet common = g.neighbours(a) & g.neighbours(c);
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!contains(common, b)) continue;
        for (std::size_t d = b + 1; d < n; ++d) {
          if (!contains(common, d) || g.adjacent(b, d)) continue;
          out.push_back({a, b, c, d});
        }
      }
    }
  return out;
}

std::optional<std::pair<VertexSet, VertexSet>> join_decomposition(const DefiningGraph& g) {
  const VertexSet all = g.all();
  // Component of vertex 0 in the complement graph.
  VertexSet seen = vertex_bit(0);
  VertexSet frontier = seen;
  while (frontier) {
    VertexSet next = 0;
    for (std::size_t v = 0; v < g.size(); ++v)
      if (contains(frontier, v)) next |= all & ~g.neighbours(v) & ~vertex_bit(v);
    frontier = next & ~seen;
    seen |= next;
  }
  if (seen == all) return std::nullopt;
  return std::make_pair(seen, all & ~seen);
}

std::optional<std::size_t> dominating_vertex(const DefiningGraph& g) {
  if (g.size() < 2) return std::nullopt;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (g.star(v) == g.all()) return v;
  return std::nullopt;
}

VertexSet square_free_vertices(const DefiningGraph& g) {
  VertexSet in_square = 0;
  for (const auto& sq : induced_squares(g))
    for (auto v : sq) in_square |= vertex_bit(v);
  return g.all() & ~in_square;
}

bool is_elementary_racg(const DefiningGraph& g) {
  const std::size_t n = g.size();
  auto is_clique = [&](VertexSet set) {
    for (std::size_t v = 0; v < n; ++v)
      if (contains(set, v) && (g.star(v) & set) != set) return false;
    return true;
  };
  if (is_clique(g.all())) return true;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t w = u + 1; w < n; ++w) {
      if (g.adjacent(u, w)) continue;
      VertexSet rest = g.all() & ~vertex_bit(u) & ~vertex_bit(w);
      if ((g.neighbours(u) & rest) == rest && (g.neighbours(w) & rest) == rest &&
          is_clique(rest))
        return true;
    }
  return false;
}

bool special_subgroup_is_morse(const DefiningGraph& g, VertexSet sub) {
  VertexSet square_set;
  for (const auto& sq : induced_squares(g)) {
    square_set = 0;
    for (auto v : sq) square_set |= vertex_bit(v);
    bool opposite_inside = (contains(sub, sq[0]) && contains(sub, sq[2])) ||
                           (contains(sub, sq[1]) && contains(sub, sq[3]));
    if (opposite_inside && (square_set & sub) != square_set) return false;
  }
  return true;
}

GraphReport graph_report(const DefiningGraph& g) {
  GraphReport r;
  r.join = join_decomposition(g);
  r.dominating_vertex = dominating_vertex(g);
  r.square_free = square_free_vertices(g);
  r.is_elementary = is_elementary_racg(g);
  if (g.size() < 3) r.reasons.emplace_back("fewer than 3 vertices");
  if (r.join) r.reasons.emplace_back("graph is a join");
  if (r.square_free == 0) r.reasons.emplace_back("every vertex lies in an induced square");
  if (r.is_elementary) r.reasons.emplace_back("group is elementary");
  r.seed_ok = r.reasons.empty();
  return r;
}

nlohmann::json GraphReport::to_json(const DefiningGraph& g) const {
  nlohmann::json j;
  j["is_join"] = join ? nlohmann::json{{"A", g.labels_of(join->first)},
                                       {"B", g.labels_of(join->second)}}
                      : nlohmann::json(nullptr);
  j["dominating_vertex"] =
      dominating_vertex ? nlohmann::json(g.label(*dominating_vertex)) : nlohmann::json(nullptr);
  j["square_free_vertices"] = g.labels_of(square_free);
  j["is_elementary"] = is_elementary;
  j["seed_ok"] = seed_ok;
  j["reasons"] = reasons;
  return j;
}

namespace graphs {

namespace {

std::vector<std::string> letters(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < 26)
      out.emplace_back(1, static_cast<char>('a' + i));
    else
      out.push_back("v" + std::to_string(i));
  }
  return out;
}

DefiningGraph from_pairs(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& e) {
  auto names = letters(n);
  std::vector<std::pair<std::string, std::string>> edges;
  for (auto [u, v] : e) edges.emplace_back(names[u], names[v]);
  return DefiningGraph(names, edges);
}

}  // namespace

DefiningGraph path(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return from_pairs(n, e);
}

DefiningGraph cycle(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return from_pairs(n, e);
}

DefiningGraph complete(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return from_pairs(n, e);
}

DefiningGraph discrete(std::size_t n) { return from_pairs(n, {}); }

DefiningGraph star(std::size_t leaves) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return from_pairs(leaves + 1, e);
}

}  // namespace graphs

}  // namespace racglab
