#include "pieceformer/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pieceformer/error.hpp"

namespace pieceformer {

using nlohmann::json;

bool Graph::has_edge(int32_t u, int32_t v) const {
  auto row = out_neighbors(u);
  return std::binary_search(row.begin(), row.end(), v);
}

namespace {

void build_csr(int32_t n, const std::vector<std::pair<int32_t, int32_t>>& edges,
               std::vector<int64_t>& offsets, std::vector<int32_t>& targets) {
  offsets.assign(n + 1, 0);
  for (const auto& [u, v] : edges) offsets[u + 1]++;
  for (int32_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  targets.resize(edges.size());
  std::vector<int64_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [u, v] : edges) targets[cursor[u]++] = v;
  for (int32_t i = 0; i < n; ++i)
    std::sort(targets.begin() + offsets[i], targets.begin() + offsets[i + 1]);
}

}  // namespace

void finalize_graph(Graph& g) {
  const int32_t n = g.num_nodes;
  std::vector<std::pair<int32_t, int32_t>> rev;
  rev.reserve(g.targets.size());
  for (int32_t u = 0; u < n; ++u)
    for (int32_t v : g.out_neighbors(u)) rev.emplace_back(v, u);
  build_csr(n, rev, g.in_offsets, g.in_targets);

  // Symmetrized simple adjacency: u~v when u->v or v->u, each neighbor once.
  std::vector<std::pair<int32_t, int32_t>> und;
  und.reserve(2 * g.targets.size());
  for (int32_t u = 0; u < n; ++u)
    for (int32_t v : g.out_neighbors(u)) {
      und.emplace_back(u, v);
      und.emplace_back(v, u);
    }
  std::sort(und.begin(), und.end());
  und.erase(std::unique(und.begin(), und.end()), und.end());
  build_csr(n, und, g.und_offsets, g.und_targets);
}

Graph build_graph(const std::vector<std::pair<int32_t, int32_t>>& edges,
                  int32_t num_nodes, std::vector<std::string> node_types,
                  std::string id, BuildStats* stats) {
  if (num_nodes < 0) throw StructuralError("build_graph: negative num_nodes");
  if (!node_types.empty() &&
      static_cast<int32_t>(node_types.size()) != num_nodes)
    throw StructuralError("build_graph: node_types size " +
                          std::to_string(node_types.size()) +
                          " != num_nodes " + std::to_string(num_nodes));
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
      throw StructuralError("build_graph: edge (" + std::to_string(u) + "," +
                            std::to_string(v) + ") endpoint out of range [0," +
                            std::to_string(num_nodes) + ")");
  }

  std::vector<std::pair<int32_t, int32_t>> clean;
  clean.reserve(edges.size());
  int64_t self_loops = 0;
  for (const auto& e : edges) {
    if (e.first == e.second) {
      ++self_loops;
      continue;
    }
    clean.push_back(e);
  }
  std::sort(clean.begin(), clean.end());
  const size_t before = clean.size();
  clean.erase(std::unique(clean.begin(), clean.end()), clean.end());
  if (stats) {
    stats->dropped_self_loops = self_loops;
    stats->dropped_duplicates = static_cast<int64_t>(before - clean.size());
  }

  Graph g;
  g.id = std::move(id);
  g.num_nodes = num_nodes;
  if (node_types.empty())
    g.node_types.assign(num_nodes, "n");
  else
    g.node_types = std::move(node_types);
  build_csr(num_nodes, clean, g.offsets, g.targets);
  finalize_graph(g);
  return g;
}

std::pair<Graph, NodeMap> extract_subgraph(const Graph& g,
                                           const std::vector<int32_t>& nodes) {
  if (nodes.empty())
    throw StructuralError("extract_subgraph: empty node set");
  std::vector<int32_t> sorted(nodes);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.front() < 0 || sorted.back() >= g.num_nodes)
    throw StructuralError("extract_subgraph: node id out of range");

  std::vector<int32_t> local_of(g.num_nodes, -1);
  for (size_t i = 0; i < sorted.size(); ++i) local_of[sorted[i]] = static_cast<int32_t>(i);

  std::vector<std::pair<int32_t, int32_t>> edges;
  std::vector<std::string> types;
  types.reserve(sorted.size());
  for (int32_t p : sorted) types.push_back(g.node_types[p]);
  for (int32_t p : sorted)
    for (int32_t t : g.out_neighbors(p))
      if (local_of[t] >= 0) edges.emplace_back(local_of[p], local_of[t]);

  Graph sub = build_graph(edges, static_cast<int32_t>(sorted.size()),
                          std::move(types), g.id + "/sub");
  if (g.lineage) {
    Lineage lin;
    lin.group_id = g.lineage->group_id;
    lin.edit_count = g.lineage->edit_count;
    lin.node_ids.reserve(sorted.size());
    for (int32_t p : sorted) lin.node_ids.push_back(g.lineage->stable_id(p));
    sub.lineage = std::move(lin);
  }
  return {std::move(sub), NodeMap{std::move(sorted)}};
}

namespace {

Graph graph_from_json(const json& j, const std::string& path) {
  auto field = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end())
      throw ParseError(path + ": missing field \"" + name + "\"");
    return *it;
  };
  try {
    Graph g;
    g.id = field("id").get<std::string>();
    const int64_t n = field("num_nodes").get<int64_t>();
    if (n < 0 || n > INT32_MAX)
      throw ParseError(path + ": num_nodes out of range");
    std::vector<std::pair<int32_t, int32_t>> edges;
    for (const auto& e : field("edges")) {
      if (!e.is_array() || e.size() != 2)
        throw ParseError(path + ": edge entry is not a pair");
      const int64_t u = e[0].get<int64_t>();
      const int64_t v = e[1].get<int64_t>();
      if (u < 0 || u >= n || v < 0 || v >= n)
        throw ParseError(path + ": edge (" + std::to_string(u) + "," +
                         std::to_string(v) + ") target out of range for " +
                         std::to_string(n) + " nodes");
      edges.emplace_back(static_cast<int32_t>(u), static_cast<int32_t>(v));
    }
    std::vector<std::string> types =
        field("node_types").get<std::vector<std::string>>();
    if (static_cast<int64_t>(types.size()) != n)
      throw ParseError(path + ": node_types length " +
                       std::to_string(types.size()) + " != num_nodes " +
                       std::to_string(n));
    g = build_graph(edges, static_cast<int32_t>(n), std::move(types), g.id);
    g.id = field("id").get<std::string>();
    const json& lin = field("lineage");
    if (!lin.is_null()) {
      Lineage l;
      l.group_id = lin.at("group_id").get<std::string>();
      l.edit_count = lin.at("edit_count").get<int>();
      if (lin.contains("node_ids")) {
        l.node_ids = lin.at("node_ids").get<std::vector<int64_t>>();
        if (static_cast<int64_t>(l.node_ids.size()) != n)
          throw ParseError(path + ": lineage.node_ids length mismatch");
      }
      g.lineage = std::move(l);
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

Graph graph_from_edge_list(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int64_t n = -1, m = -1;
  std::vector<std::pair<int32_t, int32_t>> edges;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    if (n < 0) {
      if (!(ls >> n >> m) || n < 0 || m < 0)
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": expected header \"N M\"");
      continue;
    }
    int64_t u, v;
    if (!(ls >> u)) continue;  // blank line
    if (!(ls >> v))
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected \"u v\"");
    if (u < 0 || u >= n || v < 0 || v >= n)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": endpoint out of range");
    edges.emplace_back(static_cast<int32_t>(u), static_cast<int32_t>(v));
  }
  if (n < 0) throw ParseError(path + ": empty edge-list file");
  if (static_cast<int64_t>(edges.size()) != m)
    throw ParseError(path + ": header claims " + std::to_string(m) +
                     " edges, found " + std::to_string(edges.size()));
  return build_graph(edges, static_cast<int32_t>(n), {}, path);
}

}  // namespace

void save_graph(const Graph& g, const std::string& path) {
  json j;
  j["id"] = g.id;
  j["num_nodes"] = g.num_nodes;
  json edges = json::array();
  for (int32_t u = 0; u < g.num_nodes; ++u)
    for (int32_t v : g.out_neighbors(u)) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["node_types"] = g.node_types;
  if (g.lineage) {
    json lin;
    lin["group_id"] = g.lineage->group_id;
    lin["edit_count"] = g.lineage->edit_count;
    if (!g.lineage->node_ids.empty()) lin["node_ids"] = g.lineage->node_ids;
    j["lineage"] = std::move(lin);
  } else {
    j["lineage"] = nullptr;
  }
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << j.dump(1) << "\n";
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  const size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ParseError(path + ": empty file");
  if (text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
    return graph_from_json(j, path);
  }
  return graph_from_edge_list(text, path);
}

std::vector<double> node_feature_matrix(
    const Graph& g, const std::vector<std::string>& alphabet) {
  const int f = feature_width(alphabet);
  std::vector<double> feat(static_cast<size_t>(g.num_nodes) * f, 0.0);
  for (int32_t v = 0; v < g.num_nodes; ++v) {
    auto it = std::find(alphabet.begin(), alphabet.end(), g.node_types[v]);
    if (it == alphabet.end())
      throw ConfigError("node type \"" + g.node_types[v] +
                        "\" not in model alphabet");
    double* row = feat.data() + static_cast<size_t>(v) * f;
    row[it - alphabet.begin()] = 1.0;
    row[f - 2] = std::log1p(static_cast<double>(g.out_degree(v)));
    row[f - 1] = std::log1p(static_cast<double>(g.in_degree(v)));
  }
  return feat;
}

std::vector<std::string> collect_type_alphabet(
    const std::vector<const Graph*>& graphs) {
  std::set<std::string> types;
  for (const Graph* g : graphs)
    types.insert(g->node_types.begin(), g->node_types.end());
  return {types.begin(), types.end()};
}

}  // namespace pieceformer
