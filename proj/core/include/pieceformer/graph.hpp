#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pieceformer {

/// Provenance of a graph inside a generated group. `node_ids` maps each local
/// node to a stable id shared across the whole group (empty means identity);
/// edits never reuse a stable id, which is what lets a partition computed on
/// one group member be transferred onto another.
struct Lineage {
  std::string group_id;
  int edit_count = 0;
  std::vector<int64_t> node_ids;

  int64_t stable_id(int32_t local) const {
    return node_ids.empty() ? local : node_ids[local];
  }

  bool operator==(const Lineage&) const = default;
};

/// Directed simple graph in CSR form. Node ids are contiguous [0, num_nodes).
/// Immutable after construction; in/undirected adjacency views are built once
/// so values can be shared freely across threads.
struct Graph {
  std::string id;
  int32_t num_nodes = 0;
  std::vector<int64_t> offsets;   // out-CSR, size num_nodes + 1
  std::vector<int32_t> targets;   // sorted within each row
  std::vector<std::string> node_types;
  std::optional<Lineage> lineage;

  // Derived views, filled by build_graph/finalize. Not part of equality.
  std::vector<int64_t> in_offsets;
  std::vector<int32_t> in_targets;
  std::vector<int64_t> und_offsets;  // symmetrized simple adjacency
  std::vector<int32_t> und_targets;

  int64_t num_edges() const { return static_cast<int64_t>(targets.size()); }

  std::span<const int32_t> out_neighbors(int32_t v) const {
    return {targets.data() + offsets[v],
            static_cast<size_t>(offsets[v + 1] - offsets[v])};
  }
  std::span<const int32_t> in_neighbors(int32_t v) const {
    return {in_targets.data() + in_offsets[v],
            static_cast<size_t>(in_offsets[v + 1] - in_offsets[v])};
  }
  std::span<const int32_t> und_neighbors(int32_t v) const {
    return {und_targets.data() + und_offsets[v],
            static_cast<size_t>(und_offsets[v + 1] - und_offsets[v])};
  }

  int32_t out_degree(int32_t v) const {
    return static_cast<int32_t>(offsets[v + 1] - offsets[v]);
  }
  int32_t in_degree(int32_t v) const {
    return static_cast<int32_t>(in_offsets[v + 1] - in_offsets[v]);
  }

  bool has_edge(int32_t u, int32_t v) const;

  bool operator==(const Graph& o) const {
    return id == o.id && num_nodes == o.num_nodes && offsets == o.offsets &&
           targets == o.targets && node_types == o.node_types &&
           lineage == o.lineage;
  }
};

/// Local id -> parent id for an extracted subgraph, ascending in parent id.
struct NodeMap {
  std::vector<int32_t> parent;

  int32_t to_parent(int32_t local) const { return parent[local]; }
  size_t size() const { return parent.size(); }
};

struct BuildStats {
  int64_t dropped_duplicates = 0;
  int64_t dropped_self_loops = 0;
};

/// Builds a Graph from an edge list. Duplicate edges and self-loops are
/// dropped (counted in `stats` when given). Throws StructuralError on
/// endpoints outside [0, num_nodes) or when node_types size mismatches.
Graph build_graph(const std::vector<std::pair<int32_t, int32_t>>& edges,
                  int32_t num_nodes, std::vector<std::string> node_types,
                  std::string id = "", BuildStats* stats = nullptr);

/// Recomputes the derived adjacency views after direct field edits.
void finalize_graph(Graph& g);

/// Induced subgraph on `nodes` (deduplicated, ascending). Edges with exactly
/// one endpoint inside are dropped. Throws StructuralError on an empty set or
/// out-of-range ids.
std::pair<Graph, NodeMap> extract_subgraph(const Graph& g,
                                           const std::vector<int32_t>& nodes);

/// JSON round trip: {"id", "num_nodes", "edges", "node_types", "lineage"}.
/// load_graph also accepts whitespace-separated edge-list text with a header
/// line "N M" (node types default to one class).
void save_graph(const Graph& g, const std::string& path);
Graph load_graph(const std::string& path);

/// Structure-only learning features: one-hot(node_type) + log1p(out_degree)
/// + log1p(in_degree), one row per node. The alphabet must cover every type
/// present in the graph.
std::vector<double> node_feature_matrix(
    const Graph& g, const std::vector<std::string>& alphabet);

inline int feature_width(const std::vector<std::string>& alphabet) {
  return static_cast<int>(alphabet.size()) + 2;
}

/// Sorted unique node types over a set of graphs.
std::vector<std::string> collect_type_alphabet(
    const std::vector<const Graph*>& graphs);

}  // namespace pieceformer
