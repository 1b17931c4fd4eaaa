#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pieceformer/graph.hpp"
#include "pieceformer/rng.hpp"

namespace pieceformer {

std::vector<std::string> default_gate_alphabet();

/// Generation parameters for one graph family.
struct GenSpec {
  int num_nodes = 200;
  std::pair<int, int> module_size_range{10, 30};
  double intra_edge_prob = 0.20;
  double inter_edge_prob = 0.02;
  int fanout_cap = 5;
  int hierarchy_levels = 3;
  std::vector<std::string> type_alphabet = default_gate_alphabet();
  uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

/// generate_base plus the module structure it used; tests and reports verify
/// modularity and hierarchy against this plan.
struct BasePlan {
  Graph graph;
  std::vector<int32_t> module_of;         // per node
  std::vector<int> module_level;          // per module, root = 1
  std::vector<int> module_parent;         // per module, -1 for root
  std::vector<int32_t> gateway_of_module; // per module
};

BasePlan generate_base_plan(const GenSpec& spec);
Graph generate_base(const GenSpec& spec);

enum class EditKind { NodeEdit, EdgeEdit, SubgraphEdit };
enum class EditDirection { Add, Delete };

const char* to_string(EditKind k);

/// One concrete edit with its sampled payload. Node references are stable
/// ids (identical to local ids on a freshly generated base).
struct EditOp {
  EditKind kind = EditKind::EdgeEdit;
  EditDirection direction = EditDirection::Delete;
  std::vector<int64_t> nodes;                        // NodeEdit/Delete targets
  std::vector<std::string> new_types;                // types of added nodes
  std::vector<int64_t> anchors;                      // attach points for adds
  std::vector<std::pair<int64_t, int64_t>> edges;    // EdgeEdit payload
  int64_t branch_root = -1;                          // SubgraphEdit
  int branch_size = 0;
};

/// Caps derived from a graph: "a limited number" per edit.
struct EditLimits {
  int node_cap = 1;   // max(1, ceil(0.5% N))
  int edge_cap = 1;   // max(1, ceil(0.5% E))
  int branch_min = 3;
  int branch_max = 10;
  int fanout_cap = 1; // max out-degree observed in the source graph

  static EditLimits for_graph(const Graph& g);
};

/// Samples a feasible edit of uniformly random kind and direction.
/// Throws EditError when the requested kind/direction cannot be applied.
EditOp sample_edit(const Graph& g, Rng& rng);
EditOp sample_edit(const Graph& g, EditKind kind, EditDirection dir,
                   const EditLimits& limits, Rng& rng);

/// Applies one edit. The rng is consumed only for payload details the op
/// leaves open (types of branch nodes). Result is a valid Graph whose
/// lineage carries updated stable ids.
Graph apply_edit(const Graph& g, const EditOp& op, Rng& rng);

/// Base graph plus derivatives carrying ground-truth edit counts.
struct GraphGroup {
  Graph base;
  std::vector<Graph> derived;  // derived[i-1] has edit_count i
  uint64_t seed = 0;

  std::vector<const Graph*> all() const;
};

/// Derives `count` graphs, the i-th by i independent random edits on a fresh
/// copy of `base`. Surviving base nodes keep their stable ids in every
/// derivative; deleted ids are never reused.
GraphGroup derive_group(const Graph& base, int count, uint64_t seed);

/// Node/edge symmetric difference in stable-id space (a test oracle for
/// edit-distance growth; also handy in reports).
int64_t symmetric_difference(const Graph& a, const Graph& b);

}  // namespace pieceformer
