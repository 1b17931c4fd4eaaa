#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pieceformer/graph.hpp"

namespace pieceformer {

/// Node -> block assignment with maintained cut statistics.
struct Partition {
  std::vector<int32_t> assignment;
  int32_t num_blocks = 1;
  double balance_tol = 0.1;
  int64_t cut = 0;

  std::vector<int64_t> block_sizes() const;
  /// Throws PartitionError when any invariant fails (unassigned node, empty
  /// block, stale cut, balance above (1+tol)*ceil(N/k)).
  void validate(const Graph& g) const;
};

/// Undirected weighted view used by the multilevel machinery.
struct WGraph {
  int32_t n = 0;
  std::vector<int64_t> xadj;   // size n + 1
  std::vector<int32_t> adj;    // symmetric: each edge appears in both rows
  std::vector<int64_t> ew;     // parallel to adj
  std::vector<int64_t> nw;     // node weights

  int64_t total_weight() const;
};

WGraph undirected_unit_wgraph(const Graph& g);

/// One coarsening step: heavy-edge matching, ties to the lowest neighbor id.
struct CoarseLevel {
  WGraph coarse;
  std::vector<int32_t> fine_to_coarse;
};

CoarseLevel coarsen(const WGraph& g);

/// Cut of an assignment under the undirected simple view of g.
int64_t cut_of(const Graph& g, const std::vector<int32_t>& assignment);

/// Multilevel recursive bisection into k = max(1, ceil(N / target_block_size))
/// blocks. Deterministic under seed.
Partition partition_kway(const Graph& g, int target_block_size,
                         double balance_tol = 0.1, uint64_t seed = 0);

/// Induced subgraph per block, ordered by block id.
std::vector<std::pair<Graph, NodeMap>> blocks(const Partition& p,
                                              const Graph& g);

}  // namespace pieceformer
