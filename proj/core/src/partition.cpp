#include "pieceformer/partition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pieceformer/error.hpp"
#include "pieceformer/rng.hpp"

namespace pieceformer {

std::vector<int64_t> Partition::block_sizes() const {
  std::vector<int64_t> sizes(num_blocks, 0);
  for (int32_t b : assignment) sizes[b]++;
  return sizes;
}

void Partition::validate(const Graph& g) const {
  if (static_cast<int32_t>(assignment.size()) != g.num_nodes)
    throw PartitionError("partition: assignment size mismatch");
  for (int32_t b : assignment)
    if (b < 0 || b >= num_blocks)
      throw PartitionError("partition: block id out of range");
  const auto sizes = block_sizes();
  for (int32_t b = 0; b < num_blocks; ++b)
    if (sizes[b] == 0)
      throw PartitionError("partition: empty block " + std::to_string(b));
  if (cut_of(g, assignment) != cut)
    throw PartitionError("partition: stored cut disagrees with recount");
  const int64_t ideal = (g.num_nodes + num_blocks - 1) / num_blocks;
  const int64_t cap =
      static_cast<int64_t>(std::floor((1.0 + balance_tol) * ideal));
  for (int32_t b = 0; b < num_blocks; ++b)
    if (sizes[b] > cap)
      throw PartitionError("partition: block " + std::to_string(b) +
                           " size " + std::to_string(sizes[b]) +
                           " exceeds cap " + std::to_string(cap));
}

int64_t WGraph::total_weight() const {
  return std::accumulate(nw.begin(), nw.end(), int64_t{0});
}

WGraph undirected_unit_wgraph(const Graph& g) {
  WGraph w;
  w.n = g.num_nodes;
  w.xadj.assign(g.und_offsets.begin(), g.und_offsets.end());
  w.adj.assign(g.und_targets.begin(), g.und_targets.end());
  w.ew.assign(w.adj.size(), 1);
  w.nw.assign(w.n, 1);
  return w;
}

int64_t cut_of(const Graph& g, const std::vector<int32_t>& assignment) {
  int64_t cut = 0;
  for (int32_t u = 0; u < g.num_nodes; ++u)
    for (int32_t v : g.und_neighbors(u))
      if (u < v && assignment[u] != assignment[v]) ++cut;
  return cut;
}

CoarseLevel coarsen(const WGraph& g) {
  std::vector<int32_t> match(g.n, -1);
  for (int32_t u = 0; u < g.n; ++u) {
    if (match[u] >= 0) continue;
    int32_t best = -1;
    int64_t best_w = 0;
    for (int64_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
      const int32_t v = g.adj[e];
      if (v == u || match[v] >= 0) continue;
      if (g.ew[e] > best_w || (g.ew[e] == best_w && (best < 0 || v < best))) {
        best = v;
        best_w = g.ew[e];
      }
    }
    if (best >= 0) {
      match[u] = best;
      match[best] = u;
    }
  }

  CoarseLevel level;
  level.fine_to_coarse.assign(g.n, -1);
  int32_t next = 0;
  for (int32_t u = 0; u < g.n; ++u) {
    if (level.fine_to_coarse[u] >= 0) continue;
    level.fine_to_coarse[u] = next;
    if (match[u] >= 0) level.fine_to_coarse[match[u]] = next;
    ++next;
  }

  WGraph& c = level.coarse;
  c.n = next;
  c.nw.assign(next, 0);
  for (int32_t u = 0; u < g.n; ++u) c.nw[level.fine_to_coarse[u]] += g.nw[u];

  std::map<std::pair<int32_t, int32_t>, int64_t> acc;
  for (int32_t u = 0; u < g.n; ++u) {
    const int32_t cu = level.fine_to_coarse[u];
    for (int64_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e) {
      const int32_t cv = level.fine_to_coarse[g.adj[e]];
      if (cu != cv) acc[{cu, cv}] += g.ew[e];
    }
  }
  c.xadj.assign(next + 1, 0);
  for (const auto& [key, w] : acc) c.xadj[key.first + 1]++;
  for (int32_t i = 0; i < next; ++i) c.xadj[i + 1] += c.xadj[i];
  c.adj.resize(acc.size());
  c.ew.resize(acc.size());
  std::vector<int64_t> cursor(c.xadj.begin(), c.xadj.end() - 1);
  for (const auto& [key, w] : acc) {
    c.adj[cursor[key.first]] = key.second;
    c.ew[cursor[key.first]] = w;
    cursor[key.first]++;
  }
  return level;
}

namespace {

constexpr int32_t kCoarsenThreshold = 48;

int64_t side_cut(const WGraph& g, const std::vector<uint8_t>& side) {
  int64_t cut = 0;
  for (int32_t u = 0; u < g.n; ++u)
    for (int64_t e = g.xadj[u]; e < g.xadj[u + 1]; ++e)
      if (u < g.adj[e] && side[u] != side[g.adj[e]]) cut += g.ew[e];
  return cut;
}

/// One FM pass: tentative single-node moves with locking, commit the best
/// positive-gain prefix. Returns the committed gain (0 when no improvement).
/// `cut` is maintained incrementally.
int64_t fm_pass(const WGraph& g, std::vector<uint8_t>& side, int64_t cap0,
                int64_t cap1, int64_t& cut) {
  std::vector<int64_t> gain(g.n, 0);
  std::vector<uint8_t> locked(g.n, 0);
  int64_t w[2] = {0, 0};
  for (int32_t v = 0; v < g.n; ++v) w[side[v]] += g.nw[v];
  for (int32_t v = 0; v < g.n; ++v)
    for (int64_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e)
      gain[v] += (side[v] != side[g.adj[e]]) ? g.ew[e] : -g.ew[e];

  const int64_t cap[2] = {cap0, cap1};
  std::vector<int32_t> moves;
  moves.reserve(g.n);
  int64_t cum = 0, best_cum = 0;
  size_t best_prefix = 0;

  for (int32_t step = 0; step < g.n; ++step) {
    int32_t pick = -1;
    for (int32_t v = 0; v < g.n; ++v) {
      if (locked[v]) continue;
      const int dest = 1 - side[v];
      if (w[dest] + g.nw[v] > cap[dest]) continue;
      if (pick < 0 || gain[v] > gain[pick]) pick = v;
    }
    if (pick < 0) break;
    const int from = side[pick];
    w[from] -= g.nw[pick];
    w[1 - from] += g.nw[pick];
    side[pick] = static_cast<uint8_t>(1 - from);
    locked[pick] = 1;
    cum += gain[pick];
    moves.push_back(pick);
    for (int64_t e = g.xadj[pick]; e < g.xadj[pick + 1]; ++e) {
      const int32_t u = g.adj[e];
      if (locked[u]) continue;
      gain[u] += (side[u] == side[pick]) ? -2 * g.ew[e] : 2 * g.ew[e];
    }
    if (cum > best_cum) {
      best_cum = cum;
      best_prefix = moves.size();
    }
  }

  for (size_t i = moves.size(); i > best_prefix; --i) {
    const int32_t v = moves[i - 1];
    const int from = side[v];
    w[from] -= g.nw[v];
    w[1 - from] += g.nw[v];
    side[v] = static_cast<uint8_t>(1 - from);
  }
  cut -= best_cum;
  return best_cum;
}

/// Grows side 0 from `start` by BFS until its weight reaches target0,
/// skipping nodes that would push past cap0. Unreached components are
/// drained in ascending id order if the floor is not met.
std::vector<uint8_t> bfs_grow(const WGraph& g, int32_t start, int64_t target0,
                              int64_t cap0, int64_t cap1) {
  std::vector<uint8_t> side(g.n, 1);
  std::vector<uint8_t> seen(g.n, 0);
  std::vector<int32_t> queue;
  queue.push_back(start);
  seen[start] = 1;
  int64_t w0 = 0;
  const int64_t total = g.total_weight();
  const int64_t floor0 = std::max<int64_t>(0, total - cap1);
  size_t qi = 0;
  int32_t scan = 0;
  while (w0 < target0) {
    if (qi >= queue.size()) {
      // disconnected remainder: restart from the lowest unseen node
      while (scan < g.n && seen[scan]) ++scan;
      if (scan >= g.n) break;
      seen[scan] = 1;
      queue.push_back(scan);
    }
    const int32_t v = queue[qi++];
    if (w0 + g.nw[v] <= cap0) {
      side[v] = 0;
      w0 += g.nw[v];
    }
    for (int64_t e = g.xadj[v]; e < g.xadj[v + 1]; ++e)
      if (!seen[g.adj[e]]) {
        seen[g.adj[e]] = 1;
        queue.push_back(g.adj[e]);
      }
  }
  // Feasibility floor: side 1 must not exceed cap1.
  for (int32_t v = 0; v < g.n && w0 < floor0; ++v)
    if (side[v] == 1 && w0 + g.nw[v] <= cap0) {
      side[v] = 0;
      w0 += g.nw[v];
    }
  return side;
}

std::vector<uint8_t> bisect_wgraph(const WGraph& g, int64_t target0,
                                   int64_t cap0, int64_t cap1, uint64_t seed,
                                   bool at_top) {
  if (g.n > kCoarsenThreshold) {
    CoarseLevel level = coarsen(g);
    if (level.coarse.n < g.n) {
      std::vector<uint8_t> coarse_side = bisect_wgraph(
          level.coarse, target0, cap0, cap1, Rng::mix(seed, 0x5eed), false);
      std::vector<uint8_t> side(g.n);
      for (int32_t v = 0; v < g.n; ++v)
        side[v] = coarse_side[level.fine_to_coarse[v]];
      int64_t cut = side_cut(g, side);
      fm_pass(g, side, cap0, cap1, cut);  // one unlocked-move pass per level
      return side;
    }
  }

  // Coarsest level: greedy BFS initial bisection from a few deterministic
  // starts, refined to convergence; keep the best.
  Rng rng(seed);
  std::vector<int32_t> starts{0};
  int32_t max_deg = 0, max_w = 0;
  for (int32_t v = 1; v < g.n; ++v) {
    if (g.xadj[v + 1] - g.xadj[v] > g.xadj[max_deg + 1] - g.xadj[max_deg])
      max_deg = v;
    if (g.nw[v] > g.nw[max_w]) max_w = v;
  }
  starts.push_back(max_deg);
  starts.push_back(max_w);
  starts.push_back(static_cast<int32_t>(rng.below(g.n)));
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  std::vector<uint8_t> best;
  int64_t best_cut = -1, best_dist = 0;
  for (int32_t s : starts) {
    std::vector<uint8_t> side = bfs_grow(g, s, target0, cap0, cap1);
    int64_t cut = side_cut(g, side);
    for (int pass = 0; pass < 8; ++pass)
      if (fm_pass(g, side, cap0, cap1, cut) <= 0) break;
    int64_t w0 = 0;
    for (int32_t v = 0; v < g.n; ++v)
      if (side[v] == 0) w0 += g.nw[v];
    const int64_t dist = std::llabs(w0 - target0);
    if (best_cut < 0 || cut < best_cut ||
        (cut == best_cut && dist < best_dist)) {
      best = std::move(side);
      best_cut = cut;
      best_dist = dist;
    }
  }
  (void)at_top;
  return best;
}

struct Splitter {
  const Graph& g;
  std::vector<int32_t>& assignment;
  int64_t block_cap;
  double per_level_slack;
  uint64_t seed;

  void solve(const std::vector<int32_t>& nodes, int32_t k, int32_t base) {
    if (k == 1) {
      for (int32_t v : nodes) assignment[v] = base;
      return;
    }
    const int32_t k_left = k / 2;
    const int32_t k_right = k - k_left;
    const int64_t total = static_cast<int64_t>(nodes.size());

    // Induced undirected view with local ids.
    std::vector<int32_t> local(g.num_nodes, -1);
    for (size_t i = 0; i < nodes.size(); ++i)
      local[nodes[i]] = static_cast<int32_t>(i);
    WGraph w;
    w.n = static_cast<int32_t>(nodes.size());
    w.nw.assign(w.n, 1);
    w.xadj.assign(w.n + 1, 0);
    for (size_t i = 0; i < nodes.size(); ++i)
      for (int32_t t : g.und_neighbors(nodes[i]))
        if (local[t] >= 0) w.xadj[i + 1]++;
    for (int32_t i = 0; i < w.n; ++i) w.xadj[i + 1] += w.xadj[i];
    w.adj.resize(w.xadj[w.n]);
    w.ew.assign(w.xadj[w.n], 1);
    std::vector<int64_t> cursor(w.xadj.begin(), w.xadj.end() - 1);
    for (size_t i = 0; i < nodes.size(); ++i)
      for (int32_t t : g.und_neighbors(nodes[i]))
        if (local[t] >= 0) w.adj[cursor[i]++] = local[t];

    const double t0 = static_cast<double>(total) * k_left / k;
    int64_t cap0 = std::min<int64_t>(
        {std::max<int64_t>(static_cast<int64_t>((1.0 + per_level_slack) * t0),
                           static_cast<int64_t>(std::ceil(t0))),
         static_cast<int64_t>(k_left) * block_cap, total - k_right});
    int64_t cap1 = std::min<int64_t>(
        {std::max<int64_t>(
             static_cast<int64_t>((1.0 + per_level_slack) * (total - t0)),
             static_cast<int64_t>(std::ceil(total - t0))),
         static_cast<int64_t>(k_right) * block_cap, total - k_left});
    while (cap0 + cap1 < total) {
      if (cap0 < static_cast<int64_t>(k_left) * block_cap)
        ++cap0;
      else
        ++cap1;
    }

    const std::vector<uint8_t> side =
        bisect_wgraph(w, static_cast<int64_t>(std::llround(t0)), cap0, cap1,
                      Rng::mix(seed, static_cast<uint64_t>(base) * 131 + k),
                      false);
    std::vector<int32_t> left, right;
    left.reserve(nodes.size());
    right.reserve(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i)
      (side[i] == 0 ? left : right).push_back(nodes[i]);
    solve(left, k_left, base);
    solve(right, k_right, base + k_left);
  }
};

}  // namespace

Partition partition_kway(const Graph& g, int target_block_size,
                         double balance_tol, uint64_t seed) {
  if (target_block_size < 2)
    throw PartitionError("partition_kway: target_block_size must be >= 2");
  if (g.num_nodes < 1)
    throw PartitionError("partition_kway: empty graph");
  const int32_t k = std::max<int32_t>(
      1, static_cast<int32_t>((g.num_nodes + target_block_size - 1) /
                              target_block_size));
  if (k > g.num_nodes)
    throw PartitionError("partition_kway: balance infeasible, k > N");

  Partition p;
  p.num_blocks = k;
  p.balance_tol = balance_tol;
  p.assignment.assign(g.num_nodes, 0);
  if (k > 1) {
    const int64_t ideal = (g.num_nodes + k - 1) / k;
    const int64_t cap =
        static_cast<int64_t>(std::floor((1.0 + balance_tol) * ideal));
    const int levels = static_cast<int>(std::ceil(std::log2(k)));
    const double slack =
        std::pow(1.0 + balance_tol, 1.0 / std::max(1, levels)) - 1.0;
    std::vector<int32_t> all(g.num_nodes);
    std::iota(all.begin(), all.end(), 0);
    Splitter splitter{g, p.assignment, cap, slack, seed};
    splitter.solve(all, k, 0);
  }
  p.cut = cut_of(g, p.assignment);
  p.validate(g);
  return p;
}

std::vector<std::pair<Graph, NodeMap>> blocks(const Partition& p,
                                              const Graph& g) {
  std::vector<std::vector<int32_t>> members(p.num_blocks);
  for (int32_t v = 0; v < g.num_nodes; ++v)
    members[p.assignment[v]].push_back(v);
  std::vector<std::pair<Graph, NodeMap>> out;
  out.reserve(p.num_blocks);
  for (int32_t b = 0; b < p.num_blocks; ++b)
    out.push_back(extract_subgraph(g, members[b]));
  return out;
}

}  // namespace pieceformer
