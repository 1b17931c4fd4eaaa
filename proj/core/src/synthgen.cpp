#include "pieceformer/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "pieceformer/error.hpp"

namespace pieceformer {

std::vector<std::string> default_gate_alphabet() {
  return {"and", "buf", "dff", "inv", "nand", "nor", "or", "xor"};
}

const char* to_string(EditKind k) {
  switch (k) {
    case EditKind::NodeEdit: return "node";
    case EditKind::EdgeEdit: return "edge";
    case EditKind::SubgraphEdit: return "subgraph";
  }
  return "?";
}

void GenSpec::validate() const {
  if (num_nodes < 2) throw ConfigError("GenSpec: num_nodes must be >= 2");
  if (module_size_range.first < 2 ||
      module_size_range.first > module_size_range.second)
    throw ConfigError("GenSpec: invalid module_size_range");
  if (module_size_range.second > num_nodes)
    throw ConfigError("GenSpec: module_size_range exceeds num_nodes");
  if (!(inter_edge_prob > 0.0 && inter_edge_prob < intra_edge_prob &&
        intra_edge_prob <= 1.0))
    throw ConfigError("GenSpec: need 0 < inter_edge_prob < intra_edge_prob <= 1");
  if (fanout_cap < 1) throw ConfigError("GenSpec: fanout_cap must be >= 1");
  if (hierarchy_levels < 1) throw ConfigError("GenSpec: hierarchy_levels must be >= 1");
  if (type_alphabet.empty()) throw ConfigError("GenSpec: empty type_alphabet");
}

BasePlan generate_base_plan(const GenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Carve num_nodes into module sizes; a short tail becomes its own small
  // module, or merges into the previous one when below 2.
  std::vector<int> sizes;
  int total = 0;
  while (total < spec.num_nodes) {
    int s = spec.module_size_range.first +
            static_cast<int>(rng.below(spec.module_size_range.second -
                                       spec.module_size_range.first + 1));
    if (total + s > spec.num_nodes) s = spec.num_nodes - total;
    if (s < 2 && !sizes.empty()) {
      sizes.back() += s;
    } else {
      sizes.push_back(s);
    }
    total += s;
  }
  const int num_modules = static_cast<int>(sizes.size());

  // Module tree. Root is module 0 at level 1; children attach to any module
  // that still has levels below it. With a single level everything hangs off
  // the root so the graph stays connected.
  std::vector<int> level(num_modules, 1), parent(num_modules, -1);
  for (int m = 1; m < num_modules; ++m) {
    if (spec.hierarchy_levels == 1) {
      parent[m] = 0;
      level[m] = 1;
      continue;
    }
    std::vector<int> pool;
    for (int p = 0; p < m; ++p)
      if (level[p] < spec.hierarchy_levels) pool.push_back(p);
    parent[m] = pool.empty() ? 0 : pool[rng.below(pool.size())];
    level[m] = std::min(level[parent[m]] + 1, spec.hierarchy_levels);
  }

  std::vector<int32_t> module_start(num_modules), module_of(spec.num_nodes);
  std::vector<int32_t> gateway(num_modules);
  int32_t cursor = 0;
  for (int m = 0; m < num_modules; ++m) {
    module_start[m] = cursor;
    gateway[m] = cursor;  // first node of the module is its gateway
    for (int i = 0; i < sizes[m]; ++i) module_of[cursor++] = m;
  }

  std::vector<std::string> types(spec.num_nodes);
  for (int32_t v = 0; v < spec.num_nodes; ++v)
    types[v] = spec.type_alphabet[rng.below(spec.type_alphabet.size())];

  std::vector<int> out_deg(spec.num_nodes, 0);
  std::set<std::pair<int32_t, int32_t>> edges;
  auto add_edge = [&](int32_t u, int32_t v) {
    if (u == v || out_deg[u] >= spec.fanout_cap) return false;
    if (!edges.emplace(u, v).second) return false;
    out_deg[u]++;
    return true;
  };

  // Hierarchy links first so each child gateway keeps a slot for its parent.
  for (int m = 1; m < num_modules; ++m)
    if (!add_edge(gateway[m], gateway[parent[m]]))
      throw GenerationError("generate_base: fanout_cap too small to link modules");

  // Dense intra-module wiring under the fan-out cap.
  for (int m = 0; m < num_modules; ++m) {
    for (int32_t u = module_start[m]; u < module_start[m] + sizes[m]; ++u) {
      std::vector<int32_t> cand;
      cand.reserve(sizes[m] - 1);
      for (int32_t v = module_start[m]; v < module_start[m] + sizes[m]; ++v)
        if (v != u) cand.push_back(v);
      rng.shuffle(cand);
      for (int32_t v : cand) {
        if (out_deg[u] >= spec.fanout_cap) break;
        if (rng.bernoulli(spec.intra_edge_prob)) add_edge(u, v);
      }
    }
  }

  // Sparse extra links, always gateway-to-gateway and always from a deeper
  // module up the hierarchy.
  for (int a = 0; a < num_modules; ++a)
    for (int b = 0; b < num_modules; ++b) {
      if (a == b || level[a] <= level[b]) continue;
      if (rng.bernoulli(spec.inter_edge_prob)) add_edge(gateway[a], gateway[b]);
    }

  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "syn%016llx",
                static_cast<unsigned long long>(spec.seed));
  Graph g = build_graph({edges.begin(), edges.end()}, spec.num_nodes,
                        std::move(types), idbuf);

  // Sanity: modules must be denser inside than between.
  if (num_modules > 1) {
    int64_t intra = 0, inter = 0, intra_pairs = 0;
    for (const auto& [u, v] : edges)
      (module_of[u] == module_of[v] ? intra : inter)++;
    for (int m = 0; m < num_modules; ++m)
      intra_pairs += static_cast<int64_t>(sizes[m]) * (sizes[m] - 1);
    const int64_t all_pairs =
        static_cast<int64_t>(spec.num_nodes) * (spec.num_nodes - 1);
    const double intra_density = static_cast<double>(intra) / intra_pairs;
    const double inter_density =
        static_cast<double>(inter) / (all_pairs - intra_pairs);
    if (!(intra_density > inter_density))
      throw GenerationError("generate_base: spec does not yield modular structure");
  }

  BasePlan plan;
  plan.graph = std::move(g);
  plan.module_of = std::move(module_of);
  plan.module_level = std::move(level);
  plan.module_parent = std::move(parent);
  plan.gateway_of_module = std::move(gateway);
  return plan;
}

Graph generate_base(const GenSpec& spec) {
  return generate_base_plan(spec).graph;
}

EditLimits EditLimits::for_graph(const Graph& g) {
  EditLimits lim;
  lim.node_cap = std::max<int>(1, static_cast<int>(std::ceil(0.005 * g.num_nodes)));
  lim.edge_cap = std::max<int>(1, static_cast<int>(std::ceil(0.005 * g.num_edges())));
  int max_out = 1;
  for (int32_t v = 0; v < g.num_nodes; ++v)
    max_out = std::max(max_out, static_cast<int>(g.out_degree(v)));
  lim.fanout_cap = max_out;
  return lim;
}

namespace {

/// Mutable companion of Graph keyed by stable id. std::map keeps iteration
/// deterministic.
struct MutGraph {
  struct Node {
    std::string type;
    std::set<int64_t> out;
    std::set<int64_t> in;
  };
  std::map<int64_t, Node> nodes;
  int64_t next_id = 0;
  std::string group_id;

  static MutGraph from(const Graph& g) {
    MutGraph mg;
    mg.group_id = g.lineage ? g.lineage->group_id : g.id;
    for (int32_t v = 0; v < g.num_nodes; ++v) {
      const int64_t sid = g.lineage ? g.lineage->stable_id(v) : v;
      mg.nodes[sid].type = g.node_types[v];
      mg.next_id = std::max(mg.next_id, sid + 1);
    }
    for (int32_t u = 0; u < g.num_nodes; ++u) {
      const int64_t su = g.lineage ? g.lineage->stable_id(u) : u;
      for (int32_t v : g.out_neighbors(u)) {
        const int64_t sv = g.lineage ? g.lineage->stable_id(v) : v;
        mg.nodes[su].out.insert(sv);
        mg.nodes[sv].in.insert(su);
      }
    }
    return mg;
  }

  bool has(int64_t id) const { return nodes.count(id) > 0; }
  int out_degree(int64_t id) const { return static_cast<int>(nodes.at(id).out.size()); }

  bool add_edge(int64_t u, int64_t v, int fanout_cap) {
    if (u == v || !has(u) || !has(v)) return false;
    if (out_degree(u) >= fanout_cap) return false;
    if (!nodes[u].out.insert(v).second) return false;
    nodes[v].in.insert(u);
    return true;
  }

  void remove_edge(int64_t u, int64_t v) {
    nodes[u].out.erase(v);
    nodes[v].in.erase(u);
  }

  int64_t add_node(std::string type) {
    const int64_t id = next_id++;
    nodes[id].type = std::move(type);
    return id;
  }

  void remove_node(int64_t id) {
    for (int64_t v : nodes[id].out) nodes[v].in.erase(id);
    for (int64_t u : nodes[id].in) nodes[u].out.erase(id);
    nodes.erase(id);
  }

  std::vector<int64_t> node_ids() const {
    std::vector<int64_t> ids;
    ids.reserve(nodes.size());
    for (const auto& [id, _] : nodes) ids.push_back(id);
    return ids;
  }

  Graph to_graph(const std::string& graph_id, int edit_count) const {
    std::vector<int64_t> ids = node_ids();
    std::map<int64_t, int32_t> local;
    for (size_t i = 0; i < ids.size(); ++i) local[ids[i]] = static_cast<int32_t>(i);
    std::vector<std::pair<int32_t, int32_t>> edges;
    std::vector<std::string> types;
    types.reserve(ids.size());
    for (int64_t id : ids) {
      const Node& n = nodes.at(id);
      types.push_back(n.type);
      for (int64_t v : n.out) edges.emplace_back(local.at(id), local.at(v));
    }
    Graph g = build_graph(edges, static_cast<int32_t>(ids.size()),
                          std::move(types), graph_id);
    Lineage lin;
    lin.group_id = group_id;
    lin.edit_count = edit_count;
    bool identity = true;
    for (size_t i = 0; i < ids.size(); ++i)
      if (ids[i] != static_cast<int64_t>(i)) identity = false;
    if (!identity) lin.node_ids = std::move(ids);
    g.lineage = std::move(lin);
    return g;
  }
};

std::vector<std::string> present_types(const Graph& g) {
  std::set<std::string> s(g.node_types.begin(), g.node_types.end());
  return {s.begin(), s.end()};
}

int64_t stable_of(const Graph& g, int32_t local) {
  return g.lineage ? g.lineage->stable_id(local) : local;
}

std::vector<int64_t> bfs_branch(const MutGraph& mg, int64_t root, int cap) {
  std::vector<int64_t> order;
  std::set<int64_t> seen{root};
  std::deque<int64_t> queue{root};
  while (!queue.empty() && static_cast<int>(order.size()) < cap) {
    const int64_t u = queue.front();
    queue.pop_front();
    order.push_back(u);
    for (int64_t v : mg.nodes.at(u).out)
      if (seen.insert(v).second) queue.push_back(v);
  }
  return order;
}

void apply_to(MutGraph& mg, const EditOp& op, const EditLimits& lim, Rng& rng) {
  switch (op.kind) {
    case EditKind::NodeEdit:
      if (op.direction == EditDirection::Delete) {
        if (mg.nodes.size() <= op.nodes.size() + 1)
          throw EditError("node delete would empty the graph");
        for (int64_t id : op.nodes) {
          if (!mg.has(id)) throw EditError("node delete: unknown node");
          mg.remove_node(id);
        }
      } else {
        for (size_t i = 0; i < op.new_types.size(); ++i) {
          const int64_t anchor = op.anchors[i];
          if (!mg.has(anchor)) throw EditError("node add: unknown anchor");
          const int64_t id = mg.add_node(op.new_types[i]);
          // Attach with one edge; direction picked by anchor capacity.
          if (!mg.add_edge(anchor, id, lim.fanout_cap))
            mg.add_edge(id, anchor, lim.fanout_cap);
        }
      }
      break;
    case EditKind::EdgeEdit:
      if (op.direction == EditDirection::Delete) {
        for (const auto& [u, v] : op.edges) {
          if (!mg.has(u) || !mg.nodes.at(u).out.count(v))
            throw EditError("edge delete: edge not present");
          mg.remove_edge(u, v);
        }
      } else {
        int added = 0;
        for (const auto& [u, v] : op.edges)
          if (mg.add_edge(u, v, lim.fanout_cap)) ++added;
        if (added == 0) throw EditError("edge add: no feasible edge");
      }
      break;
    case EditKind::SubgraphEdit:
      if (op.direction == EditDirection::Add) {
        if (!mg.has(op.branch_root)) throw EditError("branch add: unknown root");
        if (mg.out_degree(op.branch_root) >= lim.fanout_cap)
          throw EditError("branch add: root fan-out exhausted");
        std::vector<int64_t> branch;
        for (int j = 0; j < op.branch_size; ++j) {
          const int64_t id = mg.add_node(op.new_types[j]);
          if (j == 0) {
            mg.add_edge(op.branch_root, id, lim.fanout_cap);
          } else {
            // Parent sampled among branch nodes that still have fan-out room.
            std::vector<int64_t> avail;
            for (int64_t b : branch)
              if (mg.out_degree(b) < lim.fanout_cap) avail.push_back(b);
            const int64_t parent =
                avail.empty() ? branch.back() : avail[rng.below(avail.size())];
            mg.add_edge(parent, id, lim.fanout_cap);
          }
          branch.push_back(id);
        }
      } else {
        if (!mg.has(op.branch_root)) throw EditError("branch delete: unknown root");
        std::vector<int64_t> branch = bfs_branch(mg, op.branch_root, op.branch_size);
        if (static_cast<int>(branch.size()) < lim.branch_min)
          throw EditError("branch delete: branch too small");
        if (mg.nodes.size() <= branch.size() + 1)
          throw EditError("branch delete: would empty the graph");
        for (int64_t id : branch) mg.remove_node(id);
      }
      break;
  }
}

}  // namespace

EditOp sample_edit(const Graph& g, EditKind kind, EditDirection dir,
                   const EditLimits& lim, Rng& rng) {
  if (g.num_nodes < 2) throw EditError("sample_edit: graph too small");
  EditOp op;
  op.kind = kind;
  op.direction = dir;
  const std::vector<std::string> types = present_types(g);

  switch (kind) {
    case EditKind::NodeEdit: {
      const int k = 1 + static_cast<int>(rng.below(lim.node_cap));
      if (dir == EditDirection::Delete) {
        if (g.num_nodes - k < 2) throw EditError("node delete infeasible");
        std::set<int32_t> chosen;
        while (static_cast<int>(chosen.size()) < k)
          chosen.insert(static_cast<int32_t>(rng.below(g.num_nodes)));
        for (int32_t v : chosen) op.nodes.push_back(stable_of(g, v));
      } else {
        for (int i = 0; i < k; ++i) {
          op.new_types.push_back(types[rng.below(types.size())]);
          op.anchors.push_back(
              stable_of(g, static_cast<int32_t>(rng.below(g.num_nodes))));
        }
      }
      break;
    }
    case EditKind::EdgeEdit: {
      int k = 1 + static_cast<int>(rng.below(lim.edge_cap));
      if (dir == EditDirection::Delete) {
        const int64_t e = g.num_edges();
        if (e == 0) throw EditError("edge delete: no edges");
        k = std::min<int64_t>(k, e);
        std::set<int64_t> chosen;
        while (static_cast<int>(chosen.size()) < k)
          chosen.insert(static_cast<int64_t>(rng.below(e)));
        for (int64_t idx : chosen) {
          const int32_t u = static_cast<int32_t>(
              std::upper_bound(g.offsets.begin(), g.offsets.end(), idx) -
              g.offsets.begin() - 1);
          op.edges.emplace_back(stable_of(g, u), stable_of(g, g.targets[idx]));
        }
      } else {
        for (int i = 0; i < k; ++i) {
          for (int tries = 0; tries < 50; ++tries) {
            const int32_t u = static_cast<int32_t>(rng.below(g.num_nodes));
            const int32_t v = static_cast<int32_t>(rng.below(g.num_nodes));
            if (u == v || g.out_degree(u) >= lim.fanout_cap || g.has_edge(u, v))
              continue;
            op.edges.emplace_back(stable_of(g, u), stable_of(g, v));
            break;
          }
        }
        if (op.edges.empty()) throw EditError("edge add infeasible");
      }
      break;
    }
    case EditKind::SubgraphEdit: {
      op.branch_size =
          lim.branch_min +
          static_cast<int>(rng.below(lim.branch_max - lim.branch_min + 1));
      if (dir == EditDirection::Add) {
        bool found = false;
        for (int tries = 0; tries < 20 && !found; ++tries) {
          const int32_t v = static_cast<int32_t>(rng.below(g.num_nodes));
          if (g.out_degree(v) < lim.fanout_cap) {
            op.branch_root = stable_of(g, v);
            found = true;
          }
        }
        if (!found) throw EditError("branch add: no root with fan-out room");
        for (int j = 0; j < op.branch_size; ++j)
          op.new_types.push_back(types[rng.below(types.size())]);
      } else {
        bool found = false;
        for (int tries = 0; tries < 20 && !found; ++tries) {
          const int32_t v = static_cast<int32_t>(rng.below(g.num_nodes));
          // Probe reach on the immutable graph.
          std::vector<int32_t> seen{v};
          std::set<int32_t> mark{v};
          for (size_t qi = 0; qi < seen.size() &&
               static_cast<int>(seen.size()) < op.branch_size; ++qi)
            for (int32_t w : g.out_neighbors(seen[qi]))
              if (mark.insert(w).second) {
                seen.push_back(w);
                if (static_cast<int>(seen.size()) >= op.branch_size) break;
              }
          if (static_cast<int>(seen.size()) >= lim.branch_min &&
              g.num_nodes - static_cast<int>(seen.size()) >= 2) {
            op.branch_root = stable_of(g, v);
            found = true;
          }
        }
        if (!found) throw EditError("branch delete: no deletable branch");
      }
      break;
    }
  }
  return op;
}

EditOp sample_edit(const Graph& g, Rng& rng) {
  const EditKind kind = static_cast<EditKind>(rng.below(3));
  const EditDirection dir = static_cast<EditDirection>(rng.below(2));
  return sample_edit(g, kind, dir, EditLimits::for_graph(g), rng);
}

Graph apply_edit(const Graph& g, const EditOp& op, Rng& rng) {
  MutGraph mg = MutGraph::from(g);
  apply_to(mg, op, EditLimits::for_graph(g), rng);
  const int edits = g.lineage ? g.lineage->edit_count + 1 : 1;
  return mg.to_graph(g.id, edits);
}

std::vector<const Graph*> GraphGroup::all() const {
  std::vector<const Graph*> out;
  out.push_back(&base);
  for (const Graph& g : derived) out.push_back(&g);
  return out;
}

GraphGroup derive_group(const Graph& base, int count, uint64_t seed) {
  if (base.num_nodes < 4) throw GenerationError("derive_group: base too small");
  GraphGroup group;
  group.seed = seed;
  group.base = base;
  const std::string group_id =
      base.lineage ? base.lineage->group_id : base.id;
  if (!group.base.lineage) {
    Lineage lin;
    lin.group_id = group_id;
    lin.edit_count = 0;
    group.base.lineage = std::move(lin);
  }

  const EditLimits base_lim = EditLimits::for_graph(base);
  for (int i = 1; i <= count; ++i) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(i)));
    MutGraph mg = MutGraph::from(group.base);
    char name[40];
    std::snprintf(name, sizeof(name), "%s_d%02d", group_id.c_str(), i);
    for (int e = 0; e < i; ++e) {
      bool done = false;
      for (int attempt = 0; attempt < 100 && !done; ++attempt) {
        const Graph snapshot = mg.to_graph(name, i);
        EditLimits lim = EditLimits::for_graph(snapshot);
        lim.fanout_cap = base_lim.fanout_cap;
        try {
          const EditKind kind = static_cast<EditKind>(rng.below(3));
          const EditDirection dir = static_cast<EditDirection>(rng.below(2));
          EditOp op = sample_edit(snapshot, kind, dir, lim, rng);
          apply_to(mg, op, lim, rng);
          done = true;
        } catch (const EditError&) {
          // resample
        }
      }
      if (!done)
        throw GenerationError("derive_group: no feasible edit after 100 tries");
    }
    group.derived.push_back(mg.to_graph(name, i));
  }
  return group;
}

int64_t symmetric_difference(const Graph& a, const Graph& b) {
  std::set<int64_t> na, nb;
  for (int32_t v = 0; v < a.num_nodes; ++v) na.insert(stable_of(a, v));
  for (int32_t v = 0; v < b.num_nodes; ++v) nb.insert(stable_of(b, v));
  std::set<std::pair<int64_t, int64_t>> ea, eb;
  for (int32_t u = 0; u < a.num_nodes; ++u)
    for (int32_t v : a.out_neighbors(u))
      ea.emplace(stable_of(a, u), stable_of(a, v));
  for (int32_t u = 0; u < b.num_nodes; ++u)
    for (int32_t v : b.out_neighbors(u))
      eb.emplace(stable_of(b, u), stable_of(b, v));

  int64_t diff = 0;
  for (int64_t v : na) diff += !nb.count(v);
  for (int64_t v : nb) diff += !na.count(v);
  for (const auto& e : ea) diff += !eb.count(e);
  for (const auto& e : eb) diff += !ea.count(e);
  return diff;
}

}  // namespace pieceformer
