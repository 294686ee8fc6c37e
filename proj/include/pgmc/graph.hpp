#pragma once

// Connection graph validation. Modules share latent variables over edges
// tagged with one of the three elemental connection kinds; fork-shaped
// (tail-to-tail) edges get a relay node inserted so both sides keep the
// ordinary two-endpoint message contract.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pgmc/errors.hpp"

namespace pgmc {

enum class ConnectionKind { kHeadToTail, kTailToTail, kHeadToHead, kRelay };

inline const char* to_string(ConnectionKind k) {
  switch (k) {
    case ConnectionKind::kHeadToTail: return "head_to_tail";
    case ConnectionKind::kTailToTail: return "tail_to_tail";
    case ConnectionKind::kHeadToHead: return "head_to_head";
    case ConnectionKind::kRelay: return "relay";
  }
  return "?";
}

struct ModuleSpec {
  std::string id;
  bool learnable = true;
};

struct EdgeSpec {
  std::string module_a;
  std::string module_b;
  std::string variable;
  ConnectionKind kind = ConnectionKind::kHeadToTail;
};

struct GraphConfig {
  std::vector<ModuleSpec> modules;
  std::vector<EdgeSpec> edges;
  std::vector<std::string> update_order;
};

struct ModuleGraph {
  std::vector<ModuleSpec> modules;
  std::vector<EdgeSpec> edges;  // tail-to-tail edges replaced by relay pairs
  std::vector<std::string> update_order;

  bool has_module(const std::string& id) const {
    for (const auto& m : modules) {
      if (m.id == id) return true;
    }
    return false;
  }

  std::vector<EdgeSpec> edges_of(const std::string& id) const {
    std::vector<EdgeSpec> out;
    for (const auto& e : edges) {
      if (e.module_a == id || e.module_b == id) out.push_back(e);
    }
    return out;
  }

  static std::string relay_id(const std::string& variable) { return "ttot_" + variable; }
};

// Validates the declared topology and inserts relay nodes. Throws ConfigError
// with the offending module/edge named.
inline ModuleGraph build_graph(const GraphConfig& config) {
  if (config.modules.empty()) throw ConfigError("graph: no modules declared");

  std::set<std::string> ids;
  for (const auto& m : config.modules) {
    if (m.id.empty()) throw ConfigError("graph: empty module id");
    if (!ids.insert(m.id).second) throw ConfigError("graph: duplicate module id '" + m.id + "'");
  }

  ModuleGraph graph;
  graph.modules = config.modules;

  std::set<std::string> variables;
  for (const auto& e : config.edges) {
    const std::string where = "edge '" + e.variable + "' (" + e.module_a + ", " + e.module_b + ")";
    if (e.kind == ConnectionKind::kRelay) throw ConfigError(where + ": relay edges are inserted, not declared");
    for (const std::string* m : {&e.module_a, &e.module_b}) {
      if (!ids.count(*m)) throw ConfigError(where + ": unknown module '" + *m + "'");
    }
    if (e.module_a == e.module_b) throw ConfigError(where + ": self-connection");
    if (!variables.insert(e.variable).second) {
      throw ConfigError(where + ": shared variable '" + e.variable +
                        "' already claimed by another edge; a variable joins exactly two modules");
    }
    if (e.kind == ConnectionKind::kTailToTail) {
      const std::string relay = ModuleGraph::relay_id(e.variable);
      if (ids.count(relay)) throw ConfigError(where + ": module id '" + relay + "' collides with relay node");
      ids.insert(relay);
      graph.modules.push_back(ModuleSpec{relay, /*learnable=*/false});
      graph.edges.push_back(EdgeSpec{e.module_a, relay, e.variable + ":" + e.module_a,
                                     ConnectionKind::kRelay});
      graph.edges.push_back(EdgeSpec{relay, e.module_b, e.variable + ":" + e.module_b,
                                     ConnectionKind::kRelay});
    } else {
      graph.edges.push_back(e);
    }
  }

  // A directed loop of chain connections through shared variables would make
  // the "treat the parent's estimate as an observation" scheme circular.
  std::map<std::string, std::vector<std::string>> downstream;
  for (const auto& e : graph.edges) {
    if (e.kind == ConnectionKind::kHeadToTail) downstream[e.module_a].push_back(e.module_b);
  }
  std::map<std::string, int> mark;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  auto dfs = [&](auto&& self, const std::string& node) -> void {
    mark[node] = 1;
    for (const auto& next : downstream[node]) {
      if (mark[next] == 1) {
        throw ConfigError("graph: cycle of head_to_tail connections through '" + next + "'");
      }
      if (mark[next] == 0) self(self, next);
    }
    mark[node] = 2;
  };
  for (const auto& [node, _] : downstream) {
    if (mark[node] == 0) dfs(dfs, node);
  }

  if (config.update_order.empty()) throw ConfigError("graph: empty update order");
  std::set<std::string> scheduled;
  for (const auto& id : config.update_order) {
    if (!ids.count(id)) throw ConfigError("update_order: unknown module '" + id + "'");
    scheduled.insert(id);
  }
  for (const auto& m : graph.modules) {
    if (m.learnable && !scheduled.count(m.id)) {
      throw ConfigError("update_order: learnable module '" + m.id + "' is never updated");
    }
  }
  graph.update_order = config.update_order;
  return graph;
}

}  // namespace pgmc
