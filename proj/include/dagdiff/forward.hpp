#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "dagdiff/expr.hpp"
#include "dagdiff/rules.hpp"

namespace dagdiff {

// Map from each reachable node to the node holding its derivative w.r.t.
// `wrt`, plus the log of every construction performed to build them.
struct DerivativeTable {
    VarId wrt = 0;
    std::unordered_map<NodeId, NodeId> entries;
    OpLog log;
};

struct ForwardResult {
    ExprStore store;   // clone of the input plus appended derivative nodes
    NodeId deriv_root; // == table.entries[input root]
    DerivativeTable table;
    // Ids below this bound are the input expression's own nodes; derivative
    // construction only appended at or above it.
    std::size_t input_node_limit = 0;
};

// One bottom-up sweep in topological (id) order over the nodes reachable from
// `root`. Each node's derivative is one expression: the sum over incoming
// child edges of local-partial * child-derivative. Variable and constant
// leaves seed Const(1) (the active variable) or Const(0). Nodes unreachable
// from `root` are skipped entirely.
inline ForwardResult forward_derivative(const ExprStore& dag, NodeId root, VarId wrt,
                                        bool simplify = false) {
    ForwardResult result{dag.clone_for_append(simplify), kInvalidNode, DerivativeTable{wrt, {}, {}},
                         dag.size()};
    ExprStore& store = result.store;
    DerivativeTable& table = result.table;
    OpLog* log = &table.log;
    const DerivRuleTable& rules = deriv_rules();

    for (NodeId id : reachable_ids(store, root)) {
        const Node n = store.node(id);
        NodeId d = kInvalidNode;
        switch (n.kind) {
            case PayloadKind::Var:
                d = store.make_node(const_node(n.a == wrt ? 1.0 : 0.0), log, OpRole::Seed);
                break;
            case PayloadKind::Const:
                d = store.make_node(const_node(0.0), log, OpRole::Seed);
                break;
            case PayloadKind::SymbolRef:
                throw StructuralError(
                    "forward sweep requires a plain DAG; inline the forest first");
            case PayloadKind::Unary:
            case PayloadKind::Binary: {
                NodeId sum = kInvalidNode;
                for (const LocalPartial& p : local_partials(rules, store, id, log)) {
                    NodeId term = store.make_node(
                        binary_node(Op::Mul, p.partial, table.entries.at(p.child)), log,
                        OpRole::ChainMultiply);
                    sum = sum == kInvalidNode
                              ? term
                              : store.make_node(binary_node(Op::Add, sum, term), log,
                                                OpRole::FanInAdd);
                }
                d = sum;
                break;
            }
        }
        table.entries[id] = d;
    }
    result.deriv_root = table.entries.at(root);
    store.push_root(result.deriv_root);
    return result;
}

struct GradientComponent {
    VarId var;
    ForwardResult result;
};

// One isolated sweep per variable; each component gets its own output store
// and log, so per-component operation counts are directly comparable.
inline std::vector<GradientComponent> forward_gradient(const ExprStore& dag, NodeId root,
                                                       std::span<const VarId> vars,
                                                       bool simplify = false) {
    std::vector<GradientComponent> grad;
    grad.reserve(vars.size());
    for (VarId v : vars) grad.push_back({v, forward_derivative(dag, root, v, simplify)});
    return grad;
}

}  // namespace dagdiff
