#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dagdiff/expr.hpp"

namespace dagdiff {

inline constexpr std::uint64_t kDefaultBudget = 1000000;

// ----------------------------------------------------------------------------
// Unfolding (DAG -> tree)
// ----------------------------------------------------------------------------

namespace detail {

// Copies the tree expansion of `src[root]` into `dst`, appending one node per
// tree position (shared subgraphs are duplicated per reference). Iterative
// post-order: trace DAGs produced by long loops can be deep. Decrements
// `budget_left` per constructed node when given. Variables are re-registered
// by name in `dst`.
inline NodeId append_unfolded(const ExprStore& src, NodeId root, ExprStore& dst,
                              OpLog* log = nullptr, OpRole role = OpRole::Seed,
                              std::uint64_t* budget_left = nullptr,
                              std::uint64_t budget_total = 0) {
    struct Item {
        NodeId id;
        bool expanded;
    };
    std::vector<Item> work{{root, false}};
    std::vector<NodeId> out;  // post-order result stack
    while (!work.empty()) {
        Item item = work.back();
        work.pop_back();
        Node n = src.node(item.id);  // copy: dst may be src
        if (!item.expanded) {
            work.push_back({item.id, true});
            // Children are pushed right-first so the left child's copy is
            // completed (and lands on `out`) first.
            if (n.kind == PayloadKind::Binary) {
                work.push_back({n.b, false});
                work.push_back({n.a, false});
            } else if (n.kind == PayloadKind::Unary) {
                work.push_back({n.a, false});
            } else if (n.kind == PayloadKind::SymbolRef) {
                throw StructuralError("cannot unfold a SymbolRef; inline the forest first");
            }
            continue;
        }
        if (budget_left != nullptr) {
            if (*budget_left == 0) throw BudgetExceededError(kTreeSizeCap, budget_total);
            --*budget_left;
        }
        NodeId copy = kInvalidNode;
        switch (n.kind) {
            case PayloadKind::Var:
                copy = dst.make_node(var_node(dst.make_var(src.var_name(n.a))), log, role);
                break;
            case PayloadKind::Const: copy = dst.make_node(const_node(n.value), log, role); break;
            case PayloadKind::Unary: {
                NodeId child = out.back();
                out.pop_back();
                copy = dst.make_node(unary_node(n.op, child, n.exponent), log, role);
                break;
            }
            case PayloadKind::Binary: {
                NodeId right = out.back();
                out.pop_back();
                NodeId left = out.back();
                out.pop_back();
                copy = dst.make_node(binary_node(n.op, left, right), log, role);
                break;
            }
            case PayloadKind::SymbolRef: break;  // rejected above
        }
        out.push_back(copy);
    }
    return out.back();
}

}  // namespace detail

struct UnfoldResult {
    ExprStore store;  // TreeOnly
    NodeId root;
};

// Expands every shared subgraph into an explicit tree. The projected tree
// size is computed first; if it exceeds `budget` nothing is built and
// BudgetExceededError carries the estimate.
inline UnfoldResult unfold(const ExprStore& dag, NodeId root,
                           std::uint64_t budget = kDefaultBudget) {
    std::uint64_t projected = tree_size(dag, root);
    if (projected > budget) throw BudgetExceededError(projected, budget);
    UnfoldResult result{ExprStore(StoreMode::TreeOnly, dag.simplify()), kInvalidNode};
    result.root = detail::append_unfolded(dag, root, result.store);
    result.store.push_root(result.root);
    return result;
}

// ----------------------------------------------------------------------------
// Consing (tree -> DAG)
// ----------------------------------------------------------------------------

struct ConsResult {
    ExprStore store;  // HashConsed
    NodeId root;
};

// Rebuilds the reachable subgraph with hash-consing, merging structurally
// identical subtrees. Processing in id order keeps the output topologically
// ordered; feeding an already-consed, fully reachable store through reproduces
// it node for node.
inline ConsResult cons_tree(const ExprStore& input, NodeId root) {
    std::vector<char> mark = reachable_mask(input, root);
    ConsResult result{ExprStore(StoreMode::HashConsed, input.simplify()), kInvalidNode};
    std::vector<NodeId> remap(input.size(), kInvalidNode);
    for (NodeId id = 0; id < input.size(); ++id) {
        if (!mark[id]) continue;
        const Node& n = input.node(id);
        switch (n.kind) {
            case PayloadKind::Var:
                remap[id] =
                    result.store.make_node(var_node(result.store.make_var(input.var_name(n.a))));
                break;
            case PayloadKind::Const: remap[id] = result.store.make_node(const_node(n.value)); break;
            case PayloadKind::Unary:
                remap[id] = result.store.make_node(unary_node(n.op, remap[n.a], n.exponent));
                break;
            case PayloadKind::Binary:
                remap[id] = result.store.make_node(binary_node(n.op, remap[n.a], remap[n.b]));
                break;
            case PayloadKind::SymbolRef:
                throw StructuralError("cannot cons a SymbolRef; inline the forest first");
        }
    }
    result.root = remap[root];
    result.store.push_root(result.root);
    return result;
}

// ----------------------------------------------------------------------------
// Forest extraction (DAG -> named bindings + main)
// ----------------------------------------------------------------------------

namespace detail {

// Incoming-edge counts over the reachable subgraph; parallel edges (both
// children of one parent being the same node) count separately.
inline std::vector<std::uint32_t> parent_edge_counts(const ExprStore& store,
                                                     const std::vector<char>& mark) {
    std::vector<std::uint32_t> parents(store.size(), 0);
    for (NodeId id = 0; id < store.size(); ++id) {
        if (!mark[id]) continue;
        const Node& n = store.node(id);
        if (n.kind == PayloadKind::Unary) {
            ++parents[n.a];
        } else if (n.kind == PayloadKind::Binary) {
            ++parents[n.a];
            ++parents[n.b];
        }
    }
    return parents;
}

}  // namespace detail

// Extracts every multiply-referenced operation node into a named binding
// (t1, t2, ... in topological order) and rewrites all references to go
// through one SymbolRef per binding. Var/Const leaves are repeated inline.
// The conversion is sharing-preserving, so the forest holds exactly one copy
// of every input node plus one SymbolRef per binding:
//   node_count(forest) == node_count(dag, root) + bindings.
inline ExprForest to_forest(const ExprStore& dag, NodeId root) {
    std::vector<char> mark = reachable_mask(dag, root);
    std::vector<std::uint32_t> parents = detail::parent_edge_counts(dag, mark);

    ExprForest forest{ExprStore(StoreMode::HashConsed, dag.simplify())};
    ExprStore& out = forest.store();
    std::vector<NodeId> remap(dag.size(), kInvalidNode);

    int next_name = 1;
    for (NodeId id = 0; id < dag.size(); ++id) {
        if (!mark[id]) continue;
        const Node& n = dag.node(id);
        NodeId rebuilt = kInvalidNode;
        switch (n.kind) {
            case PayloadKind::Var:
                rebuilt = out.make_node(var_node(out.make_var(dag.var_name(n.a))));
                break;
            case PayloadKind::Const: rebuilt = out.make_node(const_node(n.value)); break;
            case PayloadKind::Unary:
                rebuilt = out.make_node(unary_node(n.op, remap[n.a], n.exponent));
                break;
            case PayloadKind::Binary:
                rebuilt = out.make_node(binary_node(n.op, remap[n.a], remap[n.b]));
                break;
            case PayloadKind::SymbolRef:
                throw StructuralError("input to to_forest is already a forest");
        }
        bool internal = n.kind == PayloadKind::Unary || n.kind == PayloadKind::Binary;
        if (internal && id != root && parents[id] >= 2) {
            BindingId b = forest.add_binding("t" + std::to_string(next_name++), rebuilt);
            remap[id] = forest.ref(b);
        } else {
            remap[id] = rebuilt;
        }
    }
    forest.set_main(remap[root]);
    return forest;
}

// Replaces every SymbolRef with its binding's (rebuilt) root, recovering a
// plain DAG. Sharing survives: all references to one binding map to one node.
inline ConsResult inline_forest(const ExprForest& forest) {
    const ExprStore& in = forest.store();
    ConsResult result{ExprStore(StoreMode::HashConsed, in.simplify()), kInvalidNode};
    ExprStore& out = result.store;
    std::vector<NodeId> remap(in.size(), kInvalidNode);
    std::vector<NodeId> binding_remap(forest.bindings().size(), kInvalidNode);

    // Bindings are ordered (k references only j < k), so a single pass in
    // binding order, then main, sees every referenced binding already mapped.
    std::vector<char> mark(in.size(), 0);
    for (const Binding& b : forest.bindings()) mark_reachable(in, b.root, mark);
    mark_reachable(in, forest.main(), mark);

    auto rebuild = [&](NodeId target) {
        for (NodeId id = 0; id <= target; ++id) {
            if (!mark[id] || remap[id] != kInvalidNode) continue;
            const Node& n = in.node(id);
            switch (n.kind) {
                case PayloadKind::Var:
                    remap[id] = out.make_node(var_node(out.make_var(in.var_name(n.a))));
                    break;
                case PayloadKind::Const: remap[id] = out.make_node(const_node(n.value)); break;
                case PayloadKind::Unary:
                    remap[id] = out.make_node(unary_node(n.op, remap[n.a], n.exponent));
                    break;
                case PayloadKind::Binary:
                    remap[id] = out.make_node(binary_node(n.op, remap[n.a], remap[n.b]));
                    break;
                case PayloadKind::SymbolRef:
                    if (binding_remap[n.a] == kInvalidNode)
                        throw StructuralError("SymbolRef to a later binding");
                    remap[id] = binding_remap[n.a];
                    break;
            }
        }
        return remap[target];
    };

    for (std::size_t k = 0; k < forest.bindings().size(); ++k)
        binding_remap[k] = rebuild(forest.bindings()[k].root);
    result.root = rebuild(forest.main());
    result.store.push_root(result.root);
    return result;
}

// ----------------------------------------------------------------------------
// Swell report
// ----------------------------------------------------------------------------

// Size comparison of the three storage formats of one expression.
// `forest_nodes` counts distinct nodes (each SymbolRef once), which equals
// dag_nodes + forest_bindings for a sharing-preserving conversion.
// `forest_tree_sum` sums per-tree sizes over bindings + main (refs count 1,
// repeated leaves count per occurrence).
struct SwellReport {
    std::size_t dag_nodes = 0;
    std::uint64_t tree_nodes = 0;
    bool tree_analytic = false;  // true if unfolding was budget-limited and
                                 // tree_nodes came from the size formula
    std::size_t forest_nodes = 0;
    std::size_t forest_bindings = 0;
    std::uint64_t forest_tree_sum = 0;
    double swell_ratio = 0.0;  // tree_nodes / dag_nodes
};

inline SwellReport swell_report(const ExprStore& dag, NodeId root,
                                std::uint64_t budget = kDefaultBudget) {
    SwellReport report;
    report.dag_nodes = node_count(dag, root);
    report.tree_nodes = tree_size(dag, root);
    if (report.tree_nodes <= budget) {
        UnfoldResult tree = unfold(dag, root, budget);
        report.tree_nodes = node_count(tree.store, tree.root);
        report.tree_analytic = false;
    } else {
        report.tree_analytic = true;
    }
    ExprForest forest = to_forest(dag, root);
    report.forest_nodes = node_count(forest);
    report.forest_bindings = forest.bindings().size();
    report.forest_tree_sum = tree_size(forest.store(), forest.main());
    for (const Binding& b : forest.bindings())
        report.forest_tree_sum += tree_size(forest.store(), b.root);
    report.swell_ratio = double(report.tree_nodes) / double(report.dag_nodes);
    return report;
}

}  // namespace dagdiff
