#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dagdiff/expr.hpp"
#include "dagdiff/rules.hpp"
#include "dagdiff/transforms.hpp"

namespace dagdiff {

// What a derivative does with a subexpression it needs again:
//   Copy:  duplicate it into a private tree (no sharing in the output)
//   Share: point at the shared node (output stays a DAG)
//   Cse:   like Share, but shared derivative subtrees are presented as named
//          bindings (same node graph, different presentation)
enum class SubtreeMode : std::uint8_t { Copy, Share, Cse };

inline const char* subtree_mode_name(SubtreeMode m) {
    switch (m) {
        case SubtreeMode::Copy: return "copy";
        case SubtreeMode::Share: return "share";
        case SubtreeMode::Cse: return "cse";
    }
    return "?";
}

struct DiffPolicy {
    SubtreeMode subtree = SubtreeMode::Share;
    bool memoize = true;
};

struct SymbolicResult {
    // Share/Cse: clone of the (consed) input plus appended derivative nodes.
    // Copy: a TreeOnly store holding only the derivative tree.
    ExprStore store;
    NodeId deriv_root = kInvalidNode;
    OpLog log;
    // Cse presentation: derivative as named bindings + main.
    std::optional<ExprForest> forest;
    // Ids below this bound are input-owned (0 for Copy output).
    std::size_t input_node_limit = 0;
};

namespace detail {

// Caps the number of instrumented constructor calls one differentiation may
// perform. Checked between recursion steps, so the cap can be overshot by at
// most one rule application.
struct DiffBudget {
    std::uint64_t start_calls = 0;
    std::uint64_t limit = 0;

    void check(const ExprStore& store) const {
        std::uint64_t used = store.constructor_calls() - start_calls;
        if (used > limit) throw BudgetExceededError(used, limit);
    }

    std::uint64_t remaining(const ExprStore& store) const {
        std::uint64_t used = store.constructor_calls() - start_calls;
        return used >= limit ? 0 : limit - used;
    }
};

// Recursive-descent differentiation with the recursion made explicit (trace
// DAGs from long loops can be deeper than the machine stack allows).
// Per operation node: child derivatives first (left, then right), then local
// partials, then one chain multiply per edge, then the fan-in add.
//
// Shared building (Share/Cse): derivative nodes append to the same store the
// expression lives in, so pointing at a subexpression costs nothing.
struct SharedBuilder {
    ExprStore& store;
    VarId wrt;
    bool memoize;
    OpLog& log;
    DiffBudget budget;
    // Cse only: forest receiving derivative bindings (aliases `store`).
    ExprForest* forest = nullptr;
    std::unordered_map<NodeId, NodeId> memo;
    std::vector<std::optional<BindingId>> dbinding;

    NodeId emit(const Node& proto, OpRole role) { return store.make_node(proto, &log, role); }

    void remember(NodeId node, NodeId d) {
        if (memoize) memo.emplace(node, d);
    }

    NodeId run(NodeId root) {
        // stage 0: expand; 1: combine children; 2: finish a Cse binding
        struct Frame {
            NodeId node;
            std::uint8_t stage;
        };
        std::vector<Frame> work{{root, 0}};
        std::vector<NodeId> out;
        while (!work.empty()) {
            budget.check(store);
            Frame f = work.back();
            work.pop_back();
            const Node n = store.node(f.node);
            if (f.stage == 0) {
                if (memoize) {
                    auto it = memo.find(f.node);
                    if (it != memo.end()) {
                        out.push_back(it->second);
                        continue;
                    }
                }
                switch (n.kind) {
                    case PayloadKind::Var: {
                        NodeId d =
                            emit(const_node(n.a == wrt ? 1.0 : 0.0), OpRole::Seed);
                        remember(f.node, d);
                        out.push_back(d);
                        break;
                    }
                    case PayloadKind::Const: {
                        NodeId d = emit(const_node(0.0), OpRole::Seed);
                        remember(f.node, d);
                        out.push_back(d);
                        break;
                    }
                    case PayloadKind::SymbolRef: {
                        if (forest == nullptr)
                            throw StructuralError(
                                "SymbolRef reached a DAG differentiation; inline the forest "
                                "first");
                        if (dbinding[n.a].has_value()) {
                            NodeId d = emit(symbol_node(*dbinding[n.a]), OpRole::Seed);
                            remember(f.node, d);
                            out.push_back(d);
                        } else {
                            work.push_back({f.node, 2});
                            work.push_back({forest->binding(n.a).root, 0});
                        }
                        break;
                    }
                    case PayloadKind::Unary:
                        work.push_back({f.node, 1});
                        work.push_back({n.a, 0});
                        break;
                    case PayloadKind::Binary:
                        work.push_back({f.node, 1});
                        work.push_back({n.b, 0});
                        work.push_back({n.a, 0});
                        break;
                }
            } else if (f.stage == 1) {
                NodeId d_right = kInvalidNode;
                if (n.kind == PayloadKind::Binary) {
                    d_right = out.back();
                    out.pop_back();
                }
                NodeId d_left = out.back();
                out.pop_back();
                std::vector<LocalPartial> ps = local_partials(deriv_rules(), store, f.node, &log);
                NodeId sum = kInvalidNode;
                for (const LocalPartial& p : ps) {
                    NodeId d_child = p.side == EdgeSide::Right ? d_right : d_left;
                    NodeId term = emit(binary_node(Op::Mul, p.partial, d_child),
                                       OpRole::ChainMultiply);
                    sum = sum == kInvalidNode
                              ? term
                              : emit(binary_node(Op::Add, sum, term), OpRole::FanInAdd);
                }
                remember(f.node, sum);
                out.push_back(sum);
            } else {
                // Cse: the binding's derivative is on the result stack. Bind
                // it once under a "d"-name; every reference shares it.
                NodeId d_root = out.back();
                out.pop_back();
                BindingId db = forest->add_binding("d" + forest->binding(n.a).name, d_root);
                dbinding[n.a] = db;
                NodeId d = emit(symbol_node(db), OpRole::Seed);
                remember(f.node, d);
                out.push_back(d);
            }
        }
        return out.back();
    }
};

// Copy building: the derivative lives in its own TreeOnly store, and every
// subexpression the derivative mentions (local partials referencing input
// subtrees, memoized child derivatives) is duplicated at emission time.
struct CopyBuilder {
    const ExprStore& input;
    ExprStore& output;
    ExprStore scratch;  // input clone; rules build partial shapes here
    VarId wrt;
    bool memoize;
    OpLog& log;
    DiffBudget budget;
    std::unordered_map<NodeId, NodeId> memo;  // input node -> output root

    CopyBuilder(const ExprStore& in, ExprStore& out, VarId wrt_, bool memoize_, OpLog& log_,
                std::uint64_t budget_limit, bool simplify)
        : input(in), output(out), scratch(in.clone_for_append(simplify)), wrt(wrt_),
          memoize(memoize_), log(log_) {
        budget.start_calls = output.constructor_calls();
        budget.limit = budget_limit;
    }

    NodeId copy_into_output(const ExprStore& src, NodeId src_root, OpRole role) {
        std::uint64_t left = budget.remaining(output);
        return append_unfolded(src, src_root, output, &log, role, &left, budget.limit);
    }

    NodeId run(NodeId root) {
        struct Frame {
            NodeId node;
            std::uint8_t stage;
        };
        std::vector<Frame> work{{root, 0}};
        std::vector<NodeId> out;
        while (!work.empty()) {
            budget.check(output);
            Frame f = work.back();
            work.pop_back();
            const Node n = input.node(f.node);
            if (f.stage == 0) {
                if (memoize) {
                    auto it = memo.find(f.node);
                    if (it != memo.end()) {
                        // Differentiated once already; duplicate the result.
                        out.push_back(copy_into_output(output, it->second, OpRole::Seed));
                        continue;
                    }
                }
                switch (n.kind) {
                    case PayloadKind::Var: {
                        NodeId d = output.make_node(const_node(n.a == wrt ? 1.0 : 0.0), &log,
                                                    OpRole::Seed);
                        if (memoize) memo.emplace(f.node, d);
                        out.push_back(d);
                        break;
                    }
                    case PayloadKind::Const: {
                        NodeId d = output.make_node(const_node(0.0), &log, OpRole::Seed);
                        if (memoize) memo.emplace(f.node, d);
                        out.push_back(d);
                        break;
                    }
                    case PayloadKind::SymbolRef:
                        throw StructuralError(
                            "SymbolRef reached a DAG differentiation; inline the forest first");
                    case PayloadKind::Unary:
                        work.push_back({f.node, 1});
                        work.push_back({n.a, 0});
                        break;
                    case PayloadKind::Binary:
                        work.push_back({f.node, 1});
                        work.push_back({n.b, 0});
                        work.push_back({n.a, 0});
                        break;
                }
            } else {
                NodeId d_right = kInvalidNode;
                if (n.kind == PayloadKind::Binary) {
                    d_right = out.back();
                    out.pop_back();
                }
                NodeId d_left = out.back();
                out.pop_back();
                // Partial shapes come from the shared rule table, built in the
                // scratch clone (not logged: only output construction is
                // work), then copied out.
                std::vector<LocalPartial> ps =
                    local_partials(deriv_rules(), scratch, f.node, nullptr);
                NodeId sum = kInvalidNode;
                for (const LocalPartial& p : ps) {
                    NodeId d_child = p.side == EdgeSide::Right ? d_right : d_left;
                    NodeId partial = copy_into_output(scratch, p.partial, OpRole::LocalPartial);
                    NodeId term = output.make_node(binary_node(Op::Mul, partial, d_child), &log,
                                                   OpRole::ChainMultiply);
                    sum = sum == kInvalidNode
                              ? term
                              : output.make_node(binary_node(Op::Add, sum, term), &log,
                                                 OpRole::FanInAdd);
                }
                if (memoize) memo.emplace(f.node, sum);
                out.push_back(sum);
            }
        }
        return out.back();
    }
};

}  // namespace detail

// Differentiates `root` w.r.t. `wrt` by recursive rule application: the
// unary chain rule for one-child nodes, the two-term total derivative for
// two-child nodes, with the same edge order, chain-multiply shape, and
// fan-in shape as the forward sweep. `policy.subtree` picks the output
// storage format; `policy.memoize` caches per (node, wrt) within this call.
// TreeOnly inputs are hash-consed first for Share/Cse.
inline SymbolicResult symbolic_derivative(const ExprStore& input, NodeId root, VarId wrt,
                                          DiffPolicy policy = {}, bool simplify = false,
                                          std::uint64_t budget = kDefaultBudget) {
    if (policy.subtree == SubtreeMode::Copy) {
        SymbolicResult result{ExprStore(StoreMode::TreeOnly, simplify), kInvalidNode, {}, {}, 0};
        detail::CopyBuilder builder(input, result.store, wrt, policy.memoize, result.log, budget,
                                    simplify);
        result.deriv_root = builder.run(root);
        result.store.push_root(result.deriv_root);
        return result;
    }

    // Share and Cse build the same graph.
    const bool needs_cons = input.mode() == StoreMode::TreeOnly;
    ConsResult consed{ExprStore{}, kInvalidNode};
    if (needs_cons) consed = cons_tree(input, root);
    const ExprStore& base = needs_cons ? consed.store : input;
    NodeId base_root = needs_cons ? consed.root : root;

    SymbolicResult result{base.clone_for_append(simplify), kInvalidNode, {}, {}, base.size()};
    detail::SharedBuilder builder{result.store, wrt,    policy.memoize,
                                  result.log,   {},     nullptr,
                                  {},           {}};
    builder.budget.start_calls = result.store.constructor_calls();
    builder.budget.limit = budget;
    result.deriv_root = builder.run(base_root);
    result.store.push_root(result.deriv_root);

    if (policy.subtree == SubtreeMode::Cse)
        result.forest = to_forest(result.store, result.deriv_root);
    return result;
}

// Forest-input differentiation. Cse differentiates in place: each referenced
// binding t gets a derivative binding dt on demand, and derivative references
// are SymbolRefs to it. Share and Copy inline the forest first (reference-
// preservingly, so Share sees the identical DAG).
inline SymbolicResult symbolic_derivative(const ExprForest& input, VarId wrt,
                                          DiffPolicy policy = {}, bool simplify = false,
                                          std::uint64_t budget = kDefaultBudget) {
    if (policy.subtree != SubtreeMode::Cse) {
        ConsResult dag = inline_forest(input);
        return symbolic_derivative(dag.store, dag.root, wrt, policy, simplify, budget);
    }
    ExprForest forest{input.store().clone_for_append(simplify)};
    for (const Binding& b : input.bindings()) forest.add_binding(b.name, b.root);

    SymbolicResult result{ExprStore{}, kInvalidNode, {}, {}, input.store().size()};
    detail::SharedBuilder builder{forest.store(), wrt,     policy.memoize,
                                  result.log,     {},      &forest,
                                  {},             {}};
    builder.dbinding.resize(input.bindings().size());
    builder.budget.start_calls = forest.store().constructor_calls();
    builder.budget.limit = budget;
    NodeId droot = builder.run(input.main());
    forest.set_main(droot);
    result.deriv_root = droot;
    result.store = forest.store();
    result.store.push_root(droot);
    result.forest = std::move(forest);
    return result;
}

// Node count of a derivative. Share/Cse count distinct derivative-owned
// nodes (reused input subexpressions are pointed at, not counted); Copy
// counts the whole output tree, duplicates included.
inline std::size_t derivative_size(const SymbolicResult& result) {
    if (result.store.mode() == StoreMode::TreeOnly)
        return node_count(result.store, result.deriv_root);
    std::size_t n = 0;
    for (NodeId id : reachable_ids(result.store, result.deriv_root))
        if (id >= result.input_node_limit) ++n;
    return n;
}

inline std::size_t derivative_size(const ExprStore& input, NodeId root, VarId wrt,
                                   DiffPolicy policy, bool simplify = false,
                                   std::uint64_t budget = kDefaultBudget) {
    return derivative_size(symbolic_derivative(input, root, wrt, policy, simplify, budget));
}

}  // namespace dagdiff
