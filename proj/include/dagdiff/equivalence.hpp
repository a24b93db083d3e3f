#pragma once

#include <bit>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/symbolic.hpp"

namespace dagdiff {

// Per-operation-kind comparison of two instrumented runs. Roles are ignored:
// the engines may attribute the first construction of a shared node to
// different rule positions, but the work per kind must match exactly.
struct OpLogVerdict {
    bool equal = true;
    std::map<LogOp, std::pair<std::uint64_t, std::uint64_t>> diffs;  // kind -> (a, b)
};

inline OpLogVerdict compare_op_logs(const OpLog& a, const OpLog& b) {
    OpLogVerdict v;
    std::map<LogOp, std::pair<std::uint64_t, std::uint64_t>> merged;
    for (const auto& [op, count] : a.counters) merged[op].first = count;
    for (const auto& [op, count] : b.counters) merged[op].second = count;
    for (const auto& [op, counts] : merged) {
        if (counts.first != counts.second) {
            v.equal = false;
            v.diffs.emplace(op, counts);
        }
    }
    return v;
}

struct StructuralVerdict {
    bool equal = true;
    std::string mismatch;  // first divergence, as a root-relative path
};

// Graph isomorphism by simultaneous traversal: nodes match when their
// payloads match (variables by name, constants by bit pattern) and the
// pairing is a bijection. Parallel edges must pair with parallel edges.
inline StructuralVerdict compare_structural(const ExprStore& sa, NodeId ra, const ExprStore& sb,
                                            NodeId rb) {
    struct Item {
        NodeId a, b;
        std::string path;
    };
    StructuralVerdict verdict;
    auto differ = [&](const std::string& path, const std::string& why) {
        verdict.equal = false;
        verdict.mismatch = path + ": " + why;
        return verdict;
    };
    std::unordered_map<NodeId, NodeId> ab, ba;
    std::vector<Item> work{{ra, rb, "root"}};
    while (!work.empty()) {
        Item it = work.back();
        work.pop_back();
        auto known = ab.find(it.a);
        if (known != ab.end()) {
            if (known->second != it.b) return differ(it.path, "sharing pattern differs");
            continue;  // pair already verified (or queued) once
        }
        auto rknown = ba.find(it.b);
        if (rknown != ba.end()) return differ(it.path, "sharing pattern differs");
        const Node& na = sa.node(it.a);
        const Node& nb = sb.node(it.b);
        if (na.kind != nb.kind) return differ(it.path, "payload kind differs");
        switch (na.kind) {
            case PayloadKind::Var:
                if (sa.var_name(na.a) != sb.var_name(nb.a))
                    return differ(it.path, "variable name differs");
                break;
            case PayloadKind::Const:
                if (std::bit_cast<std::uint64_t>(na.value) !=
                    std::bit_cast<std::uint64_t>(nb.value))
                    return differ(it.path, "constant differs");
                break;
            case PayloadKind::SymbolRef:
                if (na.a != nb.a) return differ(it.path, "binding reference differs");
                break;
            case PayloadKind::Unary:
                if (na.op != nb.op) return differ(it.path, "operation differs");
                if (na.op == Op::Pow && na.exponent != nb.exponent)
                    return differ(it.path, "exponent differs");
                work.push_back({na.a, nb.a, it.path + ".0"});
                break;
            case PayloadKind::Binary:
                if (na.op != nb.op) return differ(it.path, "operation differs");
                work.push_back({na.b, nb.b, it.path + ".1"});
                work.push_back({na.a, nb.a, it.path + ".0"});
                break;
        }
        ab.emplace(it.a, it.b);
        ba.emplace(it.b, it.a);
    }
    return verdict;
}

struct EquivalenceFailure {
    std::size_t case_index = 0;
    std::uint64_t case_seed = 0;
    std::string variable;
    bool simplify = false;
    std::string reason;
};

struct EquivalenceSummary {
    std::size_t cases = 0;
    std::size_t comparisons = 0;
    std::vector<EquivalenceFailure> failures;
    // Fixed negative control: f = u + u with u = sin(x). Recomputing du
    // instead of memoizing must cost strictly more constructor calls.
    std::uint64_t control_forward_ops = 0;
    std::uint64_t control_memo_off_ops = 0;
    std::uint64_t control_memo_on_ops = 0;
    bool control_gap_shown = false;
};

// Property run behind the equivalence claim: random shared DAGs, every
// reachable variable, simplify off and on; forward mode versus
// symbolic(Share, memoize=on) must log identical per-kind counts and build
// isomorphic derivative graphs.
inline EquivalenceSummary randomized_equivalence_suite(std::uint64_t seed, std::size_t n_cases,
                                                       std::size_t max_nodes) {
    EquivalenceSummary summary;
    summary.cases = n_cases;
    for (std::size_t i = 0; i < n_cases; ++i) {
        std::uint64_t case_seed = seed * 1000003ull + i;
        Rng rng(case_seed);
        GeneratedExpr g = gen_random_dag(rng, max_nodes);
        for (VarId wrt : vars_in(g.store, g.root)) {
            for (bool simplify : {false, true}) {
                ++summary.comparisons;
                ForwardResult fwd = forward_derivative(g.store, g.root, wrt, simplify);
                SymbolicResult sym = symbolic_derivative(
                    g.store, g.root, wrt, DiffPolicy{SubtreeMode::Share, true}, simplify);
                OpLogVerdict logs = compare_op_logs(fwd.table.log, sym.log);
                StructuralVerdict graphs = compare_structural(fwd.store, fwd.deriv_root,
                                                              sym.store, sym.deriv_root);
                if (logs.equal && graphs.equal) continue;
                EquivalenceFailure f;
                f.case_index = i;
                f.case_seed = case_seed;
                f.variable = g.store.var_name(wrt);
                f.simplify = simplify;
                f.reason = !logs.equal ? "op counts differ" : graphs.mismatch;
                summary.failures.push_back(std::move(f));
            }
        }
    }

    // negative control: u + u, u = sin(x), wrt x, simplify off
    ExprStore store;
    NodeId x = store.var("x");
    NodeId u = store.unary(Op::Sin, x);
    NodeId f = store.binary(Op::Add, u, u);
    ForwardResult fwd = forward_derivative(store, f, 0, false);
    SymbolicResult off =
        symbolic_derivative(store, f, 0, DiffPolicy{SubtreeMode::Share, false}, false);
    SymbolicResult on =
        symbolic_derivative(store, f, 0, DiffPolicy{SubtreeMode::Share, true}, false);
    summary.control_forward_ops = fwd.table.log.total();
    summary.control_memo_off_ops = off.log.total();
    summary.control_memo_on_ops = on.log.total();
    summary.control_gap_shown = summary.control_memo_off_ops > summary.control_forward_ops &&
                                compare_op_logs(fwd.table.log, on.log).equal;
    return summary;
}

}  // namespace dagdiff
