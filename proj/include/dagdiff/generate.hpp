#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/transforms.hpp"

namespace dagdiff {

// Seeded generator with the few draw shapes the test corpus needs. All draws
// go through mt19937_64 directly (std distributions vary across standard
// library implementations; reproducibility across toolchains matters more
// than perfect uniformity here).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    // [0, 1)
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool chance(double p) { return unit() < p; }

    int int_range(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

  private:
    std::mt19937_64 gen_;
};

struct GeneratedExpr {
    ExprStore store;
    NodeId root = kInvalidNode;
};

namespace detail {

inline Op random_unary_op(Rng& rng) {
    static const Op ops[] = {Op::Neg, Op::Sin, Op::Cos, Op::Exp, Op::Ln, Op::Sqrt, Op::Pow};
    return ops[rng.below(7)];
}

inline Op random_binary_op(Rng& rng) {
    static const Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div};
    return ops[rng.below(4)];
}

inline double multi_parent_fraction(const ExprStore& store, NodeId root) {
    std::vector<char> mask = reachable_mask(store, root);
    std::vector<std::uint32_t> parents = parent_edge_counts(store, mask);
    std::size_t total = 0, multi = 0;
    for (NodeId id = 0; id < store.size(); ++id) {
        if (!mask[id]) continue;
        ++total;
        if (parents[id] >= 2) ++multi;
    }
    return total == 0 ? 0.0 : static_cast<double>(multi) / static_cast<double>(total);
}

}  // namespace detail

// Random hash-consed DAG exercising every operation kind, with sharing
// forced: at least 20% of the reachable nodes have two or more incoming
// edges, and at least one variable is reachable. `max_nodes` caps the
// reachable size.
inline GeneratedExpr gen_random_dag(Rng& rng, std::size_t max_nodes) {
    if (max_nodes < 12) max_nodes = 12;
    GeneratedExpr g;
    ExprStore& store = g.store;

    int n_vars = rng.int_range(1, 4);
    std::vector<NodeId> pool;
    for (int i = 1; i <= n_vars; ++i) pool.push_back(store.var("x" + std::to_string(i)));
    int n_consts = rng.int_range(0, 2);
    for (int i = 0; i < n_consts; ++i) pool.push_back(store.constant(rng.range(0.5, 2.5)));

    auto pick = [&]() -> NodeId {
        // half the picks come from the most recent few nodes, for depth
        if (rng.chance(0.5)) {
            std::uint64_t back = rng.below(std::min<std::uint64_t>(5, pool.size()));
            return pool[pool.size() - 1 - back];
        }
        return pool[rng.below(pool.size())];
    };

    std::size_t target = 6 + rng.below(std::max<std::size_t>(1, max_nodes * 3 / 4 - 5));
    std::size_t attempts = 0;
    while (store.size() < target && attempts < target * 20) {
        ++attempts;
        NodeId id;
        if (rng.chance(0.45)) {
            Op op = detail::random_unary_op(rng);
            id = op == Op::Pow ? store.pow(pick(), rng.int_range(2, 4))
                               : store.unary(op, pick());
        } else {
            id = store.binary(detail::random_binary_op(rng), pick(), pick());
        }
        pool.push_back(id);  // consing may return an old id; keep it anyway
    }
    g.root = static_cast<NodeId>(store.size() - 1);

    // Force sharing (and a reachable variable) by folding u-squared terms
    // into the root until one node in five has multiple parents.
    std::size_t guard = 0;
    while (store.size() + 3 <= max_nodes && guard++ < 200) {
        bool has_var = !vars_in(store, g.root).empty();
        if (has_var && detail::multi_parent_fraction(store, g.root) >= 0.20) break;
        NodeId u = has_var ? pool[rng.below(pool.size())] : pool[0];
        NodeId m = store.binary(Op::Mul, u, u);
        g.root = store.binary(Op::Add, g.root, m);
        pool.push_back(m);
    }
    store.push_root(g.root);
    return g;
}

// Random expression tree with exactly `n` reachable nodes and no sharing.
// Leaves favor x1 so differentiating w.r.t. x1 is non-trivial.
inline GeneratedExpr gen_random_tree(Rng& rng, std::size_t n) {
    for (;;) {
        GeneratedExpr g{ExprStore(StoreMode::TreeOnly, false), kInvalidNode};
        ExprStore& store = g.store;
        // build(k) emits a subtree of exactly k nodes
        auto build = [&](auto&& self, std::size_t k) -> NodeId {
            if (k == 1) {
                double r = rng.unit();
                if (r < 0.60) return store.var("x1");
                if (r < 0.85) return store.var("x" + std::to_string(rng.int_range(2, 3)));
                return store.constant(rng.range(0.5, 2.0));
            }
            if (k == 2 || rng.chance(0.35)) {
                Op op = detail::random_unary_op(rng);
                NodeId child = self(self, k - 1);
                return op == Op::Pow ? store.pow(child, rng.int_range(2, 3))
                                     : store.unary(op, child);
            }
            std::size_t left = 1 + rng.below(k - 2);
            NodeId a = self(self, left);
            NodeId b = self(self, k - 1 - left);
            return store.binary(detail::random_binary_op(rng), a, b);
        };
        g.root = build(build, n);
        bool has_x1 = false;
        for (VarId v : vars_in(store, g.root)) has_x1 = has_x1 || store.var_name(v) == "x1";
        if (!has_x1 && n > 1) continue;  // want a live x1 path
        store.push_root(g.root);
        return g;
    }
}

// Random hash-consed expression of bounded depth over x1..x3, for numeric
// derivative checks. Sharing arises only from consing coincidences.
inline GeneratedExpr gen_random_expr(Rng& rng, int max_depth) {
    GeneratedExpr g;
    ExprStore& store = g.store;
    auto build = [&](auto&& self, int depth) -> NodeId {
        if (depth >= max_depth || rng.chance(0.20)) {
            if (rng.chance(0.75)) return store.var("x" + std::to_string(rng.int_range(1, 3)));
            return store.constant(rng.range(0.5, 2.0));
        }
        if (rng.chance(0.44)) {
            Op op = detail::random_unary_op(rng);
            NodeId child = self(self, depth + 1);
            return op == Op::Pow ? store.pow(child, rng.int_range(2, 3))
                                 : store.unary(op, child);
        }
        NodeId a = self(self, depth + 1);
        NodeId b = self(self, depth + 1);
        return store.binary(detail::random_binary_op(rng), a, b);
    };
    g.root = build(build, 0);
    store.push_root(g.root);
    return g;
}

// Draws variable values in [-2, 2] and accepts only points that keep every
// intermediate comfortably inside the operations' domains, so central
// differences at h = 1e-6 stay accurate:
//   |div denominator| >= 1e-2, ln/sqrt arguments >= 5e-2,
//   |exp argument| <= 6, |pow base| >= 1e-1 for negative exponents,
//   every intermediate |value| <= 1e3.
inline std::optional<Valuation> try_safe_valuation(const ExprStore& store, NodeId root, Rng& rng,
                                                   int tries = 200) {
    std::vector<NodeId> order = reachable_ids(store, root);
    std::vector<VarId> vars = vars_in(store, root);
    for (int attempt = 0; attempt < tries; ++attempt) {
        Valuation vals;
        for (VarId v : vars) vals.set(v, rng.range(-2.0, 2.0));
        std::vector<double> value(store.size(), 0.0);
        bool ok = true;
        for (std::size_t i = 0; ok && i < order.size(); ++i) {
            const Node& n = store.node(order[i]);
            double v = 0.0;
            switch (n.kind) {
                case PayloadKind::Var: v = vals.get(n.a); break;
                case PayloadKind::Const: v = n.value; break;
                case PayloadKind::Unary: {
                    double x = value[n.a];
                    if (n.op == Op::Ln && x < 5e-2) ok = false;
                    else if (n.op == Op::Sqrt && x < 5e-2) ok = false;
                    else if (n.op == Op::Exp && std::abs(x) > 6.0) ok = false;
                    else if (n.op == Op::Pow && n.exponent < 0 && std::abs(x) < 1e-1) ok = false;
                    else v = detail::apply_unary(n.op, n.exponent, x);
                    break;
                }
                case PayloadKind::Binary: {
                    double l = value[n.a], r = value[n.b];
                    if (n.op == Op::Div && std::abs(r) < 1e-2) ok = false;
                    else v = detail::apply_binary(n.op, l, r);
                    break;
                }
                case PayloadKind::SymbolRef:
                    ok = false;
                    break;
            }
            if (!ok) break;
            if (!std::isfinite(v) || std::abs(v) > 1e3) {
                ok = false;
                break;
            }
            value[order[i]] = v;
        }
        if (ok) return vals;
    }
    return std::nullopt;
}

}  // namespace dagdiff
