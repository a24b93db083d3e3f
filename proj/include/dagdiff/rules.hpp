#pragma once

#include <array>
#include <vector>

#include "dagdiff/expr.hpp"

namespace dagdiff {

// Which incoming edge of a node a local partial belongs to.
enum class EdgeSide : std::uint8_t { Only, Left, Right };

// d node / d child along one edge. `partial` may be a pre-existing node
// (e.g. the other factor of a product) or freshly constructed.
struct LocalPartial {
    EdgeSide side;
    NodeId child;
    NodeId partial;
};

// One differentiation rule per op. Both engines build their local partials
// through this table, so the constructed shapes (and the logged operations)
// are identical by construction. Rules reference existing nodes where the
// calculus allows it: the partial of Mul(u,v) w.r.t. u is v itself, and the
// partial of Exp(g) is the Exp node being differentiated.
class DerivRuleTable {
  public:
    using Rule = std::vector<LocalPartial> (*)(ExprStore&, NodeId, const Node&, OpLog*);

    DerivRuleTable() {
        rules_[int(Op::Add)] = &rule_add;
        rules_[int(Op::Sub)] = &rule_sub;
        rules_[int(Op::Mul)] = &rule_mul;
        rules_[int(Op::Div)] = &rule_div;
        rules_[int(Op::Neg)] = &rule_neg;
        rules_[int(Op::Sin)] = &rule_sin;
        rules_[int(Op::Cos)] = &rule_cos;
        rules_[int(Op::Exp)] = &rule_exp;
        rules_[int(Op::Ln)] = &rule_ln;
        rules_[int(Op::Sqrt)] = &rule_sqrt;
        rules_[int(Op::Pow)] = &rule_pow;
    }

    bool has_rule(Op op) const { return rules_[int(op)] != nullptr; }

    std::vector<LocalPartial> partials(ExprStore& store, NodeId id, OpLog* log) const {
        const Node& n = store.node(id);
        if (n.kind != PayloadKind::Unary && n.kind != PayloadKind::Binary)
            throw StructuralError("local partials are only defined for operation nodes");
        return rules_[int(n.op)](store, id, n, log);
    }

  private:
    static NodeId lp(ExprStore& s, const Node& proto, OpLog* log) {
        return s.make_node(proto, log, OpRole::LocalPartial);
    }

    static std::vector<LocalPartial> rule_add(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        NodeId one_l = lp(s, const_node(1.0), log);
        NodeId one_r = lp(s, const_node(1.0), log);
        return {{EdgeSide::Left, n.a, one_l}, {EdgeSide::Right, n.b, one_r}};
    }

    static std::vector<LocalPartial> rule_sub(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        NodeId one = lp(s, const_node(1.0), log);
        NodeId minus_one = lp(s, const_node(-1.0), log);
        return {{EdgeSide::Left, n.a, one}, {EdgeSide::Right, n.b, minus_one}};
    }

    static std::vector<LocalPartial> rule_mul(ExprStore&, NodeId, const Node& n, OpLog*) {
        // d(uv)/du = v, d(uv)/dv = u: existing nodes, nothing constructed.
        return {{EdgeSide::Left, n.a, n.b}, {EdgeSide::Right, n.b, n.a}};
    }

    static std::vector<LocalPartial> rule_div(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        // d(u/v)/du = 1/v
        NodeId one = lp(s, const_node(1.0), log);
        NodeId inv = lp(s, binary_node(Op::Div, one, n.b), log);
        // d(u/v)/dv = -(u / v^2)
        NodeId v_sq = lp(s, unary_node(Op::Pow, n.b, 2), log);
        NodeId quot = lp(s, binary_node(Op::Div, n.a, v_sq), log);
        NodeId negated = lp(s, unary_node(Op::Neg, quot), log);
        return {{EdgeSide::Left, n.a, inv}, {EdgeSide::Right, n.b, negated}};
    }

    static std::vector<LocalPartial> rule_neg(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        return {{EdgeSide::Only, n.a, lp(s, const_node(-1.0), log)}};
    }

    static std::vector<LocalPartial> rule_sin(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        return {{EdgeSide::Only, n.a, lp(s, unary_node(Op::Cos, n.a), log)}};
    }

    static std::vector<LocalPartial> rule_cos(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        NodeId sin_g = lp(s, unary_node(Op::Sin, n.a), log);
        return {{EdgeSide::Only, n.a, lp(s, unary_node(Op::Neg, sin_g), log)}};
    }

    static std::vector<LocalPartial> rule_exp(ExprStore&, NodeId id, const Node& n, OpLog*) {
        // d(exp g)/dg = exp g: the node itself.
        return {{EdgeSide::Only, n.a, id}};
    }

    static std::vector<LocalPartial> rule_ln(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        NodeId one = lp(s, const_node(1.0), log);
        return {{EdgeSide::Only, n.a, lp(s, binary_node(Op::Div, one, n.a), log)}};
    }

    static std::vector<LocalPartial> rule_sqrt(ExprStore& s, NodeId id, const Node& n,
                                               OpLog* log) {
        // d(sqrt g)/dg = 1 / (2 * sqrt g), reusing the sqrt node itself.
        NodeId one = lp(s, const_node(1.0), log);
        NodeId two = lp(s, const_node(2.0), log);
        NodeId twice = lp(s, binary_node(Op::Mul, two, id), log);
        return {{EdgeSide::Only, n.a, lp(s, binary_node(Op::Div, one, twice), log)}};
    }

    static std::vector<LocalPartial> rule_pow(ExprStore& s, NodeId, const Node& n, OpLog* log) {
        // d(g^k)/dg = k * g^(k-1)
        NodeId k = lp(s, const_node(double(n.exponent)), log);
        NodeId reduced = lp(s, unary_node(Op::Pow, n.a, n.exponent - 1), log);
        return {{EdgeSide::Only, n.a, lp(s, binary_node(Op::Mul, k, reduced), log)}};
    }

    std::array<Rule, kOpCount> rules_{};
};

inline const DerivRuleTable& deriv_rules() {
    static const DerivRuleTable table;
    return table;
}

// Partials of `id` w.r.t. each of its child edges, left edge first.
inline std::vector<LocalPartial> local_partials(const DerivRuleTable& rules, ExprStore& store,
                                                NodeId id, OpLog* log = nullptr) {
    return rules.partials(store, id, log);
}

}  // namespace dagdiff
