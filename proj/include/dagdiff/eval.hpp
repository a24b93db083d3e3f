#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dagdiff/expr.hpp"

namespace dagdiff {

// Variable-id keyed value assignment for one store's variable table.
class Valuation {
  public:
    Valuation() = default;

    void set(VarId var, double value) {
        if (values_.size() <= var) values_.resize(var + 1);
        values_[var] = value;
    }

    bool has(VarId var) const { return var < values_.size() && values_[var].has_value(); }

    double get(VarId var) const { return *values_[var]; }

    // Binds values by variable name. Unknown names are rejected so typos
    // surface instead of silently leaving a variable unbound.
    static Valuation from_names(const ExprStore& store, const std::map<std::string, double>& in) {
        Valuation v;
        for (const auto& [name, value] : in) {
            auto id = store.var_id(name);
            if (!id) throw UnboundVariableError(name);
            v.set(*id, value);
        }
        return v;
    }

  private:
    std::vector<std::optional<double>> values_;
};

namespace detail {

inline double apply_unary(Op op, std::int32_t exponent, double x) {
    switch (op) {
        case Op::Neg: return -x;
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Exp: return std::exp(x);
        case Op::Ln:
            if (x <= 0.0) throw DomainError("ln", x);
            return std::log(x);
        case Op::Sqrt:
            if (x < 0.0) throw DomainError("sqrt", x);
            return std::sqrt(x);
        case Op::Pow: return std::pow(x, double(exponent));
        default: throw StructuralError("binary op applied as unary");
    }
}

inline double apply_binary(Op op, double l, double r) {
    switch (op) {
        case Op::Add: return l + r;
        case Op::Sub: return l - r;
        case Op::Mul: return l * r;
        case Op::Div:
            if (r == 0.0) throw DomainError("div", r);
            return l / r;
        default: throw StructuralError("unary op applied as binary");
    }
}

// Evaluates the subgraph under `root`. `symbol_values`, when present, holds
// one value per registered binding slot (for forest-owned stores).
inline double eval_impl(const ExprStore& store, NodeId root, const Valuation& vals,
                        const std::vector<double>* symbol_values) {
    std::vector<NodeId> order = reachable_ids(store, root);
    std::vector<double> value(store.size(), 0.0);
    for (NodeId id : order) {
        const Node& n = store.node(id);
        switch (n.kind) {
            case PayloadKind::Var:
                if (!vals.has(n.a)) throw UnboundVariableError(store.var_name(n.a));
                value[id] = vals.get(n.a);
                break;
            case PayloadKind::Const: value[id] = n.value; break;
            case PayloadKind::Unary: value[id] = apply_unary(n.op, n.exponent, value[n.a]); break;
            case PayloadKind::Binary: value[id] = apply_binary(n.op, value[n.a], value[n.b]); break;
            case PayloadKind::SymbolRef:
                if (symbol_values == nullptr || n.a >= symbol_values->size())
                    throw StructuralError("SymbolRef evaluated outside its forest");
                value[id] = (*symbol_values)[n.a];
                break;
        }
    }
    return value[root];
}

}  // namespace detail

// Topological sweep over the reachable subgraph; each node is computed once,
// so DAG, unfolded tree, and forest forms of one expression produce bitwise
// identical results.
inline double eval(const ExprStore& store, NodeId root, const Valuation& vals) {
    return detail::eval_impl(store, root, vals, nullptr);
}

// Bindings evaluate first, in order; each SymbolRef reads its binding's value.
inline double eval(const ExprForest& forest, const Valuation& vals) {
    std::vector<double> symbol_values;
    symbol_values.reserve(forest.bindings().size());
    for (const Binding& b : forest.bindings())
        symbol_values.push_back(detail::eval_impl(forest.store(), b.root, vals, &symbol_values));
    return detail::eval_impl(forest.store(), forest.main(), vals, &symbol_values);
}

// Central difference (f(x+h) - f(x-h)) / 2h in the single variable `wrt`.
inline double finite_difference(const ExprStore& store, NodeId root, VarId wrt,
                                const Valuation& vals, double h = 1e-6) {
    Valuation shifted = vals;
    double x = vals.has(wrt) ? vals.get(wrt) : throw UnboundVariableError(store.var_name(wrt));
    shifted.set(wrt, x + h);
    double hi = eval(store, root, shifted);
    shifted.set(wrt, x - h);
    double lo = eval(store, root, shifted);
    return (hi - lo) * (0.5 / h);
}

}  // namespace dagdiff
