#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <vector>

#include "dagdiff/expr.hpp"

namespace dagdiff {

// Shortest representation that parses back to the same bits.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

namespace detail {

// Printing precedence. 5 = atom, 4 = power, 3 = unary minus (and negative
// literals, which print with a leading '-'), 2 = mul/div, 1 = add/sub.
inline int print_prec(const ExprStore& store, NodeId id) {
    const Node& n = store.node(id);
    switch (n.kind) {
        case PayloadKind::Var:
        case PayloadKind::SymbolRef:
            return 5;
        case PayloadKind::Const:
            return std::signbit(n.value) ? 3 : 5;
        case PayloadKind::Unary:
            if (n.op == Op::Neg) return 3;
            if (n.op == Op::Pow) return 4;
            return 5;
        case PayloadKind::Binary:
            return (n.op == Op::Add || n.op == Op::Sub) ? 1 : 2;
    }
    return 5;
}

inline const char* op_symbol(Op op) {
    switch (op) {
        case Op::Add: return "+";
        case Op::Sub: return "-";
        case Op::Mul: return "*";
        case Op::Div: return "/";
        default: return op_name(op);
    }
}

inline std::string symbol_ref_name(const std::vector<Binding>* bindings, BindingId id) {
    if (bindings != nullptr && id < bindings->size()) return (*bindings)[id].name;
    return "@" + std::to_string(id);
}

}  // namespace detail

// Pretty form with minimal parentheses; reparsing yields a structurally
// identical DAG. A left-associative chain prints bare, anything grouped the
// other way keeps its parentheses, and a negative literal under Neg prints
// as -(c) so the literal fold cannot absorb it. SymbolRefs print as their
// binding's name when `bindings` is given.
inline std::string to_text(const ExprStore& store, NodeId root,
                           const std::vector<Binding>* bindings = nullptr) {
    // phase 0 opens a node, later phases resume it after a child completes
    struct Frame {
        NodeId node;
        std::uint8_t phase;
        bool parens;
    };
    std::string out;
    std::vector<Frame> work{{root, 0, false}};
    while (!work.empty()) {
        Frame f = work.back();
        work.pop_back();
        const Node& n = store.node(f.node);
        switch (n.kind) {
            case PayloadKind::Var:
                out += store.var_name(n.a);
                break;
            case PayloadKind::Const:
                if (f.parens) {
                    out += '(';
                    out += format_double(n.value);
                    out += ')';
                } else {
                    out += format_double(n.value);
                }
                break;
            case PayloadKind::SymbolRef:
                out += detail::symbol_ref_name(bindings, n.a);
                break;
            case PayloadKind::Unary:
                if (n.op == Op::Neg) {
                    if (f.phase == 0) {
                        if (f.parens) out += '(';
                        out += '-';
                        const Node& c = store.node(n.a);
                        bool cp = c.kind == PayloadKind::Const || detail::print_prec(store, n.a) < 3;
                        work.push_back({f.node, 1, f.parens});
                        work.push_back({n.a, 0, cp});
                    } else if (f.parens) {
                        out += ')';
                    }
                } else if (n.op == Op::Pow) {
                    if (f.phase == 0) {
                        if (f.parens) out += '(';
                        work.push_back({f.node, 1, f.parens});
                        work.push_back({n.a, 0, detail::print_prec(store, n.a) < 5});
                    } else {
                        out += '^';
                        out += std::to_string(n.exponent);
                        if (f.parens) out += ')';
                    }
                } else {
                    if (f.phase == 0) {
                        if (f.parens) out += '(';
                        out += op_name(n.op);
                        out += '(';
                        work.push_back({f.node, 1, f.parens});
                        work.push_back({n.a, 0, false});
                    } else {
                        out += ')';
                        if (f.parens) out += ')';
                    }
                }
                break;
            case PayloadKind::Binary: {
                int prec = detail::print_prec(store, f.node);
                if (f.phase == 0) {
                    if (f.parens) out += '(';
                    work.push_back({f.node, 1, f.parens});
                    work.push_back({n.a, 0, detail::print_prec(store, n.a) < prec});
                } else if (f.phase == 1) {
                    out += ' ';
                    out += detail::op_symbol(n.op);
                    out += ' ';
                    work.push_back({f.node, 2, f.parens});
                    work.push_back({n.b, 0, detail::print_prec(store, n.b) <= prec});
                } else if (f.parens) {
                    out += ')';
                }
                break;
            }
        }
    }
    return out;
}

// Let-binding form: `let t1 = ...; let t2 = ...; main`.
inline std::string to_text(const ExprForest& forest) {
    std::string out;
    for (const Binding& b : forest.bindings()) {
        out += "let ";
        out += b.name;
        out += " = ";
        out += to_text(forest.store(), b.root, &forest.bindings());
        out += "; ";
    }
    out += to_text(forest.store(), forest.main(), &forest.bindings());
    return out;
}

namespace detail {

inline std::string dot_label(const ExprStore& store, NodeId id,
                             const std::vector<Binding>* bindings) {
    const Node& n = store.node(id);
    switch (n.kind) {
        case PayloadKind::Var: return store.var_name(n.a);
        case PayloadKind::Const: return format_double(n.value);
        case PayloadKind::SymbolRef: return symbol_ref_name(bindings, n.a);
        case PayloadKind::Unary:
            if (n.op == Op::Pow) return "^" + std::to_string(n.exponent);
            return op_name(n.op);
        case PayloadKind::Binary: return op_symbol(n.op);
    }
    return "?";
}

inline void dot_node_line(std::string& out, const ExprStore& store, NodeId id,
                          const std::vector<Binding>* bindings, const char* indent) {
    out += indent;
    out += 'n';
    out += std::to_string(id);
    out += " [label=\"";
    out += dot_label(store, id, bindings);
    out += "\"];\n";
}

inline void dot_edge_lines(std::string& out, const ExprStore& store,
                           const std::vector<char>& mask) {
    // child -> parent, so arrows follow the direction values flow
    for (NodeId id = 0; id < mask.size(); ++id) {
        if (!mask[id]) continue;
        const Node& n = store.node(id);
        if (n.kind == PayloadKind::Unary) {
            out += "    n" + std::to_string(n.a) + " -> n" + std::to_string(id) + ";\n";
        } else if (n.kind == PayloadKind::Binary) {
            out += "    n" + std::to_string(n.a) + " -> n" + std::to_string(id) + ";\n";
            out += "    n" + std::to_string(n.b) + " -> n" + std::to_string(id) + ";\n";
        }
    }
}

}  // namespace detail

// Graph-description text: one node line and one line per edge, ordered by id.
inline std::string to_dot(const ExprStore& store, NodeId root) {
    std::vector<char> mask = reachable_mask(store, root);
    std::string out = "digraph expr {\n";
    for (NodeId id = 0; id < mask.size(); ++id)
        if (mask[id]) detail::dot_node_line(out, store, id, nullptr, "    ");
    detail::dot_edge_lines(out, store, mask);
    out += "}\n";
    return out;
}

// Forest form: one cluster per binding plus one for main. A node shared by
// several trees lands in the first cluster that reaches it.
inline std::string to_dot(const ExprForest& forest) {
    const ExprStore& store = forest.store();
    std::vector<char> assigned(store.size(), 0);
    std::string out = "digraph expr {\n";
    auto emit_cluster = [&](const std::string& label, NodeId root, std::size_t index) {
        std::vector<char> mask = reachable_mask(store, root);
        out += "    subgraph cluster_" + std::to_string(index) + " {\n";
        out += "        label=\"" + label + "\";\n";
        for (NodeId id = 0; id < mask.size(); ++id) {
            if (!mask[id] || assigned[id]) continue;
            assigned[id] = 1;
            detail::dot_node_line(out, store, id, &forest.bindings(), "        ");
        }
        out += "    }\n";
    };
    std::size_t index = 0;
    for (const Binding& b : forest.bindings()) emit_cluster(b.name, b.root, index++);
    emit_cluster("main", forest.main(), index);

    std::vector<char> mask(store.size(), 0);
    for (const Binding& b : forest.bindings()) mark_reachable(store, b.root, mask);
    mark_reachable(store, forest.main(), mask);
    detail::dot_edge_lines(out, store, mask);
    out += "}\n";
    return out;
}

}  // namespace dagdiff
