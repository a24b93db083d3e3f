#pragma once

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dagdiff/errors.hpp"
#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/parser.hpp"
#include "dagdiff/symbolic.hpp"

namespace dagdiff {

struct BranchDecision {
    StmtId statement;
    bool taken;
};

// Result of running a program at one concrete input: a straight-line DAG of
// the arithmetic that actually executed. Control flow leaves no nodes here,
// only entries in `branch_decisions`.
struct Trace {
    ExprStore dag;
    NodeId root = kInvalidNode;
    Valuation inputs;
    std::vector<double> values;  // per node id
    std::vector<BranchDecision> branch_decisions;
};

struct TraceOptions {
    std::size_t step_limit = 100000;  // interpreted statements
};

namespace detail {

// Numeric interpretation of a condition operand. Reads bound names' values;
// builds no nodes.
inline double eval_ast(const ExprAst& ast,
                       const std::unordered_map<std::string, NodeId>& env,
                       const std::vector<double>& values) {
    switch (ast.kind) {
        case ExprAst::Kind::Number:
            return ast.number;
        case ExprAst::Kind::Name: {
            auto it = env.find(ast.name);
            if (it == env.end()) throw UnboundVariableError(ast.name);
            return values[it->second];
        }
        case ExprAst::Kind::Unary:
            return apply_unary(ast.op, ast.exponent, eval_ast(*ast.a, env, values));
        case ExprAst::Kind::Binary:
            return apply_binary(ast.op, eval_ast(*ast.a, env, values),
                                eval_ast(*ast.b, env, values));
    }
    throw StructuralError("corrupt syntax tree");
}

inline bool compare(CmpOp op, double l, double r) {
    switch (op) {
        case CmpOp::Lt: return l < r;
        case CmpOp::Le: return l <= r;
        case CmpOp::Gt: return l > r;
        case CmpOp::Ge: return l >= r;
        case CmpOp::Eq: return l == r;
        case CmpOp::Ne: return l != r;
    }
    return false;
}

struct TraceInterp {
    Trace& trace;
    std::unordered_map<std::string, NodeId> env;
    std::size_t steps = 0;
    std::size_t step_limit;

    void count_step() {
        if (++steps > step_limit) throw StepLimitError(step_limit);
    }

    // Values are computed per appended node; consing means a repeated
    // subexpression is computed once. Simplification may skip or add nodes,
    // so sync by store size rather than assuming one node per call.
    void sync_values() {
        for (NodeId id = static_cast<NodeId>(trace.values.size()); id < trace.dag.size(); ++id) {
            const Node& n = trace.dag.node(id);
            double v = 0.0;
            switch (n.kind) {
                case PayloadKind::Var: v = trace.inputs.get(n.a); break;
                case PayloadKind::Const: v = n.value; break;
                case PayloadKind::Unary: v = apply_unary(n.op, n.exponent, trace.values[n.a]); break;
                case PayloadKind::Binary:
                    v = apply_binary(n.op, trace.values[n.a], trace.values[n.b]);
                    break;
                case PayloadKind::SymbolRef:
                    throw StructuralError("SymbolRef in a trace");
            }
            trace.values.push_back(v);
        }
    }

    NodeId lower(const ExprAst& ast) {
        NodeId id = lower_expr(trace.dag, ast, [&](const std::string& name) {
            auto it = env.find(name);
            if (it == env.end()) throw UnboundVariableError(name);
            return it->second;
        });
        sync_values();
        return id;
    }

    bool condition(const Stmt& s) {
        double l = eval_ast(*s.lhs, env, trace.values);
        double r = eval_ast(*s.rhs, env, trace.values);
        return compare(s.cmp, l, r);
    }

    void exec_block(const std::vector<Stmt>& stmts) {
        for (const Stmt& s : stmts) {
            switch (s.kind) {
                case Stmt::Kind::Assign:
                    count_step();
                    env[s.name] = lower(*s.expr);
                    break;
                case Stmt::Kind::Return:
                    count_step();
                    trace.root = lower(*s.expr);
                    break;
                case Stmt::Kind::If: {
                    count_step();
                    bool taken = condition(s);
                    trace.branch_decisions.push_back({s.id, taken});
                    exec_block(taken ? s.body : s.else_body);
                    break;
                }
                case Stmt::Kind::While:
                    for (;;) {
                        count_step();
                        bool taken = condition(s);
                        trace.branch_decisions.push_back({s.id, taken});
                        if (!taken) break;
                        exec_block(s.body);
                    }
                    break;
            }
        }
    }
};

}  // namespace detail

// Interprets the program at `inputs`, building the execution-trace DAG.
// Every assignment lowers its expression into the trace store (bound names
// resolve to the node ids they were assigned); conditions pick branches
// numerically and are recorded, never lowered.
inline Trace trace_program(const Program& program, const std::map<std::string, double>& inputs,
                           TraceOptions opts = {}) {
    Trace trace;
    detail::TraceInterp interp{trace, {}, 0, opts.step_limit};
    for (const std::string& param : program.params) {
        auto it = inputs.find(param);
        if (it == inputs.end()) throw UnboundVariableError(param);
        NodeId node = trace.dag.var(param);
        interp.env[param] = node;
        trace.inputs.set(trace.dag.node(node).a, it->second);
    }
    interp.sync_values();
    interp.exec_block(program.statements);
    trace.dag.push_root(trace.root);
    return trace;
}

struct EngineChoice {
    bool forward = true;
    DiffPolicy policy{};  // used when forward == false
};

struct TraceDerivative {
    double value;
    double derivative;
    Trace trace;
};

// Runs the program, then differentiates the trace with the chosen engine and
// evaluates at the same inputs. The derivative is valid on the traced branch.
inline TraceDerivative trace_derivative(const Program& program,
                                        const std::map<std::string, double>& inputs,
                                        const std::string& wrt, EngineChoice engine = {},
                                        bool simplify = false,
                                        std::uint64_t budget = kDefaultBudget,
                                        TraceOptions opts = {}) {
    Trace trace = trace_program(program, inputs, opts);
    auto wrt_id = trace.dag.var_id(wrt);
    if (!wrt_id) throw UnboundVariableError(wrt);
    double value = trace.values[trace.root];

    auto valuation_for = [&](const ExprStore& store) {
        Valuation vals;
        for (const auto& [name, v] : inputs) {
            auto id = store.var_id(name);
            if (id) vals.set(*id, v);
        }
        return vals;
    };

    double derivative = 0.0;
    if (engine.forward) {
        ForwardResult r = forward_derivative(trace.dag, trace.root, *wrt_id, simplify);
        derivative = eval(r.store, r.deriv_root, valuation_for(r.store));
    } else {
        SymbolicResult r =
            symbolic_derivative(trace.dag, trace.root, *wrt_id, engine.policy, simplify, budget);
        derivative = r.forest ? eval(*r.forest, valuation_for(r.forest->store()))
                              : eval(r.store, r.deriv_root, valuation_for(r.store));
    }
    return TraceDerivative{value, derivative, std::move(trace)};
}

}  // namespace dagdiff
