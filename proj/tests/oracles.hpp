#pragma once

// Reference implementations used only as oracles by the tests. Everything
// here is plain recursion written straight from the calculus definitions and
// deliberately shares no builder machinery with the engines under test.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dagdiff/dagdiff.hpp"

namespace oracle {

using namespace dagdiff;

// Textbook chain-rule differentiator with a shared-subterm memo. Local
// partial shapes restated from first principles; chaining is always
// Mul(partial, d child) and two-edge results combine as Add(left, right).
inline NodeId ref_diff(ExprStore& s, NodeId id, VarId wrt,
                       std::unordered_map<NodeId, NodeId>& memo) {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const Node n = s.node(id);
    auto chain = [&](NodeId partial, NodeId child) {
        return s.binary(Op::Mul, partial, ref_diff(s, child, wrt, memo));
    };
    NodeId d = 0;
    switch (n.kind) {
        case PayloadKind::Var:
            d = s.constant(n.a == wrt ? 1.0 : 0.0);
            break;
        case PayloadKind::Const:
            d = s.constant(0.0);
            break;
        case PayloadKind::SymbolRef:
            throw std::runtime_error("oracle works on DAGs only");
        case PayloadKind::Unary:
            switch (n.op) {
                case Op::Neg:
                    d = chain(s.constant(-1.0), n.a);
                    break;
                case Op::Sin:
                    d = chain(s.unary(Op::Cos, n.a), n.a);
                    break;
                case Op::Cos:
                    d = chain(s.unary(Op::Neg, s.unary(Op::Sin, n.a)), n.a);
                    break;
                case Op::Exp:
                    d = chain(id, n.a);
                    break;
                case Op::Ln:
                    d = chain(s.binary(Op::Div, s.constant(1.0), n.a), n.a);
                    break;
                case Op::Sqrt:
                    d = chain(s.binary(Op::Div, s.constant(1.0),
                                       s.binary(Op::Mul, s.constant(2.0), id)),
                              n.a);
                    break;
                case Op::Pow:
                    d = chain(s.binary(Op::Mul, s.constant(double(n.exponent)),
                                       s.pow(n.a, n.exponent - 1)),
                              n.a);
                    break;
                default:
                    throw std::runtime_error("oracle: bad unary op");
            }
            break;
        case PayloadKind::Binary: {
            NodeId pl = 0, pr = 0;
            switch (n.op) {
                case Op::Add:
                    pl = s.constant(1.0);
                    pr = s.constant(1.0);
                    break;
                case Op::Sub:
                    pl = s.constant(1.0);
                    pr = s.constant(-1.0);
                    break;
                case Op::Mul:
                    pl = n.b;
                    pr = n.a;
                    break;
                case Op::Div:
                    pl = s.binary(Op::Div, s.constant(1.0), n.b);
                    pr = s.unary(Op::Neg, s.binary(Op::Div, n.a, s.pow(n.b, 2)));
                    break;
                default:
                    throw std::runtime_error("oracle: bad binary op");
            }
            d = s.binary(Op::Add, chain(pl, n.a), chain(pr, n.b));
            break;
        }
    }
    memo.emplace(id, d);
    return d;
}

// Derivative of `root` as a fresh shared graph alongside the input clone.
struct RefResult {
    ExprStore store;
    NodeId root;
};

inline RefResult ref_derivative(const ExprStore& input, NodeId root, VarId wrt) {
    RefResult out{input.clone_for_append(false), 0};
    std::unordered_map<NodeId, NodeId> memo;
    out.root = ref_diff(out.store, root, wrt, memo);
    return out;
}

// Numeric evaluator over the node vector, recursion-free, independent of
// eval.hpp. No domain guards: oracle callers pick safe points.
inline double ref_eval(const ExprStore& s, NodeId root,
                       const std::map<std::string, double>& point) {
    std::vector<double> val(root + 1, 0.0);
    for (NodeId id = 0; id <= root; ++id) {
        const Node n = s.node(id);
        switch (n.kind) {
            case PayloadKind::Var:
                val[id] = point.at(s.var_name(n.a));
                break;
            case PayloadKind::Const:
                val[id] = n.value;
                break;
            case PayloadKind::Unary: {
                double x = val[n.a];
                switch (n.op) {
                    case Op::Neg: val[id] = -x; break;
                    case Op::Sin: val[id] = std::sin(x); break;
                    case Op::Cos: val[id] = std::cos(x); break;
                    case Op::Exp: val[id] = std::exp(x); break;
                    case Op::Ln: val[id] = std::log(x); break;
                    case Op::Sqrt: val[id] = std::sqrt(x); break;
                    case Op::Pow: val[id] = std::pow(x, double(n.exponent)); break;
                    default: throw std::runtime_error("oracle: bad unary op");
                }
                break;
            }
            case PayloadKind::Binary: {
                double l = val[n.a], r = val[n.b];
                switch (n.op) {
                    case Op::Add: val[id] = l + r; break;
                    case Op::Sub: val[id] = l - r; break;
                    case Op::Mul: val[id] = l * r; break;
                    case Op::Div: val[id] = l / r; break;
                    default: throw std::runtime_error("oracle: bad binary op");
                }
                break;
            }
            case PayloadKind::SymbolRef:
                throw std::runtime_error("oracle works on DAGs only");
        }
    }
    return val[root];
}

// Straight-line program interpreter over the parsed AST: numbers only, no
// expression nodes, no trace. The oracle for trace_program values.
inline double ref_eval_ast(const ExprAst& ast, const std::map<std::string, double>& env) {
    switch (ast.kind) {
        case ExprAst::Kind::Number:
            return ast.number;
        case ExprAst::Kind::Name:
            return env.at(ast.name);
        case ExprAst::Kind::Unary: {
            double x = ref_eval_ast(*ast.a, env);
            switch (ast.op) {
                case Op::Neg: return -x;
                case Op::Sin: return std::sin(x);
                case Op::Cos: return std::cos(x);
                case Op::Exp: return std::exp(x);
                case Op::Ln: return std::log(x);
                case Op::Sqrt: return std::sqrt(x);
                case Op::Pow: return std::pow(x, double(ast.exponent));
                default: throw std::runtime_error("oracle: bad unary op");
            }
        }
        case ExprAst::Kind::Binary: {
            double l = ref_eval_ast(*ast.a, env);
            double r = ref_eval_ast(*ast.b, env);
            switch (ast.op) {
                case Op::Add: return l + r;
                case Op::Sub: return l - r;
                case Op::Mul: return l * r;
                case Op::Div: return l / r;
                default: throw std::runtime_error("oracle: bad binary op");
            }
        }
    }
    throw std::runtime_error("oracle: bad ast kind");
}

inline bool ref_compare(CmpOp op, double l, double r) {
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

inline void ref_exec(const std::vector<Stmt>& body, std::map<std::string, double>& env,
                     double& result, bool& returned) {
    for (const Stmt& st : body) {
        if (returned) return;
        switch (st.kind) {
            case Stmt::Kind::Assign:
                env[st.name] = ref_eval_ast(*st.expr, env);
                break;
            case Stmt::Kind::Return:
                result = ref_eval_ast(*st.expr, env);
                returned = true;
                return;
            case Stmt::Kind::If:
                if (ref_compare(st.cmp, ref_eval_ast(*st.lhs, env), ref_eval_ast(*st.rhs, env)))
                    ref_exec(st.body, env, result, returned);
                else
                    ref_exec(st.else_body, env, result, returned);
                break;
            case Stmt::Kind::While:
                while (ref_compare(st.cmp, ref_eval_ast(*st.lhs, env),
                                   ref_eval_ast(*st.rhs, env))) {
                    ref_exec(st.body, env, result, returned);
                    if (returned) return;
                }
                break;
        }
    }
}

// Runs a parsed program on concrete inputs, returning the result value.
inline double ref_run_program(const Program& prog, const std::map<std::string, double>& inputs) {
    std::map<std::string, double> env = inputs;
    double result = 0.0;
    bool returned = false;
    ref_exec(prog.statements, env, result, returned);
    if (!returned) throw std::runtime_error("oracle: program did not return");
    return result;
}

}  // namespace oracle
