#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dagdiff/errors.hpp"

namespace dagdiff {

using NodeId = std::uint32_t;
using VarId = std::uint32_t;
using BindingId = std::uint32_t;

inline constexpr NodeId kInvalidNode = 0xffffffffu;

// Primitive operation set. Sub and Div are primitive (not desugared into
// Add/Neg or Mul/Pow) so operation counts stay directly comparable across
// engines. Pow carries a signed integer exponent in the node payload.
enum class Op : std::uint8_t { Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Ln, Sqrt, Pow };

inline constexpr int kOpCount = 11;

constexpr bool is_binary_op(Op op) {
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div;
}

constexpr int op_arity(Op op) { return is_binary_op(op) ? 2 : 1; }

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Ln: return "ln";
        case Op::Sqrt: return "sqrt";
        case Op::Pow: return "pow";
    }
    return "?";
}

enum class PayloadKind : std::uint8_t { Var, Const, Unary, Binary, SymbolRef };

// One IR node. Stored flat in an append-only vector; the vector index is the
// node id, and children always have smaller ids than their parents.
// Field use by kind:
//   Var:       a = variable id (name lives in the store's variable table)
//   Const:     value
//   Unary:     op, a = child, exponent (Pow only)
//   Binary:    op, a = left, b = right
//   SymbolRef: a = binding id (only valid in forest-owned stores)
// Unused fields are normalized by the factories below so that payload
// equality and hashing can compare every field bitwise.
struct Node {
    PayloadKind kind;
    Op op;
    std::int32_t exponent;
    NodeId a;
    NodeId b;
    double value;
};

inline Node var_node(VarId v) {
    return Node{PayloadKind::Var, Op::Add, 0, v, kInvalidNode, 0.0};
}

inline Node const_node(double value) {
    return Node{PayloadKind::Const, Op::Add, 0, kInvalidNode, kInvalidNode, value};
}

inline Node unary_node(Op op, NodeId child, std::int32_t exponent = 0) {
    return Node{PayloadKind::Unary, op, op == Op::Pow ? exponent : 0, child, kInvalidNode, 0.0};
}

inline Node binary_node(Op op, NodeId left, NodeId right) {
    return Node{PayloadKind::Binary, op, 0, left, right, 0.0};
}

inline Node symbol_node(BindingId binding) {
    return Node{PayloadKind::SymbolRef, Op::Add, 0, binding, kInvalidNode, 0.0};
}

// Constants compare by bit pattern (so -0.0 and +0.0 are distinct and NaN
// payloads are stable), everything else field by field.
inline bool payload_equal(const Node& x, const Node& y) {
    return x.kind == y.kind && x.op == y.op && x.exponent == y.exponent && x.a == y.a &&
           x.b == y.b &&
           std::bit_cast<std::uint64_t>(x.value) == std::bit_cast<std::uint64_t>(y.value);
}

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

struct NodePayloadHash {
    std::size_t operator()(const Node& n) const {
        std::uint64_t h = detail::mix64(
            (std::uint64_t(std::uint8_t(n.kind)) << 8) | std::uint64_t(std::uint8_t(n.op)));
        h = detail::mix64(h ^ std::uint64_t(std::uint32_t(n.exponent)));
        h = detail::mix64(h ^ ((std::uint64_t(n.a) << 32) | std::uint64_t(n.b)));
        h = detail::mix64(h ^ std::bit_cast<std::uint64_t>(n.value));
        return std::size_t(h);
    }
};

struct NodePayloadEq {
    bool operator()(const Node& x, const Node& y) const { return payload_equal(x, y); }
};

// ----------------------------------------------------------------------------
// Operation log
// ----------------------------------------------------------------------------

// Label of a construction operation: the requested payload shape, before any
// smart-constructor rewriting.
enum class LogOp : std::uint8_t {
    Const, Var, SymbolRef, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Ln, Sqrt, Pow
};

inline const char* log_op_name(LogOp op) {
    switch (op) {
        case LogOp::Const: return "const";
        case LogOp::Var: return "var";
        case LogOp::SymbolRef: return "symbol-ref";
        case LogOp::Add: return "add";
        case LogOp::Sub: return "sub";
        case LogOp::Mul: return "mul";
        case LogOp::Div: return "div";
        case LogOp::Neg: return "neg";
        case LogOp::Sin: return "sin";
        case LogOp::Cos: return "cos";
        case LogOp::Exp: return "exp";
        case LogOp::Ln: return "ln";
        case LogOp::Sqrt: return "sqrt";
        case LogOp::Pow: return "pow";
    }
    return "?";
}

inline LogOp log_op_of(const Node& proto) {
    switch (proto.kind) {
        case PayloadKind::Var: return LogOp::Var;
        case PayloadKind::Const: return LogOp::Const;
        case PayloadKind::SymbolRef: return LogOp::SymbolRef;
        default:
            switch (proto.op) {
                case Op::Add: return LogOp::Add;
                case Op::Sub: return LogOp::Sub;
                case Op::Mul: return LogOp::Mul;
                case Op::Div: return LogOp::Div;
                case Op::Neg: return LogOp::Neg;
                case Op::Sin: return LogOp::Sin;
                case Op::Cos: return LogOp::Cos;
                case Op::Exp: return LogOp::Exp;
                case Op::Ln: return LogOp::Ln;
                case Op::Sqrt: return LogOp::Sqrt;
                case Op::Pow: return LogOp::Pow;
            }
    }
    return LogOp::Const;
}

// Why a derivative-construction operation happened.
enum class OpRole : std::uint8_t { Seed, LocalPartial, ChainMultiply, FanInAdd };

inline const char* role_name(OpRole role) {
    switch (role) {
        case OpRole::Seed: return "seed";
        case OpRole::LocalPartial: return "local-partial";
        case OpRole::ChainMultiply: return "chain-multiply";
        case OpRole::FanInAdd: return "fan-in-add";
    }
    return "?";
}

// Multiset of derivative-construction operations. One entry is recorded per
// instrumented constructor call (the operation is performed whether or not
// the cons table already held an identical node), so counts measure work,
// not storage. Ordered maps keep iteration deterministic.
struct OpLog {
    std::map<LogOp, std::uint64_t> counters;
    std::map<std::pair<LogOp, OpRole>, std::uint64_t> entries;

    void record(LogOp op, OpRole role) {
        ++counters[op];
        ++entries[{op, role}];
    }

    void merge(const OpLog& other) {
        for (const auto& [op, n] : other.counters) counters[op] += n;
        for (const auto& [key, n] : other.entries) entries[key] += n;
    }

    std::uint64_t total() const {
        std::uint64_t sum = 0;
        for (const auto& [op, n] : counters) sum += n;
        return sum;
    }

    std::uint64_t count(LogOp op) const {
        auto it = counters.find(op);
        return it == counters.end() ? 0 : it->second;
    }
};

// ----------------------------------------------------------------------------
// Expression store
// ----------------------------------------------------------------------------

// HashConsed: structurally identical construction requests return the same
// node id (maximal sharing). TreeOnly: every request appends, so no node is
// ever shared (used for unfolded trees and Copy-policy derivative output).
enum class StoreMode : std::uint8_t { HashConsed, TreeOnly };

class ExprStore {
  public:
    explicit ExprStore(StoreMode mode = StoreMode::HashConsed, bool simplify = false)
        : mode_(mode), simplify_(simplify) {}

    StoreMode mode() const { return mode_; }
    bool simplify() const { return simplify_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    const Node& node(NodeId id) const {
        if (id >= nodes_.size()) throw StructuralError("node id out of range");
        return nodes_[id];
    }

    // --- variable table -----------------------------------------------------

    // Registers `name` if new; returns its id either way. Ids are dense and
    // ordered by first registration (= first appearance when parsing).
    VarId make_var(const std::string& name) {
        auto it = var_index_.find(name);
        if (it != var_index_.end()) return it->second;
        VarId id = VarId(var_names_.size());
        var_names_.push_back(name);
        var_index_.emplace(name, id);
        return id;
    }

    std::optional<VarId> var_id(const std::string& name) const {
        auto it = var_index_.find(name);
        if (it == var_index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& var_name(VarId id) const {
        if (id >= var_names_.size()) throw StructuralError("variable id out of range");
        return var_names_[id];
    }

    std::size_t var_count() const { return var_names_.size(); }

    // --- node construction --------------------------------------------------

    // The one instrumented constructor. Every call with a log attached
    // records exactly one entry labeled with the requested payload shape,
    // before simplification or cons lookup.
    NodeId make_node(const Node& proto, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        validate(proto);
        ++calls_;
        if (log != nullptr) log->record(log_op_of(proto), role);
        if (simplify_) {
            if (auto simplified = try_simplify(proto)) return *simplified;
        }
        return intern(proto);
    }

    NodeId var(const std::string& name, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        return make_node(var_node(make_var(name)), log, role);
    }

    NodeId constant(double v, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        return make_node(const_node(v), log, role);
    }

    NodeId unary(Op op, NodeId child, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        return make_node(unary_node(op, child), log, role);
    }

    NodeId pow(NodeId base, std::int32_t exponent, OpLog* log = nullptr,
               OpRole role = OpRole::Seed) {
        return make_node(unary_node(Op::Pow, base, exponent), log, role);
    }

    NodeId binary(Op op, NodeId left, NodeId right, OpLog* log = nullptr,
                  OpRole role = OpRole::Seed) {
        return make_node(binary_node(op, left, right), log, role);
    }

    NodeId symbol_ref(BindingId binding, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        return make_node(symbol_node(binding), log, role);
    }

    // --- forest support -----------------------------------------------------

    // SymbolRef payloads are only valid for binding slots registered here;
    // ExprForest registers one slot per binding it adds.
    BindingId register_symbol() { return symbol_count_++; }
    std::uint32_t symbol_count() const { return symbol_count_; }

    // --- bookkeeping ----------------------------------------------------------

    void push_root(NodeId id) {
        if (id >= nodes_.size()) throw StructuralError("root id out of range");
        roots_.push_back(id);
    }

    const std::vector<NodeId>& roots() const { return roots_; }

    // Copy of this store ready to receive derivative nodes: same nodes, same
    // ids, same variable table, requested simplify behavior for new nodes.
    ExprStore clone_for_append(bool simplify) const {
        ExprStore out(*this);
        out.simplify_ = simplify;
        return out;
    }

    std::uint64_t constructor_calls() const { return calls_; }
    std::uint64_t cons_hits() const { return cons_hits_; }

  private:
    void validate(const Node& proto) const {
        switch (proto.kind) {
            case PayloadKind::Var:
                if (proto.a >= var_names_.size())
                    throw StructuralError("Var payload references unregistered variable id");
                break;
            case PayloadKind::Const:
                break;
            case PayloadKind::Unary:
                if (is_binary_op(proto.op)) throw StructuralError("binary op in Unary payload");
                if (proto.a >= nodes_.size()) throw StructuralError("Unary child out of range");
                break;
            case PayloadKind::Binary:
                if (!is_binary_op(proto.op)) throw StructuralError("unary op in Binary payload");
                if (proto.a >= nodes_.size() || proto.b >= nodes_.size())
                    throw StructuralError("Binary child out of range");
                break;
            case PayloadKind::SymbolRef:
                if (proto.a >= symbol_count_)
                    throw StructuralError("SymbolRef to unregistered binding");
                break;
        }
    }

    // Append or reuse; never simplifies, never logs.
    NodeId intern(const Node& proto) {
        if (mode_ == StoreMode::HashConsed) {
            auto it = cons_.find(proto);
            if (it != cons_.end()) {
                ++cons_hits_;
                return it->second;
            }
        }
        NodeId id = NodeId(nodes_.size());
        nodes_.push_back(proto);
        if (mode_ == StoreMode::HashConsed) cons_.emplace(proto, id);
        return id;
    }

    bool is_const_bits(NodeId id, double v) const {
        const Node& n = nodes_[id];
        return n.kind == PayloadKind::Const &&
               std::bit_cast<std::uint64_t>(n.value) == std::bit_cast<std::uint64_t>(v);
    }

    // Fixed rule set: x+0, 0+x, x*1, 1*x, x*0, 0*x, Neg(Const), and binary
    // constant folding (skipped when the folded value is not finite, so
    // stores never gain inf/NaN constants here). Anything not matched falls
    // through to normal construction.
    std::optional<NodeId> try_simplify(const Node& proto) {
        if (proto.kind == PayloadKind::Unary && proto.op == Op::Neg) {
            const Node& c = nodes_[proto.a];
            if (c.kind == PayloadKind::Const) return intern(const_node(-c.value));
            return std::nullopt;
        }
        if (proto.kind != PayloadKind::Binary) return std::nullopt;
        const Node& l = nodes_[proto.a];
        const Node& r = nodes_[proto.b];
        if (l.kind == PayloadKind::Const && r.kind == PayloadKind::Const) {
            double folded;
            switch (proto.op) {
                case Op::Add: folded = l.value + r.value; break;
                case Op::Sub: folded = l.value - r.value; break;
                case Op::Mul: folded = l.value * r.value; break;
                case Op::Div: folded = l.value / r.value; break;
                default: return std::nullopt;
            }
            if (std::isfinite(folded)) return intern(const_node(folded));
            return std::nullopt;
        }
        switch (proto.op) {
            case Op::Add:
                if (is_const_bits(proto.a, 0.0)) return proto.b;
                if (is_const_bits(proto.b, 0.0)) return proto.a;
                break;
            case Op::Mul:
                if (is_const_bits(proto.a, 1.0)) return proto.b;
                if (is_const_bits(proto.b, 1.0)) return proto.a;
                if (is_const_bits(proto.a, 0.0) || is_const_bits(proto.b, 0.0))
                    return intern(const_node(0.0));
                break;
            default:
                break;
        }
        return std::nullopt;
    }

    StoreMode mode_;
    bool simplify_;
    std::vector<Node> nodes_;
    std::unordered_map<Node, NodeId, NodePayloadHash, NodePayloadEq> cons_;
    std::vector<std::string> var_names_;
    std::unordered_map<std::string, VarId> var_index_;
    std::uint32_t symbol_count_ = 0;
    std::vector<NodeId> roots_;
    std::uint64_t calls_ = 0;
    std::uint64_t cons_hits_ = 0;
};

// ----------------------------------------------------------------------------
// Reachability and size helpers
// ----------------------------------------------------------------------------

inline void mark_reachable(const ExprStore& store, NodeId root, std::vector<char>& mark) {
    if (root >= store.size()) throw StructuralError("root id out of range");
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        if (mark[id]) continue;
        mark[id] = 1;
        const Node& n = store.node(id);
        if (n.kind == PayloadKind::Unary) {
            stack.push_back(n.a);
        } else if (n.kind == PayloadKind::Binary) {
            stack.push_back(n.a);
            stack.push_back(n.b);
        }
    }
}

inline std::vector<char> reachable_mask(const ExprStore& store, NodeId root) {
    std::vector<char> mark(store.size(), 0);
    mark_reachable(store, root, mark);
    return mark;
}

// Ids reachable from `root`, ascending. Children precede parents, so this is
// a topological order.
inline std::vector<NodeId> reachable_ids(const ExprStore& store, NodeId root) {
    std::vector<char> mark = reachable_mask(store, root);
    std::vector<NodeId> ids;
    for (NodeId id = 0; id < store.size(); ++id)
        if (mark[id]) ids.push_back(id);
    return ids;
}

// Distinct nodes reachable from `root`. In a TreeOnly store nothing is
// shared, so this is also the tree node count.
inline std::size_t node_count(const ExprStore& store, NodeId root) {
    return reachable_ids(store, root).size();
}

// Variable ids reachable from `root`, ascending.
inline std::vector<VarId> vars_in(const ExprStore& store, NodeId root) {
    std::vector<char> mark = reachable_mask(store, root);
    std::vector<char> seen(store.var_count(), 0);
    for (NodeId id = 0; id < store.size(); ++id) {
        if (!mark[id]) continue;
        const Node& n = store.node(id);
        if (n.kind == PayloadKind::Var) seen[n.a] = 1;
    }
    std::vector<VarId> vars;
    for (VarId v = 0; v < seen.size(); ++v)
        if (seen[v]) vars.push_back(v);
    return vars;
}

// Values above this are reported as "at least this big"; the DP saturates
// instead of overflowing.
inline constexpr std::uint64_t kTreeSizeCap = 1ull << 62;

// Size of the fully unfolded tree below `root` (each shared node counted once
// per path). SymbolRef counts as a single leaf. Pure arithmetic; nothing is
// built.
inline std::uint64_t tree_size(const ExprStore& store, NodeId root) {
    std::vector<NodeId> order = reachable_ids(store, root);
    std::vector<std::uint64_t> ts(store.size(), 0);
    auto saturating_add = [](std::uint64_t x, std::uint64_t y) {
        std::uint64_t s = x + y;
        if (s < x || s > kTreeSizeCap) return kTreeSizeCap;
        return s;
    };
    for (NodeId id : order) {
        const Node& n = store.node(id);
        switch (n.kind) {
            case PayloadKind::Unary: ts[id] = saturating_add(1, ts[n.a]); break;
            case PayloadKind::Binary:
                ts[id] = saturating_add(1, saturating_add(ts[n.a], ts[n.b]));
                break;
            default: ts[id] = 1; break;
        }
    }
    return ts[root];
}

// ----------------------------------------------------------------------------
// Forests
// ----------------------------------------------------------------------------

struct Binding {
    std::string name;
    NodeId root;
};

// A store plus named bindings and a main root. Bindings may be referenced
// via SymbolRef nodes by later bindings and by main; binding k's subtree can
// only reference bindings 0..k-1 because slots are registered in order.
class ExprForest {
  public:
    ExprForest() : store_(StoreMode::HashConsed, false) {}
    explicit ExprForest(ExprStore store) : store_(std::move(store)) {}

    ExprStore& store() { return store_; }
    const ExprStore& store() const { return store_; }

    BindingId add_binding(std::string name, NodeId root) {
        if (root >= store_.size()) throw StructuralError("binding root out of range");
        // The store may have been cloned with symbol slots already registered
        // (binding ids must keep matching SymbolRef payloads), so only extend.
        BindingId id = static_cast<BindingId>(bindings_.size());
        while (store_.symbol_count() <= id) store_.register_symbol();
        bindings_.push_back(Binding{std::move(name), root});
        return id;
    }

    NodeId ref(BindingId binding, OpLog* log = nullptr, OpRole role = OpRole::Seed) {
        return store_.symbol_ref(binding, log, role);
    }

    const std::vector<Binding>& bindings() const { return bindings_; }

    const Binding& binding(BindingId id) const {
        if (id >= bindings_.size()) throw StructuralError("binding id out of range");
        return bindings_[id];
    }

    void set_main(NodeId id) {
        if (id >= store_.size()) throw StructuralError("main root out of range");
        main_ = id;
    }

    NodeId main() const {
        if (main_ == kInvalidNode) throw StructuralError("forest has no main root");
        return main_;
    }

    bool has_main() const { return main_ != kInvalidNode; }

  private:
    ExprStore store_;
    std::vector<Binding> bindings_;
    NodeId main_ = kInvalidNode;
};

// Distinct nodes reachable from all binding roots plus main. Each SymbolRef
// node counts as one node.
inline std::size_t node_count(const ExprForest& forest) {
    std::vector<char> mark(forest.store().size(), 0);
    for (const Binding& b : forest.bindings()) mark_reachable(forest.store(), b.root, mark);
    if (forest.has_main()) mark_reachable(forest.store(), forest.main(), mark);
    std::size_t n = 0;
    for (char m : mark) n += (m != 0);
    return n;
}

}  // namespace dagdiff
