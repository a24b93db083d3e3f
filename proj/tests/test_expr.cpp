#include <catch2/catch_amalgamated.hpp>

#include "dagdiff/expr.hpp"
#include "dagdiff/errors.hpp"

using namespace dagdiff;

TEST_CASE("hash consing returns one id per structure") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId a = s.binary(Op::Add, x, x);
    NodeId b = s.binary(Op::Add, x, x);
    CHECK(a == b);
    CHECK(s.size() == 2);
    CHECK(s.constructor_calls() == 3);
    CHECK(s.cons_hits() == 1);

    NodeId y = s.var("y");
    CHECK(s.binary(Op::Add, x, y) != a);
}

TEST_CASE("no commutative or algebraic canonicalization") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId y = s.var("y");
    CHECK(s.binary(Op::Add, x, y) != s.binary(Op::Add, y, x));
    CHECK(s.binary(Op::Mul, x, y) != s.binary(Op::Mul, y, x));
    // x - x is not folded to 0
    NodeId d = s.binary(Op::Sub, x, x);
    CHECK(s.node(d).kind == PayloadKind::Binary);
}

TEST_CASE("constants intern by bit pattern") {
    ExprStore s;
    NodeId pz = s.constant(0.0);
    NodeId nz = s.constant(-0.0);
    CHECK(pz != nz);
    CHECK(s.constant(0.0) == pz);
    double qnan = std::numeric_limits<double>::quiet_NaN();
    CHECK(s.constant(qnan) == s.constant(qnan));
}

TEST_CASE("variable table is idempotent and stable") {
    ExprStore s;
    VarId x = s.make_var("x");
    VarId y = s.make_var("y");
    CHECK(s.make_var("x") == x);
    CHECK(s.var_count() == 2);
    CHECK(s.var_name(x) == "x");
    CHECK(s.var_name(y) == "y");
    CHECK(s.var_id("y") == y);
    CHECK_FALSE(s.var_id("z").has_value());
    // two Var nodes for the same variable cons to one node
    CHECK(s.var("x") == s.var("x"));
}

TEST_CASE("tree-only stores append every request") {
    ExprStore s(StoreMode::TreeOnly);
    NodeId x1 = s.var("x");
    NodeId x2 = s.var("x");
    CHECK(x1 != x2);
    CHECK(s.size() == 2);
    CHECK(s.cons_hits() == 0);
}

TEST_CASE("pow carries its exponent in the payload") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId p2 = s.pow(x, 2);
    NodeId p3 = s.pow(x, 3);
    CHECK(p2 != p3);
    CHECK(s.node(p2).exponent == 2);
    CHECK(s.pow(x, 2) == p2);
}

TEST_CASE("smart constructors stay off by default") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId zero = s.constant(0.0);
    NodeId sum = s.binary(Op::Add, x, zero);
    CHECK(sum != x);
    CHECK(s.node(sum).kind == PayloadKind::Binary);
}

TEST_CASE("smart constructor rule set") {
    ExprStore s(StoreMode::HashConsed, true);
    NodeId x = s.var("x");
    NodeId zero = s.constant(0.0);
    NodeId one = s.constant(1.0);

    SECTION("unit laws") {
        CHECK(s.binary(Op::Add, x, zero) == x);
        CHECK(s.binary(Op::Add, zero, x) == x);
        CHECK(s.binary(Op::Mul, x, one) == x);
        CHECK(s.binary(Op::Mul, one, x) == x);
    }
    SECTION("multiplication by zero") {
        NodeId z1 = s.binary(Op::Mul, x, zero);
        NodeId z2 = s.binary(Op::Mul, zero, x);
        CHECK(z1 == zero);
        CHECK(z2 == zero);
    }
    SECTION("negation of a constant folds") {
        NodeId m = s.unary(Op::Neg, s.constant(3.0));
        CHECK(s.node(m).kind == PayloadKind::Const);
        CHECK(s.node(m).value == -3.0);
        // negation of anything else does not
        NodeId nx = s.unary(Op::Neg, x);
        CHECK(s.node(nx).kind == PayloadKind::Unary);
    }
    SECTION("constant folding") {
        NodeId f = s.binary(Op::Add, s.constant(2.0), s.constant(3.0));
        CHECK(s.node(f).kind == PayloadKind::Const);
        CHECK(s.node(f).value == 5.0);
        NodeId q = s.binary(Op::Div, s.constant(1.0), s.constant(4.0));
        CHECK(s.node(q).value == 0.25);
    }
    SECTION("folding that would produce a non-finite value is skipped") {
        NodeId q = s.binary(Op::Div, one, zero);
        CHECK(s.node(q).kind == PayloadKind::Binary);
    }
    SECTION("no subtraction or division unit rules") {
        CHECK(s.node(s.binary(Op::Sub, x, zero)).kind == PayloadKind::Binary);
        CHECK(s.node(s.binary(Op::Div, x, one)).kind == PayloadKind::Binary);
    }
    SECTION("rewrites still count as constructor calls") {
        std::uint64_t before = s.constructor_calls();
        (void)s.binary(Op::Add, x, zero);
        CHECK(s.constructor_calls() == before + 1);
    }
}

TEST_CASE("operation log records every call with its role") {
    ExprStore s;
    OpLog log;
    NodeId x = s.var("x", &log, OpRole::Seed);
    (void)s.binary(Op::Add, x, x, &log, OpRole::FanInAdd);
    (void)s.binary(Op::Add, x, x, &log, OpRole::FanInAdd);  // cons hit still logs
    CHECK(log.total() == 3);
    CHECK(log.count(LogOp::Var) == 1);
    CHECK(log.count(LogOp::Add) == 2);
    CHECK(log.entries.at({LogOp::Add, OpRole::FanInAdd}) == 2);

    OpLog other;
    (void)s.constant(1.0, &other, OpRole::LocalPartial);
    log.merge(other);
    CHECK(log.total() == 4);
    CHECK(log.count(LogOp::Const) == 1);
}

TEST_CASE("children precede parents and reachability is exact") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId y = s.var("y");       // unreachable from root below
    NodeId sx = s.unary(Op::Sin, x);
    NodeId root = s.binary(Op::Mul, sx, x);
    (void)y;

    std::vector<NodeId> ids = reachable_ids(s, root);
    REQUIRE(ids.size() == 3);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(node_count(s, root) == 3);
    for (NodeId id : ids) {
        const Node& n = s.node(id);
        if (n.kind == PayloadKind::Unary) CHECK(n.a < id);
        if (n.kind == PayloadKind::Binary) {
            CHECK(n.a < id);
            CHECK(n.b < id);
        }
    }

    std::vector<VarId> vars = vars_in(s, root);
    REQUIRE(vars.size() == 1);
    CHECK(s.var_name(vars[0]) == "x");
}

TEST_CASE("tree size counts unfolded occurrences and saturates") {
    ExprStore s;
    NodeId c = s.var("x");
    for (int i = 0; i < 3; ++i) c = s.binary(Op::Mul, c, c);
    CHECK(node_count(s, c) == 4);
    CHECK(tree_size(s, c) == 15);  // 2^(3+1) - 1

    NodeId deep = s.var("y");
    for (int i = 0; i < 70; ++i) deep = s.binary(Op::Mul, deep, deep);
    CHECK(tree_size(s, deep) == kTreeSizeCap);
}

TEST_CASE("clone_for_append preserves ids and variables") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId r = s.unary(Op::Sin, x);
    ExprStore c = s.clone_for_append(true);
    CHECK(c.size() == s.size());
    CHECK(c.simplify());
    CHECK(payload_equal(c.node(r), s.node(r)));
    CHECK(c.var_id("x") == s.var_id("x"));
    // appends land after the copied prefix, and consing still sees old nodes
    CHECK(c.unary(Op::Sin, x) == r);
}

TEST_CASE("store rejects malformed payloads") {
    ExprStore s;
    NodeId x = s.var("x");
    CHECK_THROWS_AS(s.make_node(var_node(5)), StructuralError);
    CHECK_THROWS_AS(s.unary(Op::Sin, 99), StructuralError);
    CHECK_THROWS_AS(s.binary(Op::Add, x, 99), StructuralError);
    CHECK_THROWS_AS(s.unary(Op::Add, x), StructuralError);
    CHECK_THROWS_AS(s.binary(Op::Sin, x, x), StructuralError);
    CHECK_THROWS_AS(s.symbol_ref(0), StructuralError);
    CHECK_THROWS_AS(s.push_root(99), StructuralError);
}

TEST_CASE("forest bindings and symbol refs") {
    ExprForest f;
    ExprStore& s = f.store();
    NodeId x = s.var("x");
    NodeId sx = s.unary(Op::Sin, x);
    BindingId t1 = f.add_binding("t1", sx);
    NodeId ref = f.ref(t1);
    NodeId main = f.store().binary(Op::Mul, ref, ref);
    f.set_main(main);

    CHECK(f.bindings().size() == 1);
    CHECK(f.binding(t1).name == "t1");
    CHECK(f.binding(t1).root == sx);
    CHECK(f.main() == main);
    // binding subtree (2) + main subtree (ref + mul)
    CHECK(node_count(f) == 4);

    ExprForest empty;
    CHECK_FALSE(empty.has_main());
    CHECK_THROWS_AS(empty.main(), StructuralError);
    CHECK_THROWS_AS(empty.add_binding("t", 3), StructuralError);
}
