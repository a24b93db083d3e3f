#include <catch2/catch_amalgamated.hpp>

#include "dagdiff/equivalence.hpp"
#include "dagdiff/eval.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/parser.hpp"
#include "dagdiff/printer.hpp"
#include "dagdiff/symbolic.hpp"
#include "dagdiff/transforms.hpp"
#include "oracles.hpp"

using namespace dagdiff;
using Catch::Matchers::WithinRel;

namespace {

ExprStore squaring(int k, NodeId& root) {
    ExprStore s;
    root = s.var("x");
    for (int i = 0; i < k; ++i) root = s.binary(Op::Mul, root, root);
    return s;
}

// left-comb product x1*x2*...*xn
ExprStore left_comb(int n, NodeId& root) {
    ExprStore s;
    root = s.var("x1");
    for (int i = 2; i <= n; ++i)
        root = s.binary(Op::Mul, root, s.var("x" + std::to_string(i)));
    return s;
}

}  // namespace

TEST_CASE("shared-subtree derivatives match the reference differentiator") {
    Rng rng(601);
    for (int i = 0; i < 50; ++i) {
        GeneratedExpr g = gen_random_dag(rng, 50);
        for (VarId v : vars_in(g.store, g.root)) {
            SymbolicResult sym =
                symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true});
            oracle::RefResult ref = oracle::ref_derivative(g.store, g.root, v);
            StructuralVerdict verdict =
                compare_structural(sym.store, sym.deriv_root, ref.store, ref.root);
            INFO("case " << i << " wrt " << g.store.var_name(v) << ": " << verdict.mismatch);
            REQUIRE(verdict.equal);
        }
    }
}

TEST_CASE("memoization changes work, never the result") {
    Rng rng(602);
    for (int i = 0; i < 30; ++i) {
        GeneratedExpr g = gen_random_dag(rng, 40);
        VarId v = vars_in(g.store, g.root).front();
        SymbolicResult on = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true});
        SymbolicResult off =
            symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, false});

        StructuralVerdict verdict =
            compare_structural(on.store, on.deriv_root, off.store, off.deriv_root);
        INFO(verdict.mismatch);
        CHECK(verdict.equal);
        CHECK(on.deriv_root == off.deriv_root);  // consing makes the recomputation land
        CHECK(derivative_size(on) == derivative_size(off));

        // recomputation can only add operations
        CHECK(off.log.total() >= on.log.total());
    }
}

TEST_CASE("operation counts for a reused subterm") {
    // f = u + u with u = sin(x)
    ExprStore s;
    NodeId x = s.var("x");
    NodeId u = s.unary(Op::Sin, x);
    NodeId f = s.binary(Op::Add, u, u);

    SymbolicResult on = symbolic_derivative(s, f, 0, {SubtreeMode::Share, true});
    CHECK(on.log.total() == 8);
    CHECK(on.log.count(LogOp::Const) == 3);
    CHECK(on.log.count(LogOp::Cos) == 1);
    CHECK(on.log.count(LogOp::Mul) == 3);
    CHECK(on.log.count(LogOp::Add) == 1);

    // without memoization u is differentiated twice
    SymbolicResult off = symbolic_derivative(s, f, 0, {SubtreeMode::Share, false});
    CHECK(off.log.total() == 11);
    CHECK(off.log.count(LogOp::Const) == 4);
    CHECK(off.log.count(LogOp::Cos) == 2);
    CHECK(off.log.count(LogOp::Mul) == 4);
    CHECK(off.log.count(LogOp::Add) == 1);
}

TEST_CASE("copy mode equals unfolding the shared derivative") {
    Rng rng(603);
    int tested = 0;
    for (int i = 0; i < 40; ++i) {
        GeneratedExpr g = gen_random_dag(rng, 30);
        VarId v = vars_in(g.store, g.root).front();
        SymbolicResult shared =
            symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true});
        if (tree_size(shared.store, shared.deriv_root) > 20000) continue;

        SymbolicResult copy = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Copy, true});
        CHECK(copy.store.mode() == StoreMode::TreeOnly);

        UnfoldResult unfolded = unfold(shared.store, shared.deriv_root, 20000);
        StructuralVerdict verdict =
            compare_structural(copy.store, copy.deriv_root, unfolded.store, unfolded.root);
        INFO("case " << i << ": " << verdict.mismatch);
        REQUIRE(verdict.equal);
        CHECK(derivative_size(copy) == node_count(unfolded.store, unfolded.root));
        ++tested;
    }
    CHECK(tested >= 25);
}

TEST_CASE("copy mode logs the same counts with and without memoization") {
    Rng rng(604);
    for (int i = 0; i < 15; ++i) {
        GeneratedExpr g = gen_random_dag(rng, 25);
        VarId v = vars_in(g.store, g.root).front();
        if (tree_size(g.store, g.root) > 5000) continue;
        SymbolicResult on = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Copy, true});
        SymbolicResult off = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Copy, false});
        OpLogVerdict verdict = compare_op_logs(on.log, off.log);
        INFO("case " << i);
        CHECK(verdict.equal);
        StructuralVerdict sv =
            compare_structural(on.store, on.deriv_root, off.store, off.deriv_root);
        CHECK(sv.equal);
    }
}

TEST_CASE("derivative sizes for the left-comb product") {
    NodeId root = 0;
    ExprStore s = left_comb(10, root);
    VarId x1 = *s.var_id("x1");

    CHECK(derivative_size(s, root, x1, {SubtreeMode::Copy, true}) == 127);
    CHECK(derivative_size(s, root, x1, {SubtreeMode::Share, true}) == 29);

    // size grows quadratically for copy, linearly for share
    for (int n : {3, 5, 8}) {
        NodeId r = 0;
        ExprStore t = left_comb(n, r);
        VarId v = *t.var_id("x1");
        CHECK(derivative_size(t, r, v, {SubtreeMode::Copy, true}) ==
              std::size_t(n) * n + 3 * std::size_t(n) - 3);
        CHECK(derivative_size(t, r, v, {SubtreeMode::Share, true}) == 3 * std::size_t(n) - 1);
    }
}

TEST_CASE("derivative sizes for squaring chains") {
    for (int k : {1, 2, 3, 5, 8}) {
        NodeId root = 0;
        ExprStore s = squaring(k, root);
        CHECK(derivative_size(s, root, 0, {SubtreeMode::Share, true}) == 2 * std::size_t(k) + 1);
        CHECK(derivative_size(s, root, 0, {SubtreeMode::Copy, true}) ==
              (std::size_t(k) + 1) * (std::size_t(1) << (k + 1)) - 1);
    }
}

TEST_CASE("a fresh variable has derivative size three") {
    ParsedExpr p = parse_expr("sin(x)");
    CHECK(derivative_size(p.store, p.root, *p.store.var_id("x"), {SubtreeMode::Share, true}) ==
          3);  // cos(x), 1, and their product
}

TEST_CASE("cse mode presents the shared graph as a forest") {
    ExprStore s;
    NodeId x = s.var("x");
    NodeId u = s.unary(Op::Sin, x);
    NodeId f = s.binary(Op::Mul, u, u);

    SymbolicResult share = symbolic_derivative(s, f, 0, {SubtreeMode::Share, true});
    SymbolicResult cse = symbolic_derivative(s, f, 0, {SubtreeMode::Cse, true});

    // identical construction work
    OpLogVerdict logs = compare_op_logs(share.log, cse.log);
    CHECK(logs.equal);
    CHECK(derivative_size(share) == derivative_size(cse));

    REQUIRE(cse.forest.has_value());
    ConsResult inlined = inline_forest(*cse.forest);
    StructuralVerdict verdict =
        compare_structural(inlined.store, inlined.root, share.store, share.deriv_root);
    INFO(verdict.mismatch);
    CHECK(verdict.equal);

    // u is multi-parent in the derivative graph, so it earns a binding
    CHECK_FALSE(cse.forest->bindings().empty());
    CHECK(node_count(*cse.forest) ==
          node_count(share.store, share.deriv_root) + cse.forest->bindings().size());
}

TEST_CASE("differentiating a forest keeps named derivatives") {
    ExprForest forest;
    NodeId x = forest.store().var("x");
    BindingId t1 = forest.add_binding("t1", forest.store().unary(Op::Sin, x));
    NodeId r1 = forest.ref(t1);
    forest.set_main(forest.store().binary(Op::Mul, r1, r1));

    SECTION("cse keeps the binding structure") {
        SymbolicResult r = symbolic_derivative(forest, 0, {SubtreeMode::Cse, true});
        REQUIRE(r.forest.has_value());
        bool has_dt1 = false;
        for (const Binding& b : r.forest->bindings()) has_dt1 |= (b.name == "dt1");
        CHECK(has_dt1);

        Valuation vals;
        vals.set(0, 0.7);
        double want = 2.0 * std::sin(0.7) * std::cos(0.7);
        CHECK_THAT(eval(*r.forest, vals), WithinRel(want, 1e-14));
    }
    SECTION("share inlines first") {
        SymbolicResult r = symbolic_derivative(forest, 0, {SubtreeMode::Share, true});
        CHECK_FALSE(r.forest.has_value());
        Valuation vals;
        vals.set(0, 0.7);
        double want = 2.0 * std::sin(0.7) * std::cos(0.7);
        CHECK_THAT(eval(r.store, r.deriv_root, vals), WithinRel(want, 1e-14));
    }
}

TEST_CASE("dag differentiation rejects stray symbol references") {
    ExprForest forest;
    NodeId x = forest.store().var("x");
    BindingId t = forest.add_binding("t1", forest.store().unary(Op::Sin, x));
    NodeId main = forest.store().binary(Op::Mul, forest.ref(t), forest.ref(t));
    forest.set_main(main);
    CHECK_THROWS_AS(
        symbolic_derivative(forest.store(), main, 0, {SubtreeMode::Share, true}),
        StructuralError);
}

TEST_CASE("budgets stop runaway construction") {
    NodeId root = 0;
    ExprStore s = squaring(20, root);

    // copy would need (k+1)*2^(k+1) - 1 nodes; the default budget refuses
    CHECK_THROWS_AS(symbolic_derivative(s, root, 0, {SubtreeMode::Copy, true}),
                    BudgetExceededError);
    // share needs 2k+1 new nodes and sails through
    CHECK_NOTHROW(symbolic_derivative(s, root, 0, {SubtreeMode::Share, true}));
    // tiny explicit budgets stop share mode too
    CHECK_THROWS_AS(symbolic_derivative(s, root, 0, {SubtreeMode::Share, true}, false, 3),
                    BudgetExceededError);

    try {
        symbolic_derivative(s, root, 0, {SubtreeMode::Copy, true}, false, 1000);
        FAIL("expected budget rejection");
    } catch (const BudgetExceededError& e) {
        CHECK(e.budget() == 1000);
        CHECK(e.estimated() >= 1000);
    }
}

TEST_CASE("store simplification shortens derivatives without changing values") {
    SECTION("the square rule collapses to x + x") {
        ParsedExpr p = parse_expr("x*x");
        SymbolicResult r = symbolic_derivative(p.store, p.root, 0, {SubtreeMode::Share, true},
                                               true);
        CHECK(to_text(r.store, r.deriv_root) == "x + x");
    }
    SECTION("values are bit-identical with and without simplification") {
        Rng rng(605);
        int tested = 0;
        for (int i = 0; i < 30; ++i) {
            GeneratedExpr g = gen_random_dag(rng, 40);
            auto vals = try_safe_valuation(g.store, g.root, rng);
            if (!vals) continue;
            VarId v = vars_in(g.store, g.root).front();
            SymbolicResult plain =
                symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true});
            SymbolicResult simp =
                symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true}, true);
            CHECK(derivative_size(simp) <= derivative_size(plain));
            CHECK(eval(simp.store, simp.deriv_root, *vals) ==
                  eval(plain.store, plain.deriv_root, *vals));
            ++tested;
        }
        CHECK(tested > 15);
    }
}

TEST_CASE("subtree policies degrade monotonically") {
    Rng rng(606);
    for (int i = 0; i < 25; ++i) {
        GeneratedExpr g = gen_random_dag(rng, 30);
        VarId v = vars_in(g.store, g.root).front();
        SymbolicResult share = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Share, true});
        if (tree_size(share.store, share.deriv_root) > 50000) continue;
        SymbolicResult copy = symbolic_derivative(g.store, g.root, v, {SubtreeMode::Copy, true},
                                                  false, 100000);
        // a tree can never beat the shared graph it unfolds
        CHECK(derivative_size(copy) >= derivative_size(share));
        CHECK(copy.log.total() >= share.log.total());
    }
}
