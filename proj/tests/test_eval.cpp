#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "dagdiff/eval.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/parser.hpp"
#include "oracles.hpp"

using namespace dagdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("evaluation matches an independent interpreter on random expressions") {
    Rng rng(7001);
    int tested = 0;
    for (int i = 0; i < 200; ++i) {
        GeneratedExpr g = gen_random_expr(rng, 6);
        auto vals = try_safe_valuation(g.store, g.root, rng);
        if (!vals) continue;
        std::map<std::string, double> point;
        for (VarId v = 0; v < g.store.var_count(); ++v)
            if (vals->has(v)) point[g.store.var_name(v)] = vals->get(v);
        double got = eval(g.store, g.root, *vals);
        double want = oracle::ref_eval(g.store, g.root, point);
        CHECK(got == want);  // same operations in the same order: bitwise equal
        ++tested;
    }
    CHECK(tested > 100);
}

TEST_CASE("evaluation of specific forms") {
    ParsedExpr p = parse_expr("sin(x)*cos(y) + x^3/2");
    Valuation vals = Valuation::from_names(p.store, {{"x", 0.7}, {"y", -0.3}});
    double want = std::sin(0.7) * std::cos(-0.3) + std::pow(0.7, 3) / 2.0;
    CHECK_THAT(eval(p.store, p.root, vals), WithinRel(want, 1e-15));

    ParsedExpr q = parse_expr("x^-2");
    Valuation qv = Valuation::from_names(q.store, {{"x", 2.0}});
    CHECK(eval(q.store, q.root, qv) == 0.25);
}

TEST_CASE("domain violations throw") {
    auto eval_one = [](const char* src, double x) {
        ParsedExpr p = parse_expr(src);
        Valuation vals = Valuation::from_names(p.store, {{"x", x}});
        return eval(p.store, p.root, vals);
    };
    CHECK_THROWS_AS(eval_one("ln(x)", 0.0), DomainError);
    CHECK_THROWS_AS(eval_one("ln(x)", -1.0), DomainError);
    CHECK_THROWS_AS(eval_one("sqrt(x)", -0.5), DomainError);
    CHECK_THROWS_AS(eval_one("1/x", 0.0), DomainError);
    CHECK_NOTHROW(eval_one("sqrt(x)", 0.0));
}

TEST_CASE("unbound variables are reported by name") {
    ParsedExpr p = parse_expr("x + y");
    Valuation vals;
    vals.set(*p.store.var_id("x"), 1.0);
    try {
        eval(p.store, p.root, vals);
        FAIL("expected an unbound variable error");
    } catch (const UnboundVariableError& e) {
        CHECK(e.name() == "y");
    }
    CHECK_THROWS_AS(Valuation::from_names(p.store, {{"nope", 1.0}}), UnboundVariableError);
}

TEST_CASE("forest evaluation resolves bindings in order") {
    ExprForest f;
    NodeId x = f.store().var("x");
    BindingId t1 = f.add_binding("t1", f.store().unary(Op::Sin, x));
    NodeId r1 = f.ref(t1);
    BindingId t2 = f.add_binding("t2", f.store().binary(Op::Mul, r1, r1));
    f.set_main(f.store().binary(Op::Add, f.ref(t2), f.ref(t1)));

    Valuation vals;
    vals.set(0, 0.5);
    double want = std::sin(0.5) * std::sin(0.5) + std::sin(0.5);
    CHECK_THAT(eval(f, vals), WithinRel(want, 1e-15));
}

TEST_CASE("finite differences approximate known derivatives") {
    ParsedExpr p = parse_expr("x^2");
    Valuation vals = Valuation::from_names(p.store, {{"x", 1.5}});
    CHECK_THAT(finite_difference(p.store, p.root, *p.store.var_id("x"), vals),
               WithinAbs(3.0, 1e-6));

    ParsedExpr q = parse_expr("exp(x)*y");
    Valuation qv = Valuation::from_names(q.store, {{"x", 0.3}, {"y", 2.0}});
    CHECK_THAT(finite_difference(q.store, q.root, *q.store.var_id("y"), qv),
               WithinAbs(std::exp(0.3), 1e-6));
}
