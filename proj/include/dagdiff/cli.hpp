#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dagdiff/bench.hpp"
#include "dagdiff/check.hpp"
#include "dagdiff/equivalence.hpp"
#include "dagdiff/errors.hpp"
#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/parser.hpp"
#include "dagdiff/printer.hpp"
#include "dagdiff/symbolic.hpp"
#include "dagdiff/tracer.hpp"
#include "dagdiff/transforms.hpp"

namespace dagdiff::cli {

using ordered_json = nlohmann::ordered_json;

// File and stream failures; mapped to exit code 4.
class IoError : public Error {
  public:
    using Error::Error;
};

namespace detail {

// Arguments ending in .expr or .prog are files, anything else is literal
// source text.
inline std::string read_input(const std::string& arg) {
    if (arg.ends_with(".expr") || arg.ends_with(".prog")) {
        std::ifstream in(arg);
        if (!in) throw IoError("cannot open " + arg);
        std::ostringstream buf;
        buf << in.rdbuf();
        if (in.bad()) throw IoError("cannot read " + arg);
        return buf.str();
    }
    return arg;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("cannot write " + path);
}

inline std::map<std::string, double> parse_input_pairs(const std::vector<std::string>& pairs) {
    std::map<std::string, double> values;
    for (const std::string& pair : pairs) {
        std::size_t eq = pair.find('=');
        if (eq == std::string::npos || eq == 0)
            throw SyntaxError("--input expects name=value, got '" + pair + "'", 1, 1);
        const std::string name = pair.substr(0, eq);
        const std::string text = pair.substr(eq + 1);
        double v = 0.0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || p != text.data() + text.size())
            throw SyntaxError("bad numeric value in '" + pair + "'", 1, 1);
        values[name] = v;
    }
    return values;
}

inline ordered_json log_json(const OpLog& log) {
    ordered_json ops = ordered_json::object();
    for (const auto& [op, count] : log.counters) ops[log_op_name(op)] = count;
    return ordered_json{{"total", log.total()}, {"by_kind", ops}};
}

inline DiffPolicy policy_from(const std::string& name, bool memoize) {
    SubtreeMode mode = SubtreeMode::Share;
    if (name == "copy") mode = SubtreeMode::Copy;
    else if (name == "cse") mode = SubtreeMode::Cse;
    return DiffPolicy{mode, memoize};
}

inline VarId wrt_id(ExprStore& store, const std::string& name) {
    auto id = store.var_id(name);
    return id ? *id : store.make_var(name);  // unknown name: derivative is 0
}

struct DiffOutput {
    std::string text;
    std::string dot;
    std::size_t derivative_size = 0;
    OpLog log;
};

inline DiffOutput run_diff(ExprStore& store, NodeId root, const std::string& wrt,
                           const std::string& mode, DiffPolicy policy, bool simplify,
                           std::uint64_t budget) {
    DiffOutput outp;
    VarId v = wrt_id(store, wrt);
    if (mode == "forward") {
        ForwardResult r = forward_derivative(store, root, v, simplify);
        outp.text = to_text(r.store, r.deriv_root);
        outp.dot = to_dot(r.store, r.deriv_root);
        // count freshly built nodes, like the symbolic modes do
        for (NodeId id : reachable_ids(r.store, r.deriv_root))
            if (id >= r.input_node_limit) ++outp.derivative_size;
        outp.log = r.table.log;
        return outp;
    }
    SymbolicResult r = symbolic_derivative(store, root, v, policy, simplify, budget);
    if (r.forest) {
        outp.text = to_text(*r.forest);
        outp.dot = to_dot(*r.forest);
    } else {
        outp.text = to_text(r.store, r.deriv_root);
        outp.dot = to_dot(r.store, r.deriv_root);
    }
    outp.derivative_size = derivative_size(r);
    outp.log = r.log;
    return outp;
}

}  // namespace detail

// All subcommand work lives here so tests can drive the CLI in-process.
// Returns the process exit code: 0 success, 1 syntax/input error, 2 budget
// or step limit, 3 domain error, 4 I/O error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"expression DAG differentiation workbench"};
    app.require_subcommand(1);
    int rc = 0;

    // shared option state
    std::string input, wrt, mode = "forward", policy_name = "share", dot_path;
    bool memoize = true, simplify = false, json = false, stats = false, forest_out = false;
    std::uint64_t budget = kDefaultBudget, seed = 42;
    std::vector<std::string> input_pairs;
    std::size_t cases = 500, max_nodes = 200, bench_n = 10, samples = 3;
    int k_max = 20;
    double tol = 1e-5;

    auto add_input = [&](CLI::App* cmd) {
        cmd->add_option("source", input, "expression/program text or .expr/.prog file")
            ->required();
    };

    CLI::App* parse_cmd = app.add_subcommand("parse", "parse and reprint an expression");
    add_input(parse_cmd);
    parse_cmd->add_flag("--json", json, "emit JSON");
    parse_cmd->add_option("--dot", dot_path, "write graph description to this path");
    parse_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        if (!dot_path.empty()) detail::write_file(dot_path, to_dot(p.store, p.root));
        if (json) {
            ordered_json vars = ordered_json::array();
            for (VarId v = 0; v < p.store.var_count(); ++v) vars.push_back(p.store.var_name(v));
            out << ordered_json{{"text", to_text(p.store, p.root)},
                                {"nodes", node_count(p.store, p.root)},
                                {"vars", vars}}
                       .dump()
                << "\n";
        } else {
            out << to_text(p.store, p.root) << "\n";
        }
    });

    CLI::App* diff_cmd = app.add_subcommand("diff", "differentiate an expression");
    add_input(diff_cmd);
    diff_cmd->add_option("--wrt", wrt, "variable to differentiate by")->required();
    diff_cmd->add_option("--mode", mode, "forward or symbolic")
        ->check(CLI::IsMember({"forward", "symbolic"}));
    diff_cmd->add_option("--policy", policy_name, "copy, share, or cse (symbolic mode)")
        ->check(CLI::IsMember({"copy", "share", "cse"}));
    diff_cmd->add_flag("--memoize,!--no-memoize", memoize, "memoize subterm derivatives");
    diff_cmd->add_flag("--simplify", simplify, "apply smart-constructor rules");
    diff_cmd->add_option("--budget", budget, "constructor-call budget");
    diff_cmd->add_flag("--json", json, "emit JSON");
    diff_cmd->add_flag("--stats", stats, "also print node counts and the operation log");
    diff_cmd->add_option("--dot", dot_path, "write the derivative graph to this path");
    diff_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        detail::DiffOutput d = detail::run_diff(p.store, p.root, wrt, mode,
                                                detail::policy_from(policy_name, memoize),
                                                simplify, budget);
        if (!dot_path.empty()) detail::write_file(dot_path, d.dot);
        ordered_json stats_json{{"input_nodes", node_count(p.store, p.root)},
                                {"derivative_size", d.derivative_size},
                                {"ops", detail::log_json(d.log)}};
        if (json) {
            ordered_json j{{"derivative", d.text}};
            if (stats) j["stats"] = stats_json;
            out << j.dump() << "\n";
        } else {
            out << d.text << "\n";
            if (stats) out << stats_json.dump() << "\n";
        }
    });

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate an expression");
    add_input(eval_cmd);
    eval_cmd->add_option("--input", input_pairs, "variable binding name=value");
    eval_cmd->add_flag("--json", json, "emit JSON");
    eval_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        Valuation vals =
            Valuation::from_names(p.store, detail::parse_input_pairs(input_pairs));
        double value = eval(p.store, p.root, vals);
        if (json) out << ordered_json{{"value", value}}.dump() << "\n";
        else out << format_double(value) << "\n";
    });

    CLI::App* check_cmd =
        app.add_subcommand("check", "compare all engines against finite differences");
    add_input(check_cmd);
    check_cmd->add_option("--seed", seed, "valuation seed");
    check_cmd->add_option("--tol", tol, "relative tolerance");
    check_cmd->add_flag("--json", json, "emit JSON");
    check_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        Rng rng(seed);
        auto vals = try_safe_valuation(p.store, p.root, rng);
        if (!vals) throw DomainError("no non-singular valuation found for", 0.0);
        DerivativeCheckReport report = check_derivatives(p.store, p.root, *vals, tol);
        if (json) {
            ordered_json rows = ordered_json::array();
            for (const DerivativeCheckRow& r : report.rows)
                rows.push_back(ordered_json{{"var", r.variable},
                                            {"forward", r.forward_value},
                                            {"share", r.share_value},
                                            {"cse", r.cse_value},
                                            {"copy", r.copy_value},
                                            {"fd", r.fd_value},
                                            {"engines_identical", r.engines_identical},
                                            {"pass", r.pass}});
            out << ordered_json{{"pass", report.pass}, {"rows", rows}}.dump() << "\n";
        } else {
            for (const DerivativeCheckRow& r : report.rows)
                out << r.variable << ": engines " << format_double(r.forward_value) << " fd "
                    << format_double(r.fd_value) << (r.pass ? " ok" : " FAIL") << "\n";
        }
        if (!report.pass) rc = 1;
    });

    CLI::App* equiv_cmd = app.add_subcommand(
        "check-equiv", "randomized forward-vs-symbolic equivalence suite");
    equiv_cmd->add_option("--seed", seed, "base seed");
    equiv_cmd->add_option("--cases", cases, "number of random DAGs");
    equiv_cmd->add_option("--max-nodes", max_nodes, "node cap per DAG");
    equiv_cmd->callback([&] {
        EquivalenceSummary s = randomized_equivalence_suite(seed, cases, max_nodes);
        ordered_json failures = ordered_json::array();
        for (const EquivalenceFailure& f : s.failures)
            failures.push_back(ordered_json{{"case", f.case_index},
                                            {"seed", f.case_seed},
                                            {"var", f.variable},
                                            {"simplify", f.simplify},
                                            {"reason", f.reason}});
        out << ordered_json{
                   {"cases", s.cases},
                   {"comparisons", s.comparisons},
                   {"failures", failures},
                   {"negative_control",
                    ordered_json{{"forward_ops", s.control_forward_ops},
                                 {"memo_off_ops", s.control_memo_off_ops},
                                 {"memo_on_ops", s.control_memo_on_ops},
                                 {"gap_shown", s.control_gap_shown}}}}
                   .dump()
            << "\n";
        if (!s.failures.empty() || !s.control_gap_shown) rc = 1;
    });

    CLI::App* unfold_cmd = app.add_subcommand("unfold", "expand a DAG into a tree");
    add_input(unfold_cmd);
    unfold_cmd->add_option("--budget", budget, "maximum tree nodes");
    unfold_cmd->add_flag("--json", json, "emit JSON");
    unfold_cmd->add_option("--dot", dot_path, "write graph description to this path");
    unfold_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        UnfoldResult tree = unfold(p.store, p.root, budget);
        if (!dot_path.empty()) detail::write_file(dot_path, to_dot(tree.store, tree.root));
        if (json)
            out << ordered_json{{"text", to_text(tree.store, tree.root)},
                                {"dag_nodes", node_count(p.store, p.root)},
                                {"tree_nodes", node_count(tree.store, tree.root)}}
                       .dump()
                << "\n";
        else out << to_text(tree.store, tree.root) << "\n";
    });

    CLI::App* forest_cmd =
        app.add_subcommand("to-forest", "name every shared subexpression");
    add_input(forest_cmd);
    forest_cmd->add_flag("--json", json, "emit JSON");
    forest_cmd->add_option("--dot", dot_path, "write graph description to this path");
    forest_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        ExprForest forest = to_forest(p.store, p.root);
        if (!dot_path.empty()) detail::write_file(dot_path, to_dot(forest));
        if (json) {
            ordered_json bindings = ordered_json::array();
            for (const Binding& b : forest.bindings())
                bindings.push_back(ordered_json{
                    {"name", b.name},
                    {"text", to_text(forest.store(), b.root, &forest.bindings())}});
            out << ordered_json{{"bindings", bindings},
                                {"main", to_text(forest.store(), forest.main(),
                                                 &forest.bindings())},
                                {"nodes", node_count(forest)}}
                       .dump()
                << "\n";
        } else {
            out << to_text(forest) << "\n";
        }
    });

    CLI::App* trace_cmd = app.add_subcommand("trace", "run a program, record its trace");
    add_input(trace_cmd);
    trace_cmd->add_option("--input", input_pairs, "parameter binding name=value");
    trace_cmd->add_option("--wrt", wrt, "also differentiate the trace by this variable");
    trace_cmd->add_option("--mode", mode, "forward or symbolic")
        ->check(CLI::IsMember({"forward", "symbolic"}));
    trace_cmd->add_option("--policy", policy_name, "copy, share, or cse (symbolic mode)")
        ->check(CLI::IsMember({"copy", "share", "cse"}));
    trace_cmd->add_flag("--memoize,!--no-memoize", memoize, "memoize subterm derivatives");
    trace_cmd->add_flag("--simplify", simplify, "apply smart-constructor rules");
    trace_cmd->add_option("--budget", budget, "constructor-call budget");
    trace_cmd->add_flag("--json", json, "emit JSON");
    trace_cmd->callback([&] {
        Program prog = parse_program(detail::read_input(input));
        std::map<std::string, double> inputs = detail::parse_input_pairs(input_pairs);
        Trace trace = trace_program(prog, inputs);
        std::optional<double> deriv;
        if (!wrt.empty()) {
            EngineChoice engine{mode == "forward",
                                detail::policy_from(policy_name, memoize)};
            deriv = trace_derivative(prog, inputs, wrt, engine, simplify, budget).derivative;
        }
        if (json) {
            ordered_json branches = ordered_json::array();
            for (const BranchDecision& b : trace.branch_decisions)
                branches.push_back(ordered_json{{"statement", b.statement}, {"taken", b.taken}});
            ordered_json j{{"value", trace.values[trace.root]},
                           {"trace_nodes", node_count(trace.dag, trace.root)},
                           {"trace_text", to_text(trace.dag, trace.root)},
                           {"branches", branches}};
            if (deriv) j["derivative"] = *deriv;
            out << j.dump() << "\n";
        } else {
            out << format_double(trace.values[trace.root]) << "\n";
            if (deriv) out << format_double(*deriv) << "\n";
        }
    });

    CLI::App* bench_cmd = app.add_subcommand("bench", "benchmark drivers");
    bench_cmd->require_subcommand(1);

    CLI::App* speel_cmd =
        bench_cmd->add_subcommand("speelpenning", "full gradient of x1*...*xn");
    speel_cmd->add_option("--n", bench_n, "number of factors");
    speel_cmd->add_option("--seed", seed, "evaluation point seed");
    speel_cmd->callback([&] {
        SpeelpenningReport r = speelpenning_report(bench_n, seed);
        ordered_json comps = ordered_json::array();
        for (const SpeelpenningComponent& c : r.components)
            comps.push_back(ordered_json{{"var", c.variable},
                                         {"forward", c.forward_value},
                                         {"symbolic", c.symbolic_value},
                                         {"closed_form", c.closed_form},
                                         {"forward_ops", c.forward_ops},
                                         {"symbolic_ops", c.symbolic_ops},
                                         {"ops_equal", c.ops_equal}});
        out << ordered_json{{"n", r.n},
                            {"point", r.point},
                            {"components", comps},
                            {"max_rel_err", r.max_rel_err},
                            {"forward_total_ops", r.forward_total_ops},
                            {"symbolic_total_ops", r.symbolic_total_ops},
                            {"all_ops_equal", r.all_ops_equal},
                            {"values_match", r.values_match}}
                   .dump()
            << "\n";
        if (!r.all_ops_equal || !r.values_match) rc = 1;
    });

    CLI::App* swell_cmd = bench_cmd->add_subcommand("swell", "squaring-chain sizes per k");
    swell_cmd->add_option("--k-max", k_max, "largest chain length");
    swell_cmd->add_option("--budget", budget, "construction budget");
    swell_cmd->callback([&] {
        ordered_json rows = ordered_json::array();
        for (const SwellRow& r : swell_rows(k_max, budget))
            rows.push_back(ordered_json{{"k", r.k},
                                        {"dag_nodes", r.dag_nodes},
                                        {"tree_nodes", r.tree_nodes},
                                        {"tree_analytic", r.tree_analytic},
                                        {"forest_nodes", r.forest_nodes},
                                        {"forest_bindings", r.forest_bindings},
                                        {"deriv_share", r.deriv_share},
                                        {"deriv_copy", r.deriv_copy},
                                        {"copy_analytic", r.copy_analytic}});
        out << ordered_json{{"rows", rows}}.dump() << "\n";
    });

    CLI::App* random_cmd =
        bench_cmd->add_subcommand("random", "derivative sizes over random trees");
    random_cmd->add_option("--seed", seed, "generation seed");
    random_cmd->add_option("--samples", samples, "trees per size");
    random_cmd->add_option("--budget", budget, "construction budget");
    random_cmd->callback([&] {
        std::uint64_t b = budget == kDefaultBudget ? 20000000 : budget;
        RandomSizeReport r =
            random_size_report({16, 64, 256, 1024, 4096}, seed, samples, b);
        ordered_json rows = ordered_json::array();
        for (const RandomSizeRow& row : r.rows)
            rows.push_back(ordered_json{{"n", row.n},
                                        {"samples", row.samples},
                                        {"share_mean", row.share_mean},
                                        {"share_max", row.share_max},
                                        {"copy_mean", row.copy_mean},
                                        {"copy_max", row.copy_max}});
        out << ordered_json{{"rows", rows},
                            {"share_slope", r.share_slope},
                            {"copy_slope", r.copy_slope},
                            {"share_within_linear_bound", r.share_within_linear_bound}}
                   .dump()
            << "\n";
    });

    CLI::App* export_cmd = app.add_subcommand("export", "write a graph description file");
    add_input(export_cmd);
    export_cmd->add_option("--dot", dot_path, "output path")->required();
    export_cmd->add_flag("--forest", forest_out, "export the forest form with clusters");
    export_cmd->callback([&] {
        ParsedExpr p = parse_expr(detail::read_input(input));
        if (forest_out) detail::write_file(dot_path, to_dot(to_forest(p.store, p.root)));
        else detail::write_file(dot_path, to_dot(p.store, p.root));
    });

    std::vector<const char*> argv;
    argv.push_back("dagdiff");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    } catch (const SyntaxError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const UnboundVariableError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const BudgetExceededError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const StepLimitError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}

inline int run_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace dagdiff::cli
