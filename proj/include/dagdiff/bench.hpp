#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dagdiff/equivalence.hpp"
#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/generate.hpp"
#include "dagdiff/symbolic.hpp"
#include "dagdiff/transforms.hpp"

namespace dagdiff {

// Least-squares slope of y against x. Callers pass log-log points to read
// off a growth exponent.
inline double fit_slope(const std::vector<std::pair<double, double>>& points) {
    double n = static_cast<double>(points.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

// ----------------------------------------------------------------------------
// Speelpenning: f = x1 * x2 * ... * xn, full gradient
// ----------------------------------------------------------------------------

struct SpeelpenningComponent {
    std::string variable;
    double forward_value = 0.0;
    double symbolic_value = 0.0;  // Cse, memoize=on
    double closed_form = 0.0;     // product of the other coordinates
    std::uint64_t forward_ops = 0;
    std::uint64_t symbolic_ops = 0;
    bool ops_equal = false;  // per-kind equality, not just totals
};

struct SpeelpenningReport {
    std::size_t n = 0;
    std::vector<double> point;
    std::vector<SpeelpenningComponent> components;
    double max_rel_err = 0.0;  // worst engine-vs-closed-form, either engine
    std::uint64_t forward_total_ops = 0;
    std::uint64_t symbolic_total_ops = 0;
    bool all_ops_equal = true;
    bool values_match = true;  // max_rel_err <= 1e-12
};

inline SpeelpenningReport speelpenning_report(std::size_t n, std::uint64_t point_seed) {
    SpeelpenningReport report;
    report.n = n;

    ExprStore store;
    std::vector<NodeId> xs;
    for (std::size_t i = 1; i <= n; ++i) xs.push_back(store.var("x" + std::to_string(i)));
    NodeId product = xs[0];
    for (std::size_t i = 1; i < n; ++i) product = store.binary(Op::Mul, product, xs[i]);
    store.push_root(product);

    Rng rng(point_seed);
    Valuation vals;
    for (std::size_t i = 0; i < n; ++i) {
        double v = rng.range(0.5, 1.5);
        report.point.push_back(v);
        vals.set(static_cast<VarId>(i), v);
    }

    for (std::size_t j = 0; j < n; ++j) {
        SpeelpenningComponent c;
        c.variable = store.var_name(static_cast<VarId>(j));
        c.closed_form = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (i != j) c.closed_form *= report.point[i];

        ForwardResult fwd = forward_derivative(store, product, static_cast<VarId>(j), false);
        c.forward_value = eval(fwd.store, fwd.deriv_root, vals);
        c.forward_ops = fwd.table.log.total();

        SymbolicResult sym = symbolic_derivative(store, product, static_cast<VarId>(j),
                                                 DiffPolicy{SubtreeMode::Cse, true}, false);
        c.symbolic_value = eval(sym.store, sym.deriv_root, vals);
        c.symbolic_ops = sym.log.total();
        c.ops_equal = compare_op_logs(fwd.table.log, sym.log).equal;

        double denom = std::abs(c.closed_form);
        double rel_f = std::abs(c.forward_value - c.closed_form) / denom;
        double rel_s = std::abs(c.symbolic_value - c.closed_form) / denom;
        report.max_rel_err = std::max({report.max_rel_err, rel_f, rel_s});
        report.forward_total_ops += c.forward_ops;
        report.symbolic_total_ops += c.symbolic_ops;
        report.all_ops_equal = report.all_ops_equal && c.ops_equal;
        report.components.push_back(std::move(c));
    }
    report.values_match = report.max_rel_err <= 1e-12;
    return report;
}

// ----------------------------------------------------------------------------
// Expression swell on the squaring chain x, c1 = x*x, c_i = c_{i-1}*c_{i-1}
// ----------------------------------------------------------------------------

struct SwellRow {
    int k = 0;
    std::uint64_t dag_nodes = 0;
    std::uint64_t tree_nodes = 0;
    bool tree_analytic = false;  // too big to build within budget
    std::uint64_t forest_nodes = 0;
    std::uint64_t forest_bindings = 0;
    std::uint64_t deriv_share = 0;  // Share == Cse by construction
    std::uint64_t deriv_copy = 0;
    bool copy_analytic = false;
};

// Chain of k squarings as a consed DAG (k+1 nodes).
inline GeneratedExpr squaring_chain(int k) {
    GeneratedExpr g;
    NodeId c = g.store.var("x");
    for (int i = 0; i < k; ++i) c = g.store.binary(Op::Mul, c, c);
    g.root = c;
    g.store.push_root(c);
    return g;
}

// Copy-policy derivative size of the k-chain: s_k = (k+1) * 2^(k+1) - 1.
// Follows from s_k = 2 s_{k-1} + 2 t_{k-1} + 3 with t_k = 2^(k+1) - 1 the
// unfolded tree size and s_0 = 1 (the bare seed).
inline std::uint64_t copy_chain_derivative_size(int k) {
    return (std::uint64_t(k) + 1) * (std::uint64_t(1) << (k + 1)) - 1;
}

inline std::vector<SwellRow> swell_rows(int k_max, std::uint64_t budget = kDefaultBudget) {
    std::vector<SwellRow> rows;
    for (int k = 1; k <= k_max; ++k) {
        GeneratedExpr g = squaring_chain(k);
        SwellRow row;
        row.k = k;
        SwellReport sizes = swell_report(g.store, g.root, budget);
        row.dag_nodes = sizes.dag_nodes;
        row.tree_nodes = sizes.tree_nodes;
        row.tree_analytic = sizes.tree_analytic;
        row.forest_nodes = sizes.forest_nodes;
        row.forest_bindings = sizes.forest_bindings;

        row.deriv_share = derivative_size(g.store, g.root, 0,
                                          DiffPolicy{SubtreeMode::Share, true}, false, budget);
        std::uint64_t copy_size = copy_chain_derivative_size(k);
        if (copy_size <= budget) {
            row.deriv_copy = derivative_size(g.store, g.root, 0,
                                             DiffPolicy{SubtreeMode::Copy, true}, false, budget);
        } else {
            row.deriv_copy = copy_size;
            row.copy_analytic = true;
        }
        rows.push_back(row);
    }
    return rows;
}

// ----------------------------------------------------------------------------
// Random-tree derivative sizes (the O(n) vs O(n^2) bound material)
// ----------------------------------------------------------------------------

struct RandomSizeRow {
    std::size_t n = 0;
    std::size_t samples = 0;
    double share_mean = 0.0;
    std::size_t share_max = 0;
    double copy_mean = 0.0;
    std::uint64_t copy_max = 0;
};

struct RandomSizeReport {
    std::vector<RandomSizeRow> rows;
    double share_slope = 0.0;  // log-log, against mean sizes
    double copy_slope = 0.0;
    bool share_within_linear_bound = true;  // share size <= 10 n everywhere
};

inline RandomSizeReport random_size_report(const std::vector<std::size_t>& sizes,
                                           std::uint64_t seed, std::size_t samples_per_size,
                                           std::uint64_t budget = 20000000) {
    RandomSizeReport report;
    std::vector<std::pair<double, double>> share_pts, copy_pts;
    for (std::size_t n : sizes) {
        RandomSizeRow row;
        row.n = n;
        row.samples = samples_per_size;
        for (std::size_t s = 0; s < samples_per_size; ++s) {
            Rng rng(seed * 7919 + n * 131 + s);
            GeneratedExpr g = gen_random_tree(rng, n);
            auto x1 = g.store.var_id("x1");
            std::size_t share = derivative_size(g.store, g.root, *x1,
                                                DiffPolicy{SubtreeMode::Share, true}, false, budget);
            std::uint64_t copy = derivative_size(g.store, g.root, *x1,
                                                 DiffPolicy{SubtreeMode::Copy, true}, false, budget);
            row.share_mean += static_cast<double>(share);
            row.copy_mean += static_cast<double>(copy);
            row.share_max = std::max(row.share_max, share);
            row.copy_max = std::max<std::uint64_t>(row.copy_max, copy);
            if (share > 10 * n) report.share_within_linear_bound = false;
        }
        row.share_mean /= static_cast<double>(samples_per_size);
        row.copy_mean /= static_cast<double>(samples_per_size);
        share_pts.emplace_back(std::log(static_cast<double>(n)), std::log(row.share_mean));
        copy_pts.emplace_back(std::log(static_cast<double>(n)), std::log(row.copy_mean));
        report.rows.push_back(row);
    }
    report.share_slope = fit_slope(share_pts);
    report.copy_slope = fit_slope(copy_pts);
    return report;
}

}  // namespace dagdiff
