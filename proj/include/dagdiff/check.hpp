#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dagdiff/eval.hpp"
#include "dagdiff/expr.hpp"
#include "dagdiff/forward.hpp"
#include "dagdiff/symbolic.hpp"

namespace dagdiff {

struct DerivativeCheckRow {
    std::string variable;
    double forward_value = 0.0;
    double share_value = 0.0;
    double cse_value = 0.0;
    double copy_value = 0.0;
    double fd_value = 0.0;
    double max_abs_err = 0.0;  // worst engine-vs-fd absolute difference
    bool engines_identical = false;  // all four bitwise equal
    bool pass = false;
};

struct DerivativeCheckReport {
    std::vector<DerivativeCheckRow> rows;
    double tol = 0.0;
    double h = 0.0;
    bool pass = true;
};

// Evaluates forward mode, all three symbolic policies, and a central finite
// difference for every variable reachable from `root`. A row passes when
// each engine is within max(tol * |engine|, abs_floor) of the finite
// difference. Engine values are also compared bitwise to each other.
inline DerivativeCheckReport check_derivatives(const ExprStore& store, NodeId root,
                                               const Valuation& vals, double tol = 1e-5,
                                               double h = 1e-6, double abs_floor = 1e-8) {
    DerivativeCheckReport report;
    report.tol = tol;
    report.h = h;
    for (VarId wrt : vars_in(store, root)) {
        DerivativeCheckRow row;
        row.variable = store.var_name(wrt);

        ForwardResult fwd = forward_derivative(store, root, wrt, false);
        row.forward_value = eval(fwd.store, fwd.deriv_root, vals);

        auto symbolic_value = [&](SubtreeMode mode) {
            SymbolicResult r =
                symbolic_derivative(store, root, wrt, DiffPolicy{mode, true}, false);
            if (r.forest) {
                // forest stores are rebuilt, so rebind values by name
                Valuation forest_vals;
                for (VarId v = 0; v < r.forest->store().var_count(); ++v) {
                    auto id = store.var_id(r.forest->store().var_name(v));
                    if (id && vals.has(*id)) forest_vals.set(v, vals.get(*id));
                }
                return eval(*r.forest, forest_vals);
            }
            return eval(r.store, r.deriv_root, vals);
        };
        row.share_value = symbolic_value(SubtreeMode::Share);
        row.cse_value = symbolic_value(SubtreeMode::Cse);
        {
            SymbolicResult r =
                symbolic_derivative(store, root, wrt, DiffPolicy{SubtreeMode::Copy, true}, false);
            Valuation copy_vals;
            for (VarId v = 0; v < r.store.var_count(); ++v) {
                auto id = store.var_id(r.store.var_name(v));
                if (id && vals.has(*id)) copy_vals.set(v, vals.get(*id));
            }
            row.copy_value = eval(r.store, r.deriv_root, copy_vals);
        }
        row.fd_value = finite_difference(store, root, wrt, vals, h);

        row.engines_identical = row.forward_value == row.share_value &&
                                row.share_value == row.cse_value &&
                                row.cse_value == row.copy_value;
        row.pass = true;
        for (double engine : {row.forward_value, row.share_value, row.cse_value, row.copy_value}) {
            double err = std::abs(engine - row.fd_value);
            row.max_abs_err = std::max(row.max_abs_err, err);
            if (err > std::max(tol * std::abs(engine), abs_floor)) row.pass = false;
        }
        report.pass = report.pass && row.pass;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace dagdiff
