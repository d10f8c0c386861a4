#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace vds {

enum class Relation { le, ge, eq };

struct LpRow {
    std::vector<double> coeffs;  // dense, length num_vars
    Relation rel = Relation::le;
    double rhs = 0.0;
};

/// maximize objective . x  subject to the rows and x >= 0.
struct LpProblem {
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<LpRow> rows;

    explicit LpProblem(std::size_t vars) : num_vars(vars), objective(vars, 0.0) {}
    void add_row(std::vector<double> coeffs, Relation rel, double rhs);
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

/// Dense two-phase simplex. Pivoting follows Bland's rule throughout, so the
/// result is deterministic and cycling is impossible. Intended for the small
/// audit and placement programs in this library (tens of variables).
[[nodiscard]] LpSolution solve_lp(const LpProblem& p);

/// Euclidean projection of z onto the cone
///     { v : e . v = 0 for e in eq_rows,  a . v <= 0 for a in in_rows }.
/// Solved through the polar decomposition: the projection equals z minus the
/// closest point of the finitely generated polar cone, found by a
/// Lawson-Hanson style nonnegative least squares pass (rows from eq_rows
/// carry free multipliers).
[[nodiscard]] std::vector<double> project_onto_cone(const std::vector<double>& z,
                                                    const std::vector<std::vector<double>>& eq_rows,
                                                    const std::vector<std::vector<double>>& in_rows);

/// Central-difference gradient with per-coordinate steps scaled to the
/// argument. Used to audit hand-written gradients.
[[nodiscard]] std::vector<double> central_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
    double rel_step = 1e-6);

/// Least squares solution of G m = b for symmetric positive semidefinite G,
/// with rank handled by pivot thresholding (components outside the detected
/// range are set to zero). Exposed for the projection tests.
[[nodiscard]] std::vector<double> solve_psd(std::vector<std::vector<double>> G,
                                            std::vector<double> b);

}  // namespace vds
