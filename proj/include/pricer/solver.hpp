#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pricer/demand.hpp"

namespace pricer {

/// Basket-wide linear price floor: dot(weights, prices) >= bound.
struct LinearConstraint {
    std::vector<double> weights;
    double bound = 0.0;
};

/**
 * Feasible price region for one day: per-item boxes, an optional cap on the
 * relative day-over-day move, and an optional basket-wide linear floor.
 */
struct ConstraintSet {
    std::vector<double> lower;
    std::vector<double> upper;
    std::optional<double> max_rel_change;
    std::optional<LinearConstraint> basket_linear;
};

struct MaxRevSolution {
    std::vector<double> prices;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline ConstraintSet uniform_box(std::size_t n, double lo, double hi) {
    ConstraintSet cs;
    cs.lower.assign(n, lo);
    cs.upper.assign(n, hi);
    return cs;
}

/// Maximizer of the one-item revenue quadratic, ignoring all constraints:
/// prev_price * (elasticity - 1) / (2 * elasticity).
inline double unconstrained_optimum(const ItemState& item) {
    validate_item(item, "unconstrained_optimum");
    if (!(item.forecast > 0.0))
        throw std::invalid_argument("unconstrained_optimum: forecast must be positive");
    return item.prev_price * (item.elasticity - 1.0) / (2.0 * item.elasticity);
}

inline void validate_constraints(const ConstraintSet& cs, std::size_t n,
                                 const char* where) {
    if (cs.lower.size() != n || cs.upper.size() != n)
        throw std::invalid_argument(std::string(where) + ": box size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(cs.lower[i] > 0.0) || !(cs.lower[i] <= cs.upper[i]))
            throw std::invalid_argument(std::string(where) +
                                        ": box must satisfy 0 < lower <= upper");
    }
    if (cs.max_rel_change && !(*cs.max_rel_change > 0.0))
        throw std::invalid_argument(std::string(where) +
                                    ": max_rel_change must be positive");
    if (cs.basket_linear && cs.basket_linear->weights.size() != n)
        throw std::invalid_argument(std::string(where) +
                                    ": linear constraint size mismatch");
}

/**
 * Folds the relative-move cap into the per-item boxes.  The result carries
 * no max_rel_change.  Throws when some item's effective box is empty.
 */
inline ConstraintSet effective_box(const ConstraintSet& cs,
                                   std::span<const ItemState> items) {
    validate_constraints(cs, items.size(), "effective_box");
    ConstraintSet out = cs;
    out.max_rel_change.reset();
    if (cs.max_rel_change) {
        double m = *cs.max_rel_change;
        for (std::size_t i = 0; i < items.size(); ++i) {
            out.lower[i] = std::max(out.lower[i], items[i].prev_price * (1.0 - m));
            out.upper[i] = std::min(out.upper[i], items[i].prev_price * (1.0 + m));
        }
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!(out.lower[i] <= out.upper[i]))
            throw std::domain_error("effective_box: empty feasible box for item " +
                                    items[i].item_id);
    }
    return out;
}

namespace detail {

inline double clip(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

inline double linear_value(const LinearConstraint& lc, std::span<const double> p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += lc.weights[i] * p[i];
    return s;
}

}  // namespace detail

/**
 * Euclidean projection onto the box, intersected with the linear floor when
 * one is present.  Expects a set whose relative-move cap is already folded
 * into the boxes (effective_box does that).
 *
 * With the floor active the projection is clip(point + nu * w) for the
 * multiplier nu >= 0 at which the floor holds with equality.  dot(w,
 * clip(point + nu w)) is nondecreasing and piecewise linear in nu, so nu is
 * bracketed by bisection and then solved exactly on the final linear piece.
 */
inline std::vector<double> project(std::span<const double> point, const ConstraintSet& cs) {
    std::size_t n = point.size();
    validate_constraints(cs, n, "project");
    if (cs.max_rel_change)
        throw std::invalid_argument("project: fold max_rel_change with effective_box first");
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i)
        q[i] = detail::clip(point[i], cs.lower[i], cs.upper[i]);
    if (!cs.basket_linear) return q;

    const LinearConstraint& lc = *cs.basket_linear;
    if (detail::linear_value(lc, q) >= lc.bound) return q;

    // Feasibility: the best the box can do against the floor.
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        best += lc.weights[i] > 0.0 ? lc.weights[i] * cs.upper[i]
                                    : lc.weights[i] * cs.lower[i];
    double scale = 1.0 + std::abs(lc.bound);
    if (best < lc.bound - 1e-9 * scale)
        throw std::domain_error("project: linear floor infeasible over the box");

    auto value_at = [&](double nu) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += lc.weights[i] *
                 detail::clip(point[i] + nu * lc.weights[i], cs.lower[i], cs.upper[i]);
        return s;
    };
    if (best <= lc.bound + 1e-12 * scale) {
        // Floor only met at the box vertex the weights point to.
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = lc.weights[i] > 0.0 ? cs.upper[i]
                 : lc.weights[i] < 0.0 ? cs.lower[i]
                                       : q[i];
        return v;
    }

    double lo = 0.0, hi = 1.0;
    while (value_at(hi) < lc.bound) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e18)
            throw std::domain_error("project: failed to bracket the floor multiplier");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (value_at(mid) < lc.bound ? lo : hi) = mid;
    }
    double nu = 0.5 * (lo + hi);

    // Exact solve on the linear piece identified by the bracket.
    double fixed = 0.0, wz = 0.0, ww = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double moved = point[i] + nu * lc.weights[i];
        if (lc.weights[i] != 0.0 && moved > cs.lower[i] && moved < cs.upper[i]) {
            wz += lc.weights[i] * point[i];
            ww += lc.weights[i] * lc.weights[i];
        } else {
            fixed += lc.weights[i] * detail::clip(moved, cs.lower[i], cs.upper[i]);
        }
    }
    if (ww > 0.0) {
        double exact = (lc.bound - fixed - wz) / ww;
        if (std::abs(value_at(exact) - lc.bound) <= 1e-9 * scale) nu = exact;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = detail::clip(point[i] + nu * lc.weights[i], cs.lower[i], cs.upper[i]);
    return out;
}

/**
 * Worst first-order optimality violation of `prices` for the basket
 * objective sum_i price_i * demand_linear_i over the given constraints.
 *
 * Includes primal feasibility, stationarity against the floor multiplier,
 * bound sign conditions and complementary slackness.  A true constrained
 * maximizer scores (numerically) zero.
 */
inline double kkt_residual(std::span<const ItemState> items, const ConstraintSet& cs_in,
                           std::span<const double> prices) {
    std::size_t n = items.size();
    if (prices.size() != n)
        throw std::invalid_argument("kkt_residual: price size mismatch");
    ConstraintSet cs = effective_box(cs_in, items);
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = items[i].forecast * items[i].elasticity / items[i].prev_price;
        double b = items[i].forecast * (1.0 - items[i].elasticity);
        grad[i] = 2.0 * a * prices[i] + b;
    }
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        resid = std::max(resid, cs.lower[i] - prices[i]);
        resid = std::max(resid, prices[i] - cs.upper[i]);
    }
    double nu = 0.0;
    bool floor_active = false;
    if (cs.basket_linear) {
        const LinearConstraint& lc = *cs.basket_linear;
        double slack = detail::linear_value(lc, prices) - lc.bound;
        double scale = 1.0 + std::abs(lc.bound);
        resid = std::max(resid, -slack);
        floor_active = std::abs(slack) <= 1e-6 * scale;
        if (floor_active) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double span_i = cs.upper[i] - cs.lower[i];
                double tol = 1e-7 * (1.0 + cs.upper[i]);
                bool interior = prices[i] > cs.lower[i] + tol &&
                                prices[i] < cs.upper[i] - tol && span_i > tol;
                if (interior && lc.weights[i] != 0.0) {
                    num -= grad[i] * lc.weights[i];
                    den += lc.weights[i] * lc.weights[i];
                }
            }
            if (den > 0.0) nu = std::max(0.0, num / den);
        } else {
            resid = std::max(resid, 0.0);  // nu stays zero off the floor
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double g = grad[i];
        if (floor_active && cs.basket_linear) g += nu * cs.basket_linear->weights[i];
        double tol = 1e-7 * (1.0 + cs.upper[i]);
        bool at_lower = prices[i] <= cs.lower[i] + tol;
        bool at_upper = prices[i] >= cs.upper[i] - tol;
        if (at_lower && at_upper) continue;  // degenerate box pins the price
        if (at_lower)
            resid = std::max(resid, g);       // no ascent direction into the box
        else if (at_upper)
            resid = std::max(resid, -g);
        else
            resid = std::max(resid, std::abs(g));
    }
    return resid;
}

namespace detail {

inline double basket_objective(std::span<const ItemState> items,
                               std::span<const double> prices) {
    double s = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i)
        s += revenue_item(items[i], prices[i]);
    return s;
}

}  // namespace detail

/**
 * Maximizes the linearized basket revenue over the constraint set.
 *
 * Without a basket-wide floor the problem separates and the solution is the
 * per-item quadratic optimum clipped into its effective box, exactly.  With
 * a floor, projected gradient ascent with step 1/L (L the largest quadratic
 * curvature) runs from the clipped optimum, followed by an active-set
 * refinement that solves the floor multiplier in closed form.
 *
 * Callers are expected to have dropped items whose forecast is too small to
 * price: forecasts here must be positive and elasticities negative.
 */
inline MaxRevSolution solve_traced(std::span<const ItemState> items,
                                   const ConstraintSet& cs_in,
                                   std::vector<double>* objective_trace) {
    if (items.empty())
        throw std::invalid_argument("solve: empty basket");
    for (const ItemState& it : items) {
        validate_item(it, "solve");
        if (!(it.forecast > 0.0))
            throw std::invalid_argument("solve: forecast must be positive for item " +
                                        it.item_id);
    }
    ConstraintSet cs = effective_box(cs_in, items);
    std::size_t n = items.size();

    MaxRevSolution sol;
    sol.prices.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        sol.prices[i] = detail::clip(unconstrained_optimum(items[i]), cs.lower[i],
                                     cs.upper[i]);
    if (!cs.basket_linear ||
        detail::linear_value(*cs.basket_linear, sol.prices) >= cs.basket_linear->bound) {
        // Separable case, or the floor is slack at the separable optimum.
        sol.objective = detail::basket_objective(items, sol.prices);
        sol.converged = true;
        if (objective_trace) objective_trace->push_back(sol.objective);
        return sol;
    }

    const LinearConstraint& lc = *cs.basket_linear;
    std::vector<double> a(n), b(n);
    double curvature = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = items[i].forecast * items[i].elasticity / items[i].prev_price;
        b[i] = items[i].forecast * (1.0 - items[i].elasticity);
        curvature = std::max(curvature, 2.0 * std::abs(a[i]));
    }
    double step = 1.0 / curvature;

    std::vector<double> p = project(sol.prices, cs);
    std::vector<double> moved(n);
    if (objective_trace)
        objective_trace->push_back(detail::basket_objective(items, p));
    int iter = 0;
    for (; iter < 10000; ++iter) {
        for (std::size_t i = 0; i < n; ++i)
            moved[i] = p[i] + step * (2.0 * a[i] * p[i] + b[i]);
        std::vector<double> next = project(moved, cs);
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            shift = std::max(shift, std::abs(next[i] - p[i]));
        p.swap(next);
        if (objective_trace)
            objective_trace->push_back(detail::basket_objective(items, p));
        if (shift < 1e-12 * (1.0 + cs.upper[0])) {
            sol.converged = true;
            break;
        }
    }
    sol.iterations = iter + 1;

    // Active-set refinement: fix prices at their detected bounds, make the
    // floor an equality over the free prices and solve the multiplier.
    double floor_slack = detail::linear_value(lc, p) - lc.bound;
    if (std::abs(floor_slack) <= 1e-6 * (1.0 + std::abs(lc.bound))) {
        double fixed = 0.0, num = 0.0, den = 0.0;
        std::vector<int> state(n, 0);  // -1 lower, +1 upper, 0 free
        for (std::size_t i = 0; i < n; ++i) {
            double tol = 1e-7 * (1.0 + cs.upper[i]);
            if (p[i] <= cs.lower[i] + tol) {
                state[i] = -1;
                fixed += lc.weights[i] * cs.lower[i];
            } else if (p[i] >= cs.upper[i] - tol) {
                state[i] = 1;
                fixed += lc.weights[i] * cs.upper[i];
            } else {
                // Stationarity: 2 a_i p_i + b_i + nu w_i = 0.
                num += lc.weights[i] * (-b[i] / (2.0 * a[i]));
                den += lc.weights[i] * lc.weights[i] / (-2.0 * a[i]);
            }
        }
        if (den > 0.0) {
            double nu = (lc.bound - fixed - num) / den;
            if (nu >= -1e-9) {
                nu = std::max(nu, 0.0);
                std::vector<double> refined(n);
                bool ok = true;
                for (std::size_t i = 0; i < n; ++i) {
                    if (state[i] == -1)
                        refined[i] = cs.lower[i];
                    else if (state[i] == 1)
                        refined[i] = cs.upper[i];
                    else {
                        refined[i] = -(b[i] + nu * lc.weights[i]) / (2.0 * a[i]);
                        double tol = 1e-6 * (1.0 + cs.upper[i]);
                        if (refined[i] < cs.lower[i] - tol || refined[i] > cs.upper[i] + tol)
                            ok = false;
                        refined[i] = detail::clip(refined[i], cs.lower[i], cs.upper[i]);
                    }
                }
                if (ok &&
                    detail::linear_value(lc, refined) >= lc.bound - 1e-9 * (1.0 + std::abs(lc.bound)) &&
                    detail::basket_objective(items, refined) >=
                        detail::basket_objective(items, p) - 1e-9) {
                    p = refined;
                    sol.converged = true;
                    if (objective_trace)
                        objective_trace->push_back(detail::basket_objective(items, p));
                }
            }
        }
    }

    sol.prices = std::move(p);
    sol.objective = detail::basket_objective(items, sol.prices);
    return sol;
}

inline MaxRevSolution solve(std::span<const ItemState> items, const ConstraintSet& cs) {
    return solve_traced(items, cs, nullptr);
}

}  // namespace pricer
