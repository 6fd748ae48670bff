#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "pricer/solver.hpp"

using namespace pricer;
using Catch::Matchers::WithinAbs;

namespace {

ItemState make_item(double prev, double forecast, double gamma) {
    return ItemState{"i", prev, forecast, gamma};
}

// Brute-force grid maximizer on a 0.01 lattice, floor-aware, n <= 3.
struct GridBest {
    std::vector<double> prices;
    double objective = -std::numeric_limits<double>::infinity();
};

GridBest grid_solve(const std::vector<ItemState>& items, const ConstraintSet& cs) {
    const double step = 0.01;
    std::size_t n = items.size();
    std::vector<std::vector<double>> axes(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (double p = cs.lower[i]; p <= cs.upper[i] + 1e-12; p += step)
            axes[i].push_back(std::min(p, cs.upper[i]));
        if (axes[i].back() < cs.upper[i] - 1e-12) axes[i].push_back(cs.upper[i]);
    }
    GridBest best;
    std::vector<double> p(n);
    std::vector<std::size_t> idx(n, 0);
    while (true) {
        for (std::size_t i = 0; i < n; ++i) p[i] = axes[i][idx[i]];
        bool ok = true;
        if (cs.basket_linear) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += cs.basket_linear->weights[i] * p[i];
            ok = s >= cs.basket_linear->bound - 1e-12;
        }
        if (ok) {
            double obj = 0.0;
            for (std::size_t i = 0; i < n; ++i) obj += revenue_item(items[i], p[i]);
            if (obj > best.objective) {
                best.objective = obj;
                best.prices = p;
            }
        }
        std::size_t k = 0;
        while (k < n && ++idx[k] == axes[k].size()) idx[k++] = 0;
        if (k == n) break;
    }
    return best;
}

// Active-set enumeration for the projection QP, n <= 3: each coordinate is
// free, at lower or at upper; the floor is active or slack.  The unique
// sign-feasible KKT point is the projection.
std::vector<double> qp_project(const std::vector<double>& z, const ConstraintSet& cs) {
    std::size_t n = z.size();
    const LinearConstraint* lc = cs.basket_linear ? &*cs.basket_linear : nullptr;
    std::vector<double> best;
    double best_norm = std::numeric_limits<double>::infinity();
    std::vector<int> state(n);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (int floor_active = 0; floor_active <= (lc ? 1 : 0); ++floor_active) {
        for (std::size_t code = 0; code < combos; ++code) {
            std::size_t c = code;
            for (std::size_t i = 0; i < n; ++i) {
                state[i] = static_cast<int>(c % 3) - 1;  // -1 lower, 0 free, +1 upper
                c /= 3;
            }
            double nu = 0.0;
            if (floor_active) {
                double fixed = 0.0, wz = 0.0, ww = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (state[i] == -1) fixed += lc->weights[i] * cs.lower[i];
                    else if (state[i] == 1) fixed += lc->weights[i] * cs.upper[i];
                    else {
                        wz += lc->weights[i] * z[i];
                        ww += lc->weights[i] * lc->weights[i];
                    }
                }
                if (ww <= 0.0) continue;
                nu = (lc->bound - fixed - wz) / ww;
                if (nu < -1e-10) continue;
            }
            std::vector<double> p(n);
            bool ok = true;
            for (std::size_t i = 0; i < n; ++i) {
                double w = lc ? lc->weights[i] : 0.0;
                if (state[i] == -1) p[i] = cs.lower[i];
                else if (state[i] == 1) p[i] = cs.upper[i];
                else p[i] = z[i] + nu * w;
                if (p[i] < cs.lower[i] - 1e-9 || p[i] > cs.upper[i] + 1e-9) ok = false;
            }
            if (!ok) continue;
            if (lc) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += lc->weights[i] * p[i];
                if (floor_active ? std::abs(s - lc->bound) > 1e-7
                                 : s < lc->bound - 1e-9)
                    continue;
            }
            for (std::size_t i = 0; i < n && ok; ++i) {
                double w = lc ? lc->weights[i] : 0.0;
                double mult = p[i] - z[i] - nu * w;
                if (state[i] == -1 && mult < -1e-9) ok = false;
                if (state[i] == 1 && mult > 1e-9) ok = false;
            }
            if (!ok) continue;
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) norm += (p[i] - z[i]) * (p[i] - z[i]);
            if (norm < best_norm) {
                best_norm = norm;
                best = p;
            }
        }
    }
    REQUIRE_FALSE(best.empty());
    return best;
}

}  // namespace

TEST_CASE("unconstrained optimum closed form") {
    REQUIRE(unconstrained_optimum(make_item(12.0, 3.0, -1.0)) == 12.0);
    REQUIRE(unconstrained_optimum(make_item(12.0, 3.0, -3.0)) == 8.0);
    REQUIRE(unconstrained_optimum(make_item(10.0, 10.0, -2.0)) == 7.5);
    REQUIRE_THROWS_AS(unconstrained_optimum(make_item(10.0, 0.0, -2.0)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(unconstrained_optimum(make_item(10.0, 1.0, 0.5)),
                      std::invalid_argument);
}

TEST_CASE("box-only solve clips the per-item optimum exactly") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0)};
    MaxRevSolution tight = solve(items, uniform_box(1, 10.0, 20.0));
    REQUIRE(tight.prices[0] == 10.0);
    REQUIRE_THAT(tight.objective, WithinAbs(100.0, 1e-12));
    REQUIRE(tight.converged);
    REQUIRE(tight.iterations == 0);

    MaxRevSolution loose = solve(items, uniform_box(1, 5.0, 20.0));
    REQUIRE(loose.prices[0] == 7.5);
    REQUIRE_THAT(loose.objective, WithinAbs(112.5, 1e-12));
}

TEST_CASE("box-only solve matches a fine grid search") {
    std::vector<ItemState> items{make_item(12.0, 3.0, -3.0)};
    ConstraintSet cs = uniform_box(1, 5.0, 20.0);
    MaxRevSolution sol = solve(items, cs);
    REQUIRE(sol.prices[0] == 8.0);
    GridBest grid = grid_solve(items, cs);
    REQUIRE(sol.objective >= grid.objective - 1e-4);
}

TEST_CASE("a symmetric basket floor lifts both prices to the floor") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0),
                                 make_item(10.0, 10.0, -2.0)};
    ConstraintSet cs = uniform_box(2, 5.0, 20.0);
    cs.basket_linear = LinearConstraint{{1.0, 1.0}, 22.0};
    MaxRevSolution sol = solve(items, cs);
    REQUIRE(sol.converged);
    REQUIRE_THAT(sol.prices[0], WithinAbs(11.0, 1e-8));
    REQUIRE_THAT(sol.prices[1], WithinAbs(11.0, 1e-8));
    REQUIRE_THAT(sol.objective, WithinAbs(176.0, 1e-6));
    REQUIRE(kkt_residual(items, cs, sol.prices) < 1e-6);
}

TEST_CASE("a slack basket floor leaves the separable solution alone") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0),
                                 make_item(10.0, 10.0, -2.0)};
    ConstraintSet cs = uniform_box(2, 5.0, 20.0);
    cs.basket_linear = LinearConstraint{{1.0, 1.0}, 14.0};
    MaxRevSolution sol = solve(items, cs);
    REQUIRE(sol.prices[0] == 7.5);
    REQUIRE(sol.prices[1] == 7.5);
    REQUIRE(sol.iterations == 0);
}

TEST_CASE("max_rel_change tightens the effective box") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0)};
    ConstraintSet cs = uniform_box(1, 5.0, 20.0);
    cs.max_rel_change = 0.1;
    MaxRevSolution sol = solve(items, cs);
    REQUIRE(sol.prices[0] == 9.0);  // optimum 7.5 capped at a ten percent move

    ConstraintSet folded = effective_box(cs, items);
    REQUIRE(folded.lower[0] == 9.0);
    REQUIRE(folded.upper[0] == 11.0);
    REQUIRE_FALSE(folded.max_rel_change.has_value());

    ConstraintSet empty = uniform_box(1, 15.0, 20.0);
    empty.max_rel_change = 0.1;
    REQUIRE_THROWS_AS(effective_box(empty, items), std::domain_error);
}

TEST_CASE("projection is the identity on interior points and clips otherwise") {
    ConstraintSet cs = uniform_box(2, 10.0, 20.0);
    std::vector<double> inside{12.0, 19.0};
    REQUIRE(project(inside, cs) == inside);
    std::vector<double> outside{25.0, 3.0};
    std::vector<double> clipped = project(outside, cs);
    REQUIRE(clipped[0] == 20.0);
    REQUIRE(clipped[1] == 10.0);
}

TEST_CASE("projection onto a floored box matches the enumerated QP") {
    ConstraintSet cs = uniform_box(2, 10.0, 20.0);
    cs.basket_linear = LinearConstraint{{1.0, 1.0}, 25.0};
    std::vector<double> z{0.0, 0.0};
    std::vector<double> p = project(z, cs);
    REQUIRE_THAT(p[0], WithinAbs(12.5, 1e-9));
    REQUIRE_THAT(p[1], WithinAbs(12.5, 1e-9));
    std::vector<double> oracle = qp_project(z, cs);
    REQUIRE_THAT(p[0], WithinAbs(oracle[0], 1e-6));
    REQUIRE_THAT(p[1], WithinAbs(oracle[1], 1e-6));
}

TEST_CASE("projection handles uneven floor weights") {
    ConstraintSet cs = uniform_box(2, 10.0, 20.0);
    cs.basket_linear = LinearConstraint{{1.0, 2.0}, 50.0};
    std::vector<double> z{0.0, 0.0};
    std::vector<double> p = project(z, cs);
    std::vector<double> oracle = qp_project(z, cs);
    REQUIRE_THAT(p[0], WithinAbs(oracle[0], 1e-6));
    REQUIRE_THAT(p[1], WithinAbs(oracle[1], 1e-6));
    REQUIRE_THAT(p[0], WithinAbs(10.0, 1e-9));
    REQUIRE_THAT(p[1], WithinAbs(20.0, 1e-9));
}

TEST_CASE("random projections agree with the enumerated QP") {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> ulo(1.0, 10.0);
    std::uniform_real_distribution<double> uw(0.5, 12.0);
    std::uniform_real_distribution<double> uweight(-2.0, 3.0);
    std::uniform_int_distribution<int> usize(1, 3);
    std::uniform_real_distribution<double> uz(-15.0, 40.0);
    int checked = 0;
    for (int rep = 0; rep < 400; ++rep) {
        int n = usize(rng);
        ConstraintSet cs;
        for (int i = 0; i < n; ++i) {
            double lo = ulo(rng);
            cs.lower.push_back(lo);
            cs.upper.push_back(lo + uw(rng));
        }
        LinearConstraint lc;
        for (int i = 0; i < n; ++i) lc.weights.push_back(uweight(rng));
        double best = 0.0;
        for (int i = 0; i < n; ++i)
            best += lc.weights[i] > 0 ? lc.weights[i] * cs.upper[i]
                                      : lc.weights[i] * cs.lower[i];
        double worst = 0.0;
        for (int i = 0; i < n; ++i)
            worst += lc.weights[i] > 0 ? lc.weights[i] * cs.lower[i]
                                       : lc.weights[i] * cs.upper[i];
        // Keep the floor attainable but not vacuous.
        lc.bound = worst + 0.3 * (best - worst);
        cs.basket_linear = lc;
        std::vector<double> z(n);
        for (int i = 0; i < n; ++i) z[i] = uz(rng);
        std::vector<double> p = project(z, cs);
        std::vector<double> oracle = qp_project(z, cs);
        for (int i = 0; i < n; ++i) REQUIRE_THAT(p[i], WithinAbs(oracle[i], 1e-6));
        ++checked;
    }
    REQUIRE(checked == 400);
}

TEST_CASE("random floored baskets beat the grid and satisfy first-order conditions") {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> uprev(6.0, 14.0);
    std::uniform_real_distribution<double> uf(0.5, 8.0);
    std::uniform_real_distribution<double> ug(-3.5, -0.4);
    std::uniform_real_distribution<double> ulo(4.0, 9.0);
    std::uniform_real_distribution<double> uw(1.0, 2.5);
    std::uniform_int_distribution<int> usize(1, 3);
    std::uniform_int_distribution<int> ufloor(0, 1);
    std::uniform_real_distribution<double> uweight(0.2, 2.0);
    for (int rep = 0; rep < 60; ++rep) {
        int n = usize(rng);
        std::vector<ItemState> items;
        ConstraintSet cs;
        for (int i = 0; i < n; ++i) {
            items.push_back(make_item(uprev(rng), uf(rng), ug(rng)));
            double lo = ulo(rng);
            cs.lower.push_back(lo);
            cs.upper.push_back(lo + uw(rng));
        }
        if (ufloor(rng)) {
            LinearConstraint lc;
            for (int i = 0; i < n; ++i) lc.weights.push_back(uweight(rng));
            double best = 0.0, worst = 0.0;
            for (int i = 0; i < n; ++i) {
                best += lc.weights[i] * cs.upper[i];
                worst += lc.weights[i] * cs.lower[i];
            }
            lc.bound = worst + 0.6 * (best - worst);
            cs.basket_linear = lc;
        }
        MaxRevSolution sol = solve(items, cs);
        for (int i = 0; i < n; ++i) {
            REQUIRE(sol.prices[i] >= cs.lower[i] - 1e-8);
            REQUIRE(sol.prices[i] <= cs.upper[i] + 1e-8);
        }
        if (cs.basket_linear) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += cs.basket_linear->weights[i] * sol.prices[i];
            REQUIRE(s >= cs.basket_linear->bound - 1e-8);
        }
        GridBest grid = grid_solve(items, cs);
        REQUIRE(sol.objective >= grid.objective - 1e-4);
        REQUIRE(kkt_residual(items, cs, sol.prices) < 1e-6);
    }
}

TEST_CASE("projected gradient objective trace is monotone") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0),
                                 make_item(12.0, 4.0, -1.5),
                                 make_item(8.0, 6.0, -3.0)};
    ConstraintSet cs = uniform_box(3, 6.0, 18.0);
    cs.basket_linear = LinearConstraint{{1.0, 1.5, 0.7}, 40.0};
    std::vector<double> trace;
    MaxRevSolution sol = solve_traced(items, cs, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t k = 1; k < trace.size(); ++k)
        REQUIRE(trace[k] >= trace[k - 1] - 1e-9 * (1.0 + std::abs(trace[k - 1])));
    REQUIRE(sol.converged);
}

TEST_CASE("scaling every forecast scales the objective but not the argmax") {
    std::vector<ItemState> items{make_item(10.0, 10.0, -2.0),
                                 make_item(12.0, 4.0, -1.5)};
    ConstraintSet cs = uniform_box(2, 6.0, 18.0);
    cs.basket_linear = LinearConstraint{{1.0, 1.0}, 27.0};
    MaxRevSolution base = solve(items, cs);
    const double c = 4.2;
    std::vector<ItemState> scaled = items;
    for (ItemState& it : scaled) it.forecast *= c;
    MaxRevSolution big = solve(scaled, cs);
    REQUIRE_THAT(big.prices[0], WithinAbs(base.prices[0], 1e-7));
    REQUIRE_THAT(big.prices[1], WithinAbs(base.prices[1], 1e-7));
    REQUIRE_THAT(big.objective, WithinAbs(c * base.objective, 1e-6 * (1.0 + c * std::abs(base.objective))));
}

TEST_CASE("solver rejects invalid inputs") {
    std::vector<ItemState> none;
    REQUIRE_THROWS_AS(solve(none, uniform_box(0, 1.0, 2.0)), std::invalid_argument);
    std::vector<ItemState> bad_gamma{make_item(10.0, 10.0, -2.0)};
    bad_gamma[0].elasticity = 0.5;
    REQUIRE_THROWS_AS(solve(bad_gamma, uniform_box(1, 5.0, 20.0)), std::invalid_argument);
    std::vector<ItemState> no_forecast{make_item(10.0, 0.0, -2.0)};
    REQUIRE_THROWS_AS(solve(no_forecast, uniform_box(1, 5.0, 20.0)),
                      std::invalid_argument);
    std::vector<ItemState> one{make_item(10.0, 10.0, -2.0)};
    REQUIRE_THROWS_AS(solve(one, uniform_box(2, 5.0, 20.0)), std::invalid_argument);
    ConstraintSet inverted = uniform_box(1, 20.0, 5.0);
    REQUIRE_THROWS_AS(solve(one, inverted), std::invalid_argument);
    ConstraintSet impossible = uniform_box(1, 5.0, 20.0);
    impossible.basket_linear = LinearConstraint{{1.0}, 100.0};
    REQUIRE_THROWS_AS(solve(one, impossible), std::domain_error);
}
