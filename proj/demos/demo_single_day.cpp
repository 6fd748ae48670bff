// Walks through one pricing day for a small basket: the closed-form prices
// an oracle with the true elasticities would post, then the same decision
// made by sampling from a fresh posterior, the revenue that comes back, and
// what the update does to the posterior mean.
#include <cstdio>
#include <random>
#include <vector>

#include "pricer/demand.hpp"
#include "pricer/solver.hpp"
#include "pricer/thompson.hpp"

using namespace pricer;

int main() {
    std::vector<ItemState> items = {
        {"espresso", 12.0, 4.0, -2.0},
        {"filter", 12.0, 2.5, -1.2},
        {"beans-1kg", 18.0, 1.0, -3.0},
        {"mug", 10.0, 3.0, -1.5},
        {"grinder", 15.0, 0.8, -2.5},
    };
    auto cs = uniform_box(items.size(), 10.0, 20.0);

    auto oracle = solve(items, cs);
    std::printf("oracle prices (true elasticities known):\n");
    for (std::size_t i = 0; i < items.size(); ++i)
        std::printf("  %-10s prev %5.2f  gamma %5.2f  ->  %6.3f\n",
                    items[i].item_id.c_str(), items[i].prev_price,
                    items[i].elasticity, oracle.prices[i]);
    std::printf("linearized basket revenue at the optimum: %.3f\n\n",
                oracle.objective);

    TsConfig config;
    config.prior_mean.assign(items.size(), -2.0);
    config.prior_scale = 0.25;
    config.noise_var = 25.0;
    auto post = init_posterior(config);

    std::mt19937_64 rng(7);
    auto decision = ts_step(post, items, cs, rng);
    std::printf("sampled decision (prior N(-2, 0.25) per item):\n");
    for (std::size_t i = 0; i < items.size(); ++i)
        std::printf("  %-10s sampled gamma %6.3f  ->  %6.3f\n",
                    items[i].item_id.c_str(), decision.sampled_elasticities[i],
                    decision.prices[i]);

    // The market answers with the constant-elasticity model and the true
    // gammas; the posterior only ever sees the total revenue.
    double revenue = 0.0;
    for (std::size_t i = 0; i < items.size(); ++i)
        revenue += decision.prices[i] * demand_exponential(items[i], decision.prices[i]);
    std::printf("realized revenue: %.3f\n\n", revenue);

    auto features = likelihood_features(items, decision.prices);
    posterior_update(post, features, revenue);
    std::printf("posterior mean after one update:\n");
    for (std::size_t i = 0; i < items.size(); ++i)
        std::printf("  %-10s %.4f  (prior %.4f, true %.4f)\n",
                    items[i].item_id.c_str(), post.mean()[i], config.prior_mean[i],
                    items[i].elasticity);
    return 0;
}
