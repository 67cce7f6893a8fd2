#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stopflow/property_verify.hpp"
#include "stopflow/run_config.hpp"

using namespace stopflow;

TEST_CASE("instance generator: normalized, supported with margin, seeded") {
    InstanceGenerator gen;
    gen.seed = 42;
    for (int t = 0; t < 5; ++t) {
        DensityField mu = gen.make_mu(t);
        CHECK(mass(mu) == doctest::Approx(1.0).epsilon(1e-12));
        const GridSpec& g = mu.grid;
        for (int i = 0; i < g.nx(); ++i)
            if (std::fabs(g.coord(0, i)) > 3.5) CHECK(mu.at(i) == 0.0);
    }
    DensityField a = gen.make_mu(3);
    DensityField b = gen.make_mu(3);
    CHECK(a.values == b.values);

    DensityField base = gen.make_mu(0);
    DensityField more = gen.add_bumps(base, 0);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(more[i] >= base[i]);
}

TEST_CASE("monotonicity harness: equal pair is exact, random pairs pass") {
    VerifyParams p;
    TheoremReport r = check_monotonicity(2024, 4, p);
    CHECK(r.pass);
    CHECK(static_cast<int>(r.trials.size()) == 4);
    for (const auto& t : r.trials) CHECK(t.error.empty());
    CHECK(r.nonvacuous_count >= 1);
}

TEST_CASE("contraction and BV harness") {
    VerifyParams p;
    TheoremReport r = check_contraction_bv(7, 4, p);
    CHECK(r.pass);
    CHECK(r.nonvacuous_count >= 1);
    // translation equivariance: a shifted copy contracts tightly
    InstanceGenerator gen;
    gen.seed = 77;
    DensityField mu1 = gen.make_mu(0);
    const GridSpec& g = mu1.grid;
    const int shift = 8;
    DensityField mu2 = DensityField::zeros(g);
    for (int i = shift; i < g.nx(); ++i) mu2.at(i) = mu1.at(i - shift);
    ProblemSpec s1, s2;
    s1.grid = s2.grid = g;
    s1.mu = mu1;
    s2.mu = mu2;
    s1.f = s2.f = DensityField(g, 1.0);
    FreeTargetResult r1 = solve_free_target(s1);
    FreeTargetResult r2 = solve_free_target(s2);
    double worst = 0.0;
    for (int i = shift; i < g.nx(); ++i)
        worst = std::max(worst, std::fabs(r2.nu.at(i) - r1.nu.at(i - shift)));
    CHECK(worst <= 1e-7);
    CHECK(tv_norm(r1.nu) <= tv_norm(mu1) + 1e-9);
}

TEST_CASE("universality and saturation harness") {
    VerifyParams p;
    TheoremReport r = check_universality_and_saturation(11, 3, p);
    CHECK(r.pass);
    CHECK(r.nonvacuous_count >= 1);
    for (const auto& t : r.trials) {
        REQUIRE(t.error.empty());
        CHECK(t.measured.at("decomposition_gap") <= 1e-8);
        CHECK(t.measured.at("hausdorff(E, melted)") <= t.bound + 1e-9);
    }
}

TEST_CASE("reports are reproducible from the seed") {
    VerifyParams p;
    TheoremReport a = check_contraction_bv(5, 2, p);
    TheoremReport b = check_contraction_bv(5, 2, p);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].measured == b.trials[i].measured);
        CHECK(a.trials[i].pass == b.trials[i].pass);
    }
}
