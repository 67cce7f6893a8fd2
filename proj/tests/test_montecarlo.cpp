#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stopflow/montecarlo.hpp"
#include "stopflow/run_config.hpp"

using namespace stopflow;

TEST_CASE("sampling a single hot cell lands every particle there") {
    const GridSpec g = GridSpec::line(0.0, 1.0, 21);
    DensityField mu = DensityField::zeros(g);
    mu.at(7) = 3.0;
    auto pts = sample_initial(mu, 500, 9);
    const double h = g.h(0);
    for (const auto& p : pts) CHECK(std::fabs(p[0] - g.coord(0, 7)) <= 0.5 * h + 1e-12);
}

TEST_CASE("uniform sampling: CLT mean and DKW distance") {
    const GridSpec g = GridSpec::line(0.0, 1.0, 65);
    DensityField mu(g, 1.0);
    const int n = 100000;
    auto pts = sample_initial(mu, n, 123);
    double mean = 0.0;
    for (const auto& p : pts) mean += p[0];
    mean /= n;
    CHECK(std::fabs(mean - 0.5) <= 3.0 / std::sqrt(12.0 * n));

    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = pts[i][0];
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double F = xs[i]; // uniform cdf on [0,1]
        ks = std::max(ks, std::fabs(F - (i + 1.0) / n));
        ks = std::max(ks, std::fabs(F - static_cast<double>(i) / n));
    }
    CHECK(ks <= 1.36 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("benchmark density sampling: DKW against the exact cdf") {
    const GridSpec g = GridSpec::line(-4.0, 4.0, 257);
    DensityField mu = box_bump(g, {-1.0, 0.0}, {1.0, 0.0}, 2.0);
    const int n = 100000;
    auto pts = sample_initial(mu, n, 7);
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = pts[i][0];
    std::sort(xs.begin(), xs.end());
    auto cdf = [](double x) { return std::clamp((x + 1.0) / 2.0, 0.0, 1.0); };
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        ks = std::max(ks, std::fabs(cdf(xs[i]) - (i + 1.0) / n));
        ks = std::max(ks, std::fabs(cdf(xs[i]) - static_cast<double>(i) / n));
    }
    // half a cell of sampling granularity on top of the DKW band
    CHECK(ks <= 1.36 / std::sqrt(static_cast<double>(n)) + g.h(0));
}

TEST_CASE("zero barrier stops everything at time zero") {
    const GridSpec g = GridSpec::line(-4.0, 4.0, 257);
    DensityField mu = box_bump(g, {-1.0, 0.0}, {1.0, 0.0}, 2.0);
    auto starts = sample_initial(mu, 2000, 11);
    ParticleEnsemble ens = simulate_stop(starts, BarrierField::zeros(g), CostType::TypeI,
                                         nullptr, 1e-3, 11, mass(mu));
    for (int i = 0; i < ens.n; ++i) {
        CHECK(ens.tau[i] == 0.0);
        CHECK(ens.stop[i] == ens.start[i]);
    }
    EmpiricalMeasures em = empirical_measures(ens, g);
    CHECK(mass(em.nu_hat) == doctest::Approx(mass(mu)).epsilon(1e-12));
}

TEST_CASE("constant barrier gives the Gaussian endpoint law") {
    const double T = 1.0;
    const GridSpec g = GridSpec::line(-16.0, 16.0, 1025);
    DensityField mu = DensityField::zeros(g);
    mu.at(g.nx() / 2) = 1.0 / g.cell_volume(); // near point mass at 0, mass 1
    const int n = 200000;
    auto starts = sample_initial(mu, n, 21);
    McOptions mo;
    mo.lagrangian = Lagrangian::time_linear();
    ParticleEnsemble ens = simulate_stop(starts, BarrierField::filled(g, T), CostType::TypeI,
                                         nullptr, 1.0 / 512.0, 21, mass(mu), mo);
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        CHECK(ens.tau[i] == doctest::Approx(T).epsilon(1e-9));
        m1 += ens.stop[i][0];
        m2 += ens.stop[i][0] * ens.stop[i][0];
    }
    m1 /= n;
    m2 = m2 / n - m1 * m1;
    CHECK(std::fabs(m1) <= 3.0 * std::sqrt(T / n) + g.h(0)); // sampling jitter
    CHECK(std::fabs(m2 - T) <= 3.0 * T * std::sqrt(2.0 / n) + 2.0 * g.h(0));

    // cost with L = t against the closed form T^2/2 per unit mass
    const double cost = cost_eval(ens);
    CHECK(cost == doctest::Approx(0.5 * T * T).epsilon(0.01));
}

TEST_CASE("ensembles are identical across thread counts and reruns") {
    const GridSpec g = GridSpec::line(-4.0, 4.0, 129);
    DensityField mu = box_bump(g, {-0.5, 0.0}, {0.5, 0.0}, 1.0);
    BarrierField s = BarrierField::filled(g, 0.25);
    auto starts = sample_initial(mu, 5000, 31);

    ParticleEnsemble a = simulate_stop(starts, s, CostType::TypeI, nullptr, 1e-3, 31, mass(mu));
#ifdef _OPENMP
    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
#endif
    auto starts2 = sample_initial(mu, 5000, 31);
    ParticleEnsemble b = simulate_stop(starts2, s, CostType::TypeI, nullptr, 1e-3, 31, mass(mu));
#ifdef _OPENMP
    omp_set_num_threads(saved);
#endif
    REQUIRE(starts2 == starts);
    CHECK(a.tau == b.tau);
    CHECK(a.stop == b.stop);
    CHECK(a.stop_counts == b.stop_counts);
    CHECK(a.cost_integral == b.cost_integral);
}

TEST_CASE("type II needs the instant-stop field; box escape is an error") {
    const GridSpec g = GridSpec::line(-1.0, 1.0, 65);
    DensityField mu = box_bump(g, {-0.25, 0.0}, {0.25, 0.0}, 1.0);
    auto starts = sample_initial(mu, 100, 5);
    CHECK_THROWS_AS((void)simulate_stop(starts, BarrierField::filled(g, 1.0),
                                        CostType::TypeII, nullptr, 1e-3, 5, mass(mu)),
                    ValidationError);
    // barrier never triggers inside the tiny box: particles must escape
    CHECK_THROWS_AS((void)simulate_stop(starts, BarrierField::filled(g, 1e9),
                                        CostType::TypeI, nullptr, 1e-3, 5, mass(mu)),
                    BoxEscape);
}

TEST_CASE("occupation snapshots track the heat spread") {
    const double T = 0.5;
    const GridSpec g = GridSpec::line(-12.0, 12.0, 769);
    DensityField mu = DensityField::zeros(g);
    mu.at(g.nx() / 2) = 1.0 / g.cell_volume();
    McOptions mo;
    mo.snapshot_times = {0.25};
    const int n = 200000;
    auto starts = sample_initial(mu, n, 77);
    ParticleEnsemble ens = simulate_stop(starts, BarrierField::filled(g, T), CostType::TypeI,
                                         nullptr, 1.0 / 512.0, 77, mass(mu), mo);
    EmpiricalMeasures em = empirical_measures(ens, g);
    REQUIRE(em.eta_hat.size() == 1);
    // compare against the heat kernel at t = 0.25 in sup norm
    const double t = em.times[0];
    double worst = 0.0;
    for (int i = 0; i < g.nx(); ++i) {
        const double x = g.coord(0, i);
        const double k = std::exp(-x * x / (2.0 * t)) / std::sqrt(2.0 * 3.14159265358979 * t);
        worst = std::max(worst, std::fabs(em.eta_hat[0].at(i) - k));
    }
    CHECK(worst <= 0.05);
}

TEST_CASE("quadrupling the sample roughly halves the empirical error") {
    const GridSpec g = GridSpec::line(-8.0, 8.0, 513);
    DensityField mu = box_bump(g, {-1.0, 0.0}, {1.0, 0.0}, 2.0);
    BarrierField s = BarrierField::filled(g, 0.5);
    // reference: empirical measure from a large independent run
    auto big = simulate_stop(sample_initial(mu, 400000, 99), s, CostType::TypeI, nullptr,
                             1.0 / 256.0, 99, mass(mu));
    DensityField ref = empirical_measures(big, g).nu_hat;

    auto err_at = [&](int n, std::uint64_t seed) {
        auto ens = simulate_stop(sample_initial(mu, n, seed), s, CostType::TypeI, nullptr,
                                 1.0 / 256.0, seed, mass(mu));
        DensityField nu_hat = empirical_measures(ens, g).nu_hat;
        return l1_pos_diff(nu_hat, ref) + l1_pos_diff(ref, nu_hat);
    };
    const double e1 = err_at(10000, 1);
    const double e4 = err_at(40000, 2);
    CHECK(e4 <= 0.75 * e1); // expected factor 1/2, generous noise allowance
}
