#include "support.hpp"

#include "mfnet/analysis.hpp"
#include "mfnet/error.hpp"
#include "mfnet/fixpoint.hpp"
#include "mfnet/nlmp.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfnet;
using namespace mfnet::testing;

namespace {

constexpr std::size_t kO = 0, kA = 1;

std::vector<double> random_probability(CounterRng& rng, std::size_t n)
{
    std::vector<double> p(n);
    double z = 0.0;
    for (auto& x : p) z += x = rng.uniform();
    for (auto& x : p) x /= z;
    return p;
}

} // namespace

TEST_SUITE("analysis")
{
    TEST_CASE("norm_Y")
    {
        const auto space = StateSpace::make(build_rshv1(), 10);
        DerivedVector a(space);
        a[derived_index(*space, kO, {1})] = 1.0;
        CHECK(norm_Y(a) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
        DerivedVector b(space);
        b[derived_index(*space, kA, {1, 1})] = -1.0;
        CHECK(norm_Y(b) == doctest::Approx(std::exp(2.0) / 2).epsilon(1e-15));
        CHECK(norm_Y(DerivedVector(space)) == 0.0);

        CounterRng rng(1);
        for (int i = 0; i < 100; ++i) {
            const auto x = random_zero_sum(space, rng, 10);
            const auto y = random_zero_sum(space, rng, 10);
            const double s = 4.0 * rng.uniform() - 2.0;
            CHECK(norm_Y(x + y) <= norm_Y(x) + norm_Y(y) + 1e-12 * (norm_Y(x) + norm_Y(y)));
            CHECK(norm_Y(s * x) == doctest::Approx(std::abs(s) * norm_Y(x)).epsilon(1e-13));
            CHECK(norm_Y(x) > 0.0);
        }
        // shells far out do not overflow
        const auto big = StateSpace::make(ElementaryNetwork({{"Q", {"q"}}}, {1.0}, {1.0}), 800);
        DerivedVector far(big);
        far[799] = 1e-300;
        CHECK(std::isfinite(norm_Y(far)));
        CHECK(norm_Y(far) == doctest::Approx(std::exp(800.0 - 300.0 * std::log(10.0)) / 800.0).epsilon(1e-10));
    }

    TEST_CASE("norm_one")
    {
        const auto space = StateSpace::make(build_rshv1(), 12);
        const double beta = 0.5;
        CHECK(norm_one(DerivedVector(space), beta) == 0.0);

        CounterRng rng(3);
        const auto nu = random_zero_sum(space, rng, 6);
        const double n1 = norm_one(nu, beta);
        CHECK(norm_one(2.0 * nu, beta) == doctest::Approx(2.0 * n1).epsilon(1e-9));

        DerivedVector off(space);
        off[0] = 1.0;
        CHECK_THROWS_AS(norm_one(off, beta), Error);
        try {
            norm_one(nu, 50.0);
            FAIL("expected BetaTooLarge");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BetaTooLarge);
        }

        // equivalence constants on a sample of zero-sum vectors
        double lo = INFINITY, hi = 0.0;
        for (int i = 0; i < 40; ++i) {
            const auto v = random_zero_sum(space, rng, 8);
            const double r = norm_one(v, beta) / norm_Y(v);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        MESSAGE("norm_one / norm_Y in [" << lo << ", " << hi << "]");
        CHECK(lo > 0.0);
        CHECK(std::isfinite(hi));
        CHECK(hi / lo < 100.0);
    }

    TEST_CASE("norm_one contracts along linear trajectories")
    {
        const auto space = StateSpace::make(build_rshv1(), 12);
        const auto report = contraction_time(build_rshv1(), 10.0, 5, 11, {.L = 12});
        const double beta = 0.5 * report.beta_est;
        CounterRng rng(5);
        for (int trial = 0; trial < 3; ++trial) {
            auto nu = random_zero_sum(space, rng, 6);
            LinearFlow flow(space, 0.005);
            const double h = 0.05;
            double prev = norm_one(nu, beta);
            for (int k = 1; k <= 20; ++k) {
                for (int s = 0; s < 10; ++s) flow.step(nu.values());
                const double cur = norm_one(nu, beta);
                // finite difference of the differential inequality
                CHECK((cur - prev) / h <= -beta * cur * (1.0 - 1e-6));
                // half rate: e^{beta t / 2} ||nu(t)||_1 is non-increasing
                CHECK(std::exp(0.5 * beta * h) * cur <= prev * (1.0 + 1e-9));
                prev = cur;
            }
        }
    }

    TEST_CASE("total variation is a metric")
    {
        CounterRng rng(9);
        for (int i = 0; i < 100; ++i) {
            const auto a = random_probability(rng, 12);
            const auto b = random_probability(rng, 12);
            const auto c = random_probability(rng, 12);
            CHECK(tv_distance(a, a) == 0.0);
            CHECK(tv_distance(a, b) == tv_distance(b, a));
            CHECK(tv_distance(a, b) > 0.0);
            CHECK(tv_distance(a, b) <= 1.0);
            CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-15);
        }
        CHECK(tv_distance(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 1.0);
        try {
            tv_distance(std::vector<double>{1, 0}, std::vector<double>{1});
            FAIL("expected IndexMismatch");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::IndexMismatch);
        }

        // empirical mass beyond the truncation counts in full
        const auto space = StateSpace::make(build_rshv1(), 3);
        ProductMeasure chi(space);
        EmpiricalMeasure emp;
        emp.nodes.resize(3);
        emp.nodes[0][{0}] = 0.5;
        emp.nodes[0][{7}] = 0.5;
        emp.nodes[1][{0, 0}] = 1.0;
        emp.nodes[2][{0, 0}] = 1.0;
        CHECK(tv_distance(emp, chi, 0) == doctest::Approx(0.5));
        CHECK(tv_to_chi(emp, chi) == doctest::Approx(0.5));
    }

    TEST_CASE("least squares")
    {
        const std::vector<double> x{0, 1, 2, 3};
        const std::vector<double> y{1, 3, 5, 7};
        const auto f = least_squares(x, y);
        CHECK(f.slope == doctest::Approx(2.0));
        CHECK(f.intercept == doctest::Approx(1.0));
        CHECK(f.r2 == doctest::Approx(1.0));
        const std::vector<double> w{1, 1, 1, 1e6};
        const std::vector<double> yb{1, 3, 5, 100};
        const auto g = least_squares(x, yb, w);
        CHECK(std::abs(g.intercept + 3 * g.slope - 100.0) < 1e-3);
    }

    TEST_CASE("contraction on rshv1")
    {
        const auto net = build_rshv1();
        const auto r = contraction_time(net, 10.0, 20, 7);
        CHECK(r.pairs_tested == 20);
        CHECK(std::isfinite(r.T_half));
        CHECK(r.T_half > 0.0);
        CHECK(r.beta_est > 0.0);
        MESSAGE("T_half max/min " << r.T_half / r.T_half_min << ", beta_est " << r.beta_est);
        for (const auto& p : r.pairs) CHECK(std::isfinite(p.t_half));

        const auto r40 = contraction_time(net, 10.0, 20, 7, {.L = 40});
        CHECK(r40.beta_est == doctest::Approx(r.beta_est).epsilon(0.05));

        // a one-color node: every measure of norm e is the same unit point mass
        const ElementaryNetwork single({{"Q", {"q"}}}, {1.0}, {1.0});
        const auto same = contraction_time(single, std::exp(1.0), 5, 1, {.L = 6});
        CHECK(same.pairs_tested == 0);
    }

    TEST_CASE("Lipschitz ratio")
    {
        const auto space = StateSpace::make(build_rshv1(), 16);
        const auto r = lipschitz_check(space, 100, 10.0, 0.66, 7);
        CHECK(r.pairs_tested == 100);
        CHECK(std::isfinite(r.C1));
        CHECK(r.C1 > 0.0);
        CHECK(r.mean_ratio <= r.C1);
    }

    TEST_CASE("Lipschitz estimate saturates from 100 to 1000 pairs" * doctest::may_fail())
    {
        // The sampled max is driven by rare pairs with small ||mu - nu||_1 and
        // keeps growing with the sample size.
        const auto space = StateSpace::make(build_rshv1(), 16);
        const auto a = lipschitz_check(space, 100, 10.0, 0.66, 7);
        const auto b = lipschitz_check(space, 1000, 10.0, 0.66, 7);
        CHECK(b.C1 == doctest::Approx(a.C1).epsilon(0.10));
    }

    TEST_CASE("Gronwall margin")
    {
        const auto net = build_rshv1();
        MarginOptions opt;
        opt.contraction_pairs = 5;
        opt.lipschitz_pairs = 10;
        opt.trajectories = 2;
        const auto m = gronwall_margin(net, 0.0, 10.0, 3, opt);
        CHECK(m.margin == doctest::Approx(-m.beta_est));
        CHECK(m.margin < 0.0);
        for (std::size_t i = 1; i < m.scan.size(); ++i) CHECK(m.scan[i].margin > m.scan[i - 1].margin);
        CHECK(m.rho_star > 0.0);
        MESSAGE("rho_star " << m.rho_star);
    }

    TEST_CASE("relaxation rate")
    {
        std::vector<double> t, d;
        for (int k = 0; k <= 100; ++k) {
            t.push_back(0.05 * k);
            d.push_back(std::exp(-2.0 * t.back()));
        }
        const auto fit = relaxation_rate(t, d);
        CHECK(std::abs(fit.tau - 2.0) < 1e-6);
        CHECK(fit.ci_lo <= fit.tau);
        CHECK(fit.ci_hi >= fit.tau);

        // a rise before the decay is skipped
        std::vector<double> bump = d;
        bump[0] = 0.5;
        bump[1] = 0.8;
        CHECK(relaxation_rate(t, bump).t_begin > 0.0);

        const std::vector<double> flat(t.size(), 0.3);
        try {
            relaxation_rate(t, flat);
            FAIL("expected NoDecay");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NoDecay);
        }
        std::vector<double> noisy = d;
        try {
            relaxation_rate(t, noisy, 1.0);
            FAIL("expected NoDecay");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NoDecay);
        }
    }

    TEST_CASE("nlmp relaxes toward chi")
    {
        const auto net = build_rshv1();
        const auto chi = chi_rho(net, 0.05, 30);
        ProductMeasure start = chi;
        // move clients from O to A without changing the load
        auto o = start.node(kO);
        auto a = start.node(kA);
        const double shift = 0.5 * o[1];
        o[1] -= shift;
        o[0] += shift;
        a[2] += shift;
        a[0] -= shift;
        const auto traj = integrate(start, 8.0, default_dt(chi.space()), {.L = 30}, 0.05);
        std::vector<double> t, d;
        for (const auto& s : traj.samples) {
            t.push_back(s.t);
            double m = 0.0;
            for (std::size_t v = 0; v < 3; ++v) m = std::max(m, tv_distance(s.nu, chi, v));
            d.push_back(m);
        }
        const auto fit = relaxation_rate(t, d, 1e-12);
        CHECK(fit.tau > 0.0);
        MESSAGE("tau at M = infinity " << fit.tau);
    }
}
