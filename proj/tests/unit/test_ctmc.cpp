#include "support.hpp"

#include "mfnet/ctmc.hpp"
#include "mfnet/error.hpp"
#include "mfnet/fixpoint.hpp"

#include <doctest.h>

#include <algorithm>

using namespace mfnet;
using namespace mfnet::testing;

namespace {

constexpr std::size_t kO = 0, kA = 1;

SimConfig rshv1_config(long long M, double rho, std::uint64_t seed)
{
    SimConfig cfg{build_rshv1()};
    cfg.M = M;
    cfg.rho = rho;
    cfg.seed = seed;
    return cfg;
}

// Independent rate sum: gamma of the first nonempty color of each server.
double rate_oracle(const Simulator& sim)
{
    const auto& base = sim.network().base();
    double r = 0.0;
    for (std::size_t m = 0; m < sim.network().copies(); ++m)
        for (std::size_t v = 0; v < base.node_count(); ++v) {
            const auto q = sim.queue(m, v);
            for (std::size_t c = 0; c < q.size(); ++c)
                if (q[c] > 0) {
                    r += base.gamma(base.flat(v, c));
                    break;
                }
        }
    return r;
}

void check_server_invariants(const Simulator& sim, std::size_t N)
{
    const auto& base = sim.network().base();
    long long total = 0;
    for (std::size_t m = 0; m < sim.network().copies(); ++m)
        for (std::size_t v = 0; v < base.node_count(); ++v) {
            const auto q = sim.queue(m, v);
            int sum = 0;
            for (std::size_t c = 0; c < q.size(); ++c) {
                REQUIRE(q[c] >= 0);
                REQUIRE(sim.fifo(m, v, c).size() == static_cast<std::size_t>(q[c]));
                sum += q[c];
            }
            REQUIRE(sum == sim.server_total(m, v));
            // conservative: a nonempty server always serves someone
            REQUIRE(sim.in_service(m, v).has_value() == (sum > 0));
            total += sum;
        }
    REQUIRE(total == static_cast<long long>(N));
}

std::vector<Arrival> random_schedule(CounterRng& rng, int n, std::size_t colors)
{
    std::vector<Arrival> s;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        t += rng.exponential(1.0);
        s.push_back({t, rng.below(colors), rng.exponential(1.2)});
    }
    return s;
}

} // namespace

TEST_SUITE("ctmc")
{
    TEST_CASE("client count and trivial placements")
    {
        CHECK(client_count(10, 0.5) == 5);
        CHECK(client_count(10, 0.09) == 0);
        CHECK(client_count(100, 0.29) == 29);
        CHECK(client_count(1, 1.0) == 1);

        auto cfg = rshv1_config(10, 0.5, 1);
        cfg.placement = Placement::all_at_origin(kO);
        Simulator sim(cfg);
        CHECK(sim.client_count() == 5);
        for (std::size_t m = 0; m < 10; ++m) {
            CHECK(sim.server_total(m, kA) == 0);
            CHECK(sim.server_total(m, 2) == 0);
        }

        auto empty = rshv1_config(10, 0.09, 1);
        empty.t_max = 2.0;
        empty.sample_times = {1.0, 2.0};
        const auto res = simulate(empty);
        CHECK(res.events == 0);
        CHECK(res.measures.back().frequency(kO, {0}) == doctest::Approx(1.0).epsilon(1e-12));
        Simulator idle(empty);
        try {
            idle.step();
            FAIL("expected EmptyNetwork");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyNetwork);
        }

        auto bad = rshv1_config(0, 0.5, 1);
        CHECK_THROWS_AS(bad.validate(), Error);
    }

    TEST_CASE("exp moments")
    {
        EmpiricalMeasure m;
        m.nodes.resize(2);
        m.nodes[0][{0}] = 1.0;
        m.nodes[1][{1, 1}] = 1.0;
        const auto e = exp_moment(m, std::log(2.0));
        CHECK(e[0] == doctest::Approx(1.0));
        CHECK(e[1] == doctest::Approx(4.0));
        CHECK(exp_moment(m, 0.7)[0] == 1.0);

        auto cfg = rshv1_config(20, 0.5, 3);
        cfg.placement = Placement::uniform_random();
        const Simulator sim(cfg);
        const auto emp = sim.empirical();
        // direct computation from the servers
        for (std::size_t v = 0; v < 3; ++v) {
            double expect = 0.0;
            for (std::size_t c = 0; c < 20; ++c) expect += std::exp(0.1 * sim.server_total(c, v)) / 20.0;
            CHECK(exp_moment(emp, 0.1)[v] == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    TEST_CASE("priority decides the rate")
    {
        const auto net = build_rshv1();
        // A with two A clients and one BA client
        const std::vector<ClientPlacement> clients{{0, kA, 1}, {0, kA, 1}, {0, kA, 0}};
        Simulator sim(mean_field_expand(net, 1), clients, CounterRng(5));
        CHECK(sim.in_service(0, kA) == std::optional<std::size_t>(0));
        CHECK(sim.total_rate() == doctest::Approx(2.0));
        const auto rec = sim.step();
        CHECK(rec.node == kA);
        CHECK(rec.color_served == 0);
        CHECK(sim.queue(0, kA)[1] == 2);
        // BA is routed to O
        CHECK(rec.dest_node == kO);
    }

    TEST_CASE("single client at O: Exp(3) holding time and fair routing")
    {
        const auto net = build_rshv1();
        const int n = 20000;
        double sum_dt = 0.0, sum_dt2 = 0.0;
        int to_a = 0;
        for (int i = 0; i < n; ++i) {
            Simulator sim(mean_field_expand(net, 1), {{0, kO, 0}}, CounterRng(derive_seed(77, {std::uint64_t(i)})));
            const auto e = sim.choose_event();
            sum_dt += e.dt;
            sum_dt2 += e.dt * e.dt;
            const auto dest = net.ref(e.dest_flat);
            REQUIRE((e.dest_flat == net.flat("A.A") || e.dest_flat == net.flat("B.B")));
            to_a += dest.node == kA;
        }
        const double mean = sum_dt / n;
        CHECK(std::abs(mean - 1.0 / 3.0) < 4.0 * (1.0 / 3.0) / std::sqrt(n));
        CHECK(sum_dt2 / n == doctest::Approx(2.0 / 9.0).epsilon(0.05));
        CHECK(std::abs(to_a / double(n) - 0.5) < 4.0 * 0.5 / std::sqrt(n));
    }

    TEST_CASE("determinism")
    {
        auto cfg = rshv1_config(30, 0.4, 99);
        cfg.placement = Placement::uniform_random();
        cfg.t_max = 20.0;
        cfg.sample_times = {5.0, 10.0, 20.0};
        const auto a = simulate(cfg, true);
        const auto b = simulate(cfg, true);
        REQUIRE(a.events == b.events);
        for (std::size_t i = 0; i < a.measures.size(); ++i) CHECK(a.measures[i].nodes == b.measures[i].nodes);
        REQUIRE(a.log.size() == b.log.size());
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].t == b.log[i].t);
            CHECK(a.log[i].dest_copy == b.log[i].dest_copy);
        }
        cfg.seed = 100;
        CHECK(simulate(cfg).events != a.events);
    }

    TEST_CASE("conservation and conservative service after every step")
    {
        for (long long M : {1LL, 7LL, 40LL}) {
            auto cfg = rshv1_config(M, M == 1 ? 3.0 : 0.6, 1234 + M);
            cfg.placement = Placement::uniform_random();
            Simulator sim(cfg);
            const std::size_t N = sim.client_count();
            double last = 0.0;
            for (int k = 0; k < 5000; ++k) {
                sim.step();
                REQUIRE(sim.time() >= last);
                last = sim.time();
                check_server_invariants(sim, N);
                REQUIRE(sim.total_rate() == doctest::Approx(rate_oracle(sim)).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("rate tree path")
    {
        auto cfg = rshv1_config(4000, 0.5, 8);
        cfg.placement = Placement::uniform_random();
        Simulator sim(cfg);
        REQUIRE(sim.uses_rate_tree());
        for (int k = 0; k < 20000; ++k) sim.step();
        check_server_invariants(sim, 2000);
        CHECK(sim.total_rate() == doctest::Approx(rate_oracle(sim)).epsilon(1e-9));
    }

    TEST_CASE("copy exchangeability")
    {
        // Same initial configuration with copies relabelled; pooled statistics
        // must agree in law.
        const auto net = build_rshv1();
        const std::vector<ClientPlacement> base{{0, kO, 0}, {0, kO, 0}, {1, kA, 1}};
        std::vector<ClientPlacement> swapped = base;
        for (auto& c : swapped) c.copy = 2 - c.copy;
        const int reps = 3000;
        std::vector<double> fa, fb;
        for (int r = 0; r < reps; ++r) {
            Simulator a(mean_field_expand(net, 3), base, CounterRng(derive_seed(1, {std::uint64_t(r)})));
            Simulator b(mean_field_expand(net, 3), swapped, CounterRng(derive_seed(2, {std::uint64_t(r)})));
            a.run_until(0.4);
            b.run_until(0.4);
            fa.push_back(a.empirical().frequency(kO, {0}));
            fb.push_back(b.empirical().frequency(kO, {0}));
        }
        auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
        auto var = [&](const std::vector<double>& v) {
            const double m = mean(v);
            double s = 0.0;
            for (double x : v) s += (x - m) * (x - m);
            return s / (v.size() - 1);
        };
        const double se = std::sqrt((var(fa) + var(fb)) / reps);
        CHECK(std::abs(mean(fa) - mean(fb)) < 4.0 * se);

        // A permuted start with the same stream yields the same pooled snapshot
        // at time zero.
        Simulator a(mean_field_expand(net, 3), base, CounterRng(1));
        Simulator b(mean_field_expand(net, 3), swapped, CounterRng(1));
        CHECK(a.empirical().nodes == b.empirical().nodes);
    }

    TEST_CASE("single client occupation matches the single-client law")
    {
        const auto net = build_rshv1();
        const auto pi = single_client_stationary(net);
        Simulator sim(mean_field_expand(net, 1), {{0, kO, 0}}, CounterRng(2024));
        const int batches = 20;
        const double batch_t = 2500.0;
        std::vector<std::vector<double>> freq(5);
        std::size_t events = 0;
        for (int b = 0; b < batches; ++b) {
            sim.start_occupation();
            events += sim.run_until(sim.time() + batch_t);
            const auto occ = sim.occupation();
            for (std::size_t a = 0; a < 5; ++a) {
                const auto ref = net.ref(a);
                std::vector<int> x(net.colors_at(ref.node), 0);
                x[ref.color] = 1;
                freq[a].push_back(occ.frequency(ref.node, x));
            }
        }
        CHECK(events >= 100000);
        for (std::size_t a = 0; a < 5; ++a) {
            const double m = std::accumulate(freq[a].begin(), freq[a].end(), 0.0) / batches;
            double s = 0.0;
            for (double f : freq[a]) s += (f - m) * (f - m);
            const double se = std::sqrt(s / (batches - 1) / batches);
            CHECK(std::abs(m - pi[a]) < 3.0 * se);
        }
    }

    TEST_CASE("rho 0.05, M 100: marginal at O close to chi")
    {
        const auto chi = chi_rho(build_rshv1(), 0.05, 40);
        const double p_empty = chi.node(kO)[0];
        const int reps = 200;
        double s = 0.0, s2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            auto cfg = rshv1_config(100, 0.05, derive_seed(5, {std::uint64_t(r)}));
            cfg.placement = Placement::all_at_origin(kO);
            Simulator sim(cfg);
            sim.run_until(50.0);
            const double f = sim.empirical().frequency(kO, {0});
            s += f;
            s2 += f * f;
        }
        const double m = s / reps;
        const double se = std::sqrt((s2 / reps - m * m) / (reps - 1));
        CHECK(std::abs(m - p_empty) < 4.0 * se + 1e-3);
    }

    TEST_CASE("placement from a measure")
    {
        const auto net = build_rshv1();
        const auto chi = chi_rho(net, 0.1, 40);
        auto cfg = rshv1_config(2000, 0.1, 4);
        cfg.placement = Placement::from_measure(chi);
        const Simulator sim(cfg);
        CHECK(sim.client_count() == 200);
        const auto emp = sim.empirical();
        for (std::size_t v = 0; v < 3; ++v) CHECK(std::abs(emp.frequency(v, std::vector<int>(net.colors_at(v), 0)) - chi.node(v)[0]) < 0.01);

        auto wrong = rshv1_config(2000, 0.5, 4);
        wrong.placement = Placement::from_measure(chi);
        try {
            Simulator s(wrong);
            FAIL("expected BadPlacement");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::BadPlacement);
        }
    }

    TEST_CASE("single-server monotonicity")
    {
        CounterRng rng(17);
        for (auto d : {Discipline::Fifo, Discipline::PreemptivePriority}) {
            int ok = 0;
            for (int i = 0; i < 1000; ++i) {
                const auto sched = random_schedule(rng, 2 + static_cast<int>(rng.below(30)), 3);
                const Arrival extra{rng.uniform() * sched.back().time * 1.1, rng.below(3), rng.exponential(1.2)};
                ok += monotonicity_check(sched, extra, d);
            }
            CHECK(ok == 1000);
        }

        // extra client after everything has left
        const auto sched = random_schedule(rng, 10, 2);
        const auto base = queue_length_path(sched, Discipline::PreemptivePriority);
        const double t_extra = base.back().t + 1.0;
        auto plus = sched;
        plus.push_back({t_extra, 1, 0.5});
        const auto with = queue_length_path(plus, Discipline::PreemptivePriority);
        for (const auto& p : base)
            if (p.t < t_extra) CHECK(path_value(with, p.t) == p.count);
        for (double t = t_extra; t < t_extra + 1.0; t += 0.05) {
            const int diff = path_value(with, t) - path_value(base, t);
            CHECK(diff >= 0);
            CHECK(diff <= 1);
        }
    }
}
