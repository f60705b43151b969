// Runs the acceptance criteria. One PASS/FAIL line per criterion; the exit
// status is nonzero if any selected criterion fails.
//
//   mfnet_acceptance                 all criteria
//   mfnet_acceptance --criterion 9   one criterion

#include "support.hpp"

#include "mfnet/analysis.hpp"
#include "mfnet/campaign.hpp"
#include "mfnet/ctmc.hpp"
#include "mfnet/fixpoint.hpp"
#include "mfnet/nlmp.hpp"
#include "mfnet/rshv1_equations.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace mfnet;
using namespace mfnet::testing;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream info;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            info << "  failed: " << what << '\n';
        }
    }
};

using Check = std::function<void(Outcome&)>;

// 1
void flow_balance(Outcome& o)
{
    const auto net = build_rshv1();
    const auto lam = solve_flow_balance(net);
    const double unit = lam.at(net, "A.A");
    const std::pair<const char*, double> expect[] = {{"O.O", 2}, {"A.A", 1}, {"A.BA", 1}, {"B.B", 1}, {"B.AB", 1}};
    for (const auto& [name, v] : expect) {
        const double got = lam.at(net, name) / unit;
        o.info << "  " << name << " " << got << '\n';
        o.require(std::abs(got - v) < 1e-10, std::string("proportion of ") + name);
    }
}

// 2
void mm1(Outcome& o)
{
    const ElementaryNetwork net({{"Q", {"q"}}}, {3.0}, {1.0});
    const RateVector lam(std::vector<double>{1.0});
    const auto d = node_stationary(net, 0, lam, 200);
    double worst = 0.0;
    for (int k = 0; k <= 200; ++k)
        worst = std::max(worst, std::abs(d.p[static_cast<std::size_t>(k)] - (2.0 / 3.0) * std::pow(1.0 / 3.0, k)));
    const double n = expected_customers(net, lam);
    o.info << "  max |pi(k) - geometric| " << worst << ", expected customers " << n << '\n';
    o.require(worst < 1e-9, "geometric law");
    o.require(std::abs(n - 0.5) < 1e-8, "expected customers");
}

// 3
void equilibrium(Outcome& o)
{
    const auto net = build_rshv1();
    for (double rho : {0.02, 0.05, 0.1}) {
        const auto chi = chi_rho(net, rho, 40);
        const double q = max_abs(nlmp_rhs(chi));
        const double d = max_abs(derived_rhs(to_derived(chi), rho).values());
        o.info << "  rho " << rho << ": queue rhs " << q << ", derived rhs " << d << '\n';
        o.require(q < 1e-6 && d < 1e-6, "equilibrium at rho " + std::to_string(rho));
    }
}

// 4
void two_paths(Outcome& o)
{
    const auto space = StateSpace::make(build_rshv1(), 20);
    CounterRng rng(4);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto mu = random_derived(space, rng, 20);
        const double rho = rng.uniform();
        worst = std::max(worst, max_abs_diff(rshv1::derived_rhs(mu, rho), derived_rhs(mu, rho).values()));
    }
    o.info << "  max entrywise difference " << worst << '\n';
    o.require(worst < 1e-10, "hand-written and generic equations agree");
}

// 5
void linear_stationary(Outcome& o)
{
    const auto net = build_rshv1();
    const auto space = StateSpace::make(net, 20);
    const auto mu = linear_generator_stationary(space);
    std::vector<double> unit(net.color_count(), 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k)
        if (space->derived_total(k) == 1) unit[space->derived_service(k)] = mu[k];
    const double z = std::accumulate(unit.begin(), unit.end(), 0.0);
    for (double& u : unit) u /= z;
    const double diff = max_abs_diff(unit, generator_stationary(single_client_generator(net)));
    o.info << "  unit-shell mass " << z << ", max difference " << diff << '\n';
    o.require(diff < 1e-8, "unit shell proportional to the single-client law");
}

// 6
void contraction(Outcome& o)
{
    const auto r = contraction_time(build_rshv1(), 10.0, 20, 6);
    o.info << "  pairs " << r.pairs_tested << ", T_half " << r.T_half << " (min " << r.T_half_min << "), beta_est "
           << r.beta_est << ", min R2 " << r.r2_min << '\n';
    o.require(r.pairs_tested == 20, "20 distinct pairs");
    o.require(std::isfinite(r.T_half) && r.T_half > 0.0, "common finite T_half");
    o.require(r.r2_min > 0.99, "log-linear decay");
}

// 7
void margin(Outcome& o)
{
    const auto r = gronwall_margin(build_rshv1(), 0.01, 10.0, 7);
    o.info << "  beta_est " << r.beta_est << ", C1 " << r.lipschitz_C1 << ", rho* " << r.rho_star << '\n';
    bool zero_seen = false;
    for (const auto& p : r.scan) {
        o.info << "  rho " << p.rho << " margin " << p.margin << '\n';
        if (p.rho == 0.0) {
            zero_seen = true;
            o.require(p.margin == -r.beta_est, "margin at rho 0 equals -beta_est");
        }
        if (p.rho <= r.rho_star) o.require(p.margin < 0.0, "negative margin below rho*");
    }
    o.require(zero_seen, "scan includes rho 0");
    o.require(r.rho_star > 0.0, "rho* > 0");
}

// 8
void single_client(Outcome& o)
{
    const auto net = build_rshv1();
    const auto pi = single_client_stationary(net);
    Simulator sim(mean_field_expand(net, 1), {{0, 0, 0}}, CounterRng(8));
    const int batches = 20;
    std::vector<std::vector<double>> f(pi.size());
    std::size_t events = 0;
    for (int b = 0; b < batches; ++b) {
        sim.start_occupation();
        events += sim.run_until(sim.time() + 2500.0);
        const auto occ = sim.occupation();
        for (std::size_t a = 0; a < pi.size(); ++a) {
            const auto ref = net.ref(a);
            std::vector<int> x(net.colors_at(ref.node), 0);
            x[ref.color] = 1;
            f[a].push_back(occ.frequency(ref.node, x));
        }
    }
    o.info << "  events " << events << '\n';
    o.require(events >= 100000, "at least 1e5 events");
    for (std::size_t a = 0; a < pi.size(); ++a) {
        const double m = std::accumulate(f[a].begin(), f[a].end(), 0.0) / batches;
        double s = 0.0;
        for (double x : f[a]) s += (x - m) * (x - m);
        const double se = std::sqrt(s / (batches - 1) / batches);
        o.info << "  " << net.qualified_name(a) << ": " << m << " vs " << pi[a] << " (se " << se << ")\n";
        o.require(std::abs(m - pi[a]) < 3.0 * se, "occupation of " + net.qualified_name(a));
    }
}

// 9
void occupation_trend(Outcome& o)
{
    const auto net = build_rshv1();
    const double rho = 0.05;
    const auto chi = chi_rho(net, rho, 40);
    StationaryOptions opt;
    double prev = INFINITY;
    double last = INFINITY;
    for (long long M : {25LL, 50LL, 100LL, 200LL}) {
        const auto r = stationary_tv(net, M, rho, chi, 9, opt);
        o.info << "  M " << M << " N " << r.N << ": TV " << r.tv << " (replica mean se " << r.tv_se << ", events "
               << r.events << ")\n";
        o.require(r.tv <= prev, "TV non-increasing at M = " + std::to_string(M));
        prev = r.tv;
        last = r.tv;
    }
    o.require(last < 0.05, "TV < 0.05 at M = 200");
}

// 10
void relaxation_trend(Outcome& o)
{
    const auto net = build_rshv1();
    const double rho = 0.05;
    const auto chi = chi_rho(net, rho, 40);
    RelaxationOptions opt;
    opt.client_samples = 100000;
    std::vector<RelaxationFit> fits;
    for (long long M : {25LL, 50LL, 100LL}) {
        const auto r = relaxation_curve(net, M, rho, chi, 10, opt);
        o.info << "  M " << M << " N " << r.N << " replicas " << r.replicas << ": ";
        if (!r.fitted) {
            o.info << "no decay\n";
            o.require(false, "relaxation fitted at M = " + std::to_string(M));
            continue;
        }
        o.info << "tau " << r.fit.tau << " [" << r.fit.ci_lo << ", " << r.fit.ci_hi << "] window [" << r.fit.t_begin
               << ", " << r.fit.t_end << "]\n";
        o.require(r.fit.tau > 0.0, "tau > 0 at M = " + std::to_string(M));
        fits.push_back(r.fit);
    }
    for (std::size_t i = 0; i < fits.size(); ++i)
        for (std::size_t j = i + 1; j < fits.size(); ++j)
            o.require(fits[i].ci_lo <= fits[j].ci_hi && fits[j].ci_lo <= fits[i].ci_hi, "confidence intervals overlap");
}

// 11
void conservation(Outcome& o)
{
    const auto net = build_rshv1();
    {
        SimConfig cfg{net};
        cfg.M = 100;
        cfg.rho = 0.5;
        cfg.seed = 11;
        cfg.placement = Placement::uniform_random();
        Simulator sim(cfg);
        const auto N = static_cast<long long>(sim.client_count());
        bool ok = true;
        for (int k = 0; k < 100000 && ok; ++k) {
            sim.step();
            const auto& t = sim.color_totals();
            ok = std::accumulate(t.begin(), t.end(), 0LL) == N;
            if (k % 1000 == 0) {
                long long servers = 0;
                for (std::size_t m = 0; m < 100; ++m)
                    for (std::size_t v = 0; v < 3; ++v) servers += sim.server_total(m, v);
                ok = ok && servers == N;
            }
        }
        o.info << "  CTMC: 1e5 steps with N = " << N << (ok ? " conserved" : " NOT conserved") << '\n';
        o.require(ok, "client count in every step");
    }
    {
        const auto space = StateSpace::make(net, 40);
        CounterRng rng(11);
        const auto nu0 = from_derived(random_derived(space, rng, 4), 0.1);
        const auto traj = integrate(nu0, 10.0, default_dt(*space), {}, 0.5);
        double drift = 0.0;
        for (const auto& s : traj.samples) drift = std::max(drift, std::abs(s.load - nu0.load()));
        o.info << "  NLMP: total mass defect " << traj.total_defect << ", load drift " << drift << '\n';
        o.require(traj.total_defect < 1e-6, "mass defect");
        o.require(drift < 1e-6, "load drift");
    }
    {
        CounterRng rng(11);
        int ok = 0;
        for (auto d : {Discipline::Fifo, Discipline::PreemptivePriority})
            for (int i = 0; i < 1000; ++i) {
                std::vector<Arrival> s;
                double t = 0.0;
                const int n = 2 + static_cast<int>(rng.below(30));
                for (int k = 0; k < n; ++k) {
                    t += rng.exponential(1.0);
                    s.push_back({t, rng.below(3), rng.exponential(1.2)});
                }
                const Arrival extra{rng.uniform() * t * 1.1, rng.below(3), rng.exponential(1.2)};
                ok += monotonicity_check(s, extra, d);
            }
        o.info << "  monotonicity: " << ok << " / 2000 schedules\n";
        o.require(ok == 2000, "monotonicity coupling");
    }
}

struct Criterion {
    int id;
    const char* name;
    Check run;
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
    CLI11_PARSE(app, argc, argv);

    const Criterion all[] = {
        {1, "flow balance oracle", flow_balance},
        {2, "M/M/1 oracle", mm1},
        {3, "chi is an equilibrium", equilibrium},
        {4, "two-path consistency", two_paths},
        {5, "rho = 0 stationarity transfer", linear_stationary},
        {6, "contraction of the linear flow", contraction},
        {7, "Gronwall margin", margin},
        {8, "single-client simulation oracle", single_client},
        {9, "TV to chi non-increasing in M", occupation_trend},
        {10, "relaxation rates uniform in M", relaxation_trend},
        {11, "conservation suite", conservation},
    };

    bool ok = true;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << o.info.str();
        std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
        std::fflush(stdout);
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
