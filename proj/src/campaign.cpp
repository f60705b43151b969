#include "mfnet/campaign.hpp"

#include "mfnet/error.hpp"
#include "mfnet/parallel.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

namespace mfnet {

namespace {

EmpiricalMeasure pool(const std::vector<EmpiricalMeasure>& parts)
{
    EmpiricalMeasure out;
    out.nodes.resize(parts.front().nodes.size());
    const double w = 1.0 / static_cast<double>(parts.size());
    for (const auto& p : parts)
        for (std::size_t v = 0; v < p.nodes.size(); ++v)
            for (const auto& [x, f] : p.nodes[v]) out.nodes[v][x] += w * f;
    return out;
}

} // namespace

StationaryComparison stationary_tv(const ElementaryNetwork& net, long long M, double rho, const ProductMeasure& chi,
                                   std::uint64_t seed, const StationaryOptions& opt)
{
    if (opt.replicas < 1) throw Error(ErrorKind::InvalidArgument, "replicas must be positive");
    if (!(opt.burn_in >= 0.0) || !(opt.t_max > opt.burn_in))
        throw Error(ErrorKind::InvalidArgument, "need 0 <= burn_in < t_max");
    const auto R = static_cast<std::size_t>(opt.replicas);
    std::vector<EmpiricalMeasure> occ(R);
    std::vector<std::size_t> events(R, 0);
    parallel_for(R, opt.jobs, [&](std::size_t r) {
        SimConfig cfg{net};
        cfg.M = M;
        cfg.rho = rho;
        cfg.t_max = opt.t_max;
        cfg.seed = derive_seed(seed, {static_cast<std::uint64_t>(M), r});
        cfg.placement = Placement::uniform_random();
        Simulator sim(cfg);
        events[r] += sim.run_until(opt.burn_in);
        sim.start_occupation();
        events[r] += sim.run_until(opt.t_max);
        occ[r] = sim.occupation();
    });

    StationaryComparison out;
    out.M = M;
    out.N = client_count(M, rho);
    out.tv = tv_to_chi(pool(occ), chi);
    for (std::size_t r = 0; r < R; ++r) {
        out.replica_tv.push_back(tv_to_chi(occ[r], chi));
        out.events += events[r];
    }
    if (R > 1) {
        const double mean = std::accumulate(out.replica_tv.begin(), out.replica_tv.end(), 0.0) / R;
        double ss = 0.0;
        for (double x : out.replica_tv) ss += (x - mean) * (x - mean);
        out.tv_se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
    }
    return out;
}

namespace {

std::vector<double> normalized(std::vector<double> share)
{
    const double total = std::accumulate(share.begin(), share.end(), 0.0);
    if (!(total > 0.0)) throw Error(ErrorKind::ZeroLoad, "measure carries no clients");
    for (double& s : share) s /= total;
    return share;
}

} // namespace

std::vector<double> color_shares(const ProductMeasure& nu)
{
    const StateSpace& space = nu.space();
    const ElementaryNetwork& net = space.network();
    std::vector<double> share(net.color_count(), 0.0);
    for (std::size_t v = 0; v < space.node_count(); ++v) {
        const Lattice& lat = space.lattice(v);
        const auto p = nu.node(v);
        for (std::size_t i = 0; i < lat.size(); ++i)
            for (std::size_t c = 0; c < lat.dim(); ++c) share[net.flat(v, c)] += lat.point(i)[c] * p[i];
    }
    return normalized(std::move(share));
}

std::vector<double> color_shares(const ElementaryNetwork& net, const EmpiricalMeasure& m)
{
    std::vector<double> share(net.color_count(), 0.0);
    for (std::size_t v = 0; v < m.nodes.size(); ++v)
        for (const auto& [x, f] : m.nodes[v])
            for (std::size_t c = 0; c < x.size(); ++c) share[net.flat(v, c)] += x[c] * f;
    return normalized(std::move(share));
}

std::vector<double> equilibrium_color_shares(const ElementaryNetwork& net, long long M, double rho, double burn_in,
                                             double t_max, std::uint64_t seed)
{
    SimConfig cfg{net};
    cfg.M = M;
    cfg.rho = rho;
    cfg.t_max = t_max;
    cfg.seed = seed;
    cfg.placement = Placement::uniform_random();
    Simulator sim(cfg);
    sim.run_until(burn_in);
    sim.start_occupation();
    sim.run_until(t_max);
    return color_shares(net, sim.occupation());
}

std::vector<double> slow_mode_shares(const ElementaryNetwork& net, double* rate)
{
    const auto n = static_cast<Eigen::Index>(net.color_count());
    // Transposed generator of one client's color.
    Eigen::MatrixXd qt = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index f = 0; f < n; ++f) {
        const double g = net.gamma(static_cast<std::size_t>(f));
        for (const auto& [to, p] : net.routing_row(static_cast<std::size_t>(f))) qt(static_cast<Eigen::Index>(to), f) += g * p;
        qt(f, f) -= g;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(qt);
    const auto& ev = es.eigenvalues();
    Eigen::Index slow = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (ev(k).real() > -1e-9) continue;
        if (slow < 0 || ev(k).real() > ev(slow).real()) slow = k;
    }
    const std::vector<double> pi = single_client_stationary(net);
    if (slow < 0) return pi;
    if (rate) *rate = -ev(slow).real();
    Eigen::VectorXd v = es.eigenvectors().col(slow).real();
    double eps = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k)
        if (v(k) < 0.0) eps = std::min(eps, pi[static_cast<std::size_t>(k)] / -v(k));
    if (!std::isfinite(eps)) return pi;
    std::vector<double> p(pi);
    for (Eigen::Index k = 0; k < n; ++k) p[static_cast<std::size_t>(k)] += 0.9 * eps * v(k);
    return normalized(std::move(p));
}

RelaxationCurve relaxation_curve(const ElementaryNetwork& net, long long M, double rho, const ProductMeasure& chi,
                                 std::uint64_t seed, const RelaxationOptions& opt)
{
    if (!(opt.sample_dt > 0.0) || !(opt.t_max > opt.sample_dt))
        throw Error(ErrorKind::InvalidArgument, "need 0 < sample_dt < t_max");
    if (opt.client_samples < 1) throw Error(ErrorKind::InvalidArgument, "client_samples must be positive");
    const long long N = client_count(M, rho);
    if (N < 1) throw Error(ErrorKind::InvalidM, "floor(rho M) is zero at M=" + std::to_string(M));

    RelaxationCurve out;
    out.M = M;
    out.N = N;
    out.replicas = static_cast<int>((opt.client_samples + N - 1) / N);
    out.chi_shares = color_shares(chi);
    out.reference = equilibrium_color_shares(net, M, rho, 50.0, 50.0 + opt.reference_time,
                                             derive_seed(seed, {static_cast<std::uint64_t>(M), 0xE0}));
    const auto steps = static_cast<std::size_t>(std::llround(opt.t_max / opt.sample_dt));
    for (std::size_t k = 0; k <= steps; ++k) out.t.push_back(static_cast<double>(k) * opt.sample_dt);

    const auto R = static_cast<std::size_t>(out.replicas);
    const std::size_t F = net.color_count();
    // Integer totals per chunk of replicas; the merge is order independent.
    std::vector<double> cum;
    if (opt.slow_mode_start) {
        const auto p0 = slow_mode_shares(net);
        std::partial_sum(p0.begin(), p0.end(), std::back_inserter(cum));
    } else if (opt.start_node >= net.node_count()) {
        throw Error(ErrorKind::BadPlacement, "start node out of range");
    }
    const MeanFieldNetwork mf = mean_field_expand(net, M);
    const std::size_t chunks = std::min<std::size_t>(R, 64);
    std::vector<std::vector<long long>> counts(chunks, std::vector<long long>(out.t.size() * F, 0));
    parallel_for(chunks, opt.jobs, [&](std::size_t ch) {
        auto& c = counts[ch];
        for (std::size_t r = ch; r < R; r += chunks) {
            CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(M), r}));
            std::vector<ClientPlacement> clients;
            for (long long k = 0; k < N; ++k) {
                const auto copy = rng.below(static_cast<std::uint64_t>(M));
                if (cum.empty()) {
                    clients.push_back({copy, opt.start_node, 0});
                    continue;
                }
                const double u = rng.uniform() * cum.back();
                const auto f = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
                const ColorRef ref = net.ref(std::min(f, cum.size() - 1));
                clients.push_back({copy, ref.node, ref.color});
            }
            Simulator sim(mf, clients, rng);
            for (std::size_t k = 0; k < out.t.size(); ++k) {
                sim.run_until(out.t[k]);
                const auto& tot = sim.color_totals();
                for (std::size_t f = 0; f < F; ++f) c[k * F + f] += tot[f];
            }
        }
    });

    std::vector<long long> all(out.t.size() * F, 0);
    std::vector<long long> group_clients(chunks, 0);
    for (std::size_t g = 0; g < chunks; ++g) {
        for (std::size_t i = 0; i < all.size(); ++i) all[i] += counts[g][i];
        group_clients[g] = static_cast<long long>((R - g + chunks - 1) / chunks) * N;
    }
    const long long n_all = N * static_cast<long long>(R);

    // Distance curve and noise level from totals over n clients.
    auto curve = [&](const std::vector<long long>& c, long long n, std::vector<double>& d) {
        d.assign(out.t.size(), 0.0);
        for (std::size_t k = 0; k < out.t.size(); ++k) {
            double acc = 0.0;
            for (std::size_t f = 0; f < F; ++f)
                acc += std::abs(static_cast<double>(c[k * F + f]) / static_cast<double>(n) - out.reference[f]);
            d[k] = 0.5 * acc;
        }
        double var = 0.0;
        for (double p : out.reference) var += p * (1.0 - p);
        return 0.5 * std::sqrt(var / static_cast<double>(n));
    };
    out.noise_std = curve(all, n_all, out.distance);

    try {
        out.fit = relaxation_rate(out.t, out.distance, out.noise_std);
        out.fitted = true;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoDecay) throw;
        return out;
    }

    // Delete-one-group jackknife: the residuals of one curve are correlated
    // in time, so the regression interval is too narrow.
    if (chunks < 3) return out;
    std::vector<double> loo;
    std::vector<long long> part(all.size());
    std::vector<double> d;
    for (std::size_t g = 0; g < chunks; ++g) {
        for (std::size_t i = 0; i < all.size(); ++i) part[i] = all[i] - counts[g][i];
        const double sd = curve(part, n_all - group_clients[g], d);
        try {
            loo.push_back(relaxation_rate(out.t, d, sd).tau);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoDecay) throw;
            return out;
        }
    }
    const double G = static_cast<double>(loo.size());
    const double mean = std::accumulate(loo.begin(), loo.end(), 0.0) / G;
    double ss = 0.0;
    for (double x : loo) ss += (x - mean) * (x - mean);
    out.tau_se = std::sqrt((G - 1.0) / G * ss);
    const boost::math::students_t law(G - 1.0);
    const double q = boost::math::quantile(law, 0.975);
    out.fit.ci_lo = out.fit.tau - q * out.tau_se;
    out.fit.ci_hi = out.fit.tau + q * out.tau_se;
    return out;
}

} // namespace mfnet
