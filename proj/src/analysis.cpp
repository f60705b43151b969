#include "mfnet/analysis.hpp"

#include "mfnet/csv.hpp"
#include "mfnet/error.hpp"
#include "mfnet/fixpoint.hpp"
#include "mfnet/nlmp.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mfnet {

namespace {

double max_service_rate(const ElementaryNetwork& net)
{
    const auto& g = net.gamma_vector();
    return *std::max_element(g.begin(), g.end());
}

} // namespace

double norm_Y(const StateSpace& space, std::span<const double> mu)
{
    if (mu.size() != space.derived_size()) throw Error(ErrorKind::IndexMismatch, "vector size differs from the space");
    std::vector<double> shell(static_cast<std::size_t>(space.max_total()) + 1, 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const int n = space.derived_total(k);
        shell[static_cast<std::size_t>(n)] += std::abs(mu[k]) / n;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n < shell.size(); ++n)
        if (shell[n] > 0.0) top = std::max(top, static_cast<double>(n) + std::log(shell[n]));
    if (!std::isfinite(top)) return 0.0;
    double acc = 0.0;
    for (std::size_t n = 1; n < shell.size(); ++n)
        if (shell[n] > 0.0) acc += std::exp(static_cast<double>(n) + std::log(shell[n]) - top);
    return std::exp(top) * acc;
}

double norm_Y(const SignedDerived& mu) { return norm_Y(mu.space(), mu.values()); }

double norm_one(const SignedDerived& nu, double beta, const NormOneOptions& opt)
{
    const StateSpace& space = nu.space();
    const auto& v = nu.values();
    double sum = 0.0, l1 = 0.0;
    for (double x : v) {
        sum += x;
        l1 += std::abs(x);
    }
    if (std::abs(sum) > 1e-12 * std::max(1.0, l1))
        throw Error(ErrorKind::InvalidArgument, "norm_one needs a zero-sum vector, got sum " + format_double(sum));
    const double f0 = norm_Y(space, v);
    if (f0 == 0.0) return 0.0;

    const double h = opt.dt > 0.0 ? opt.dt : 0.2 / max_service_rate(space.network());
    LinearFlow flow(nu.space_ptr(), h);
    std::vector<double> y = v;
    double simpson = f0;
    double t = 0.0;
    for (long long k = 1;; ++k) {
        flow.step(y);
        t = static_cast<double>(k) * h;
        const double plain = norm_Y(space, y);
        const double f = std::exp(beta * t) * plain;
        if (!std::isfinite(f)) throw Error(ErrorKind::BetaTooLarge, "integrand overflowed at t=" + format_double(t));
        if (k % 2 == 0 && (f < opt.rel_stop * f0 || plain < opt.roundoff * f0)) return h / 3.0 * (simpson + f);
        simpson += (k % 2 == 1 ? 4.0 : 2.0) * f;
        if (t > opt.t_limit)
            throw Error(ErrorKind::BetaTooLarge, "integrand e^{beta t}||nu(t)|| has not decayed by t=" +
                                                     format_double(t) + " for beta=" + format_double(beta));
    }
}

double tv_distance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw Error(ErrorKind::IndexMismatch, "measures live on different index sets");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

double tv_distance(const DerivedVector& a, const DerivedVector& b)
{
    require_same_space(a.space(), b.space());
    return tv_distance(a.values(), b.values());
}

double tv_distance(const ProductMeasure& a, const ProductMeasure& b, std::size_t v)
{
    require_same_space(a.space(), b.space());
    return tv_distance(a.node(v), b.node(v));
}

double tv_distance(const EmpiricalMeasure& a, const ProductMeasure& b, std::size_t v)
{
    if (a.nodes.size() != b.space().node_count() || v >= a.nodes.size())
        throw Error(ErrorKind::IndexMismatch, "empirical measure and product measure have different nodes");
    const Lattice& lat = b.space().lattice(v);
    const auto bv = b.node(v);
    double s = std::accumulate(bv.begin(), bv.end(), 0.0);
    for (const auto& [x, f] : a.nodes[v]) {
        if (x.size() != lat.dim()) throw Error(ErrorKind::IndexMismatch, "queue vector dimension differs");
        if (const auto i = lat.index_of(x)) s += std::abs(f - bv[*i]) - bv[*i];
        else s += f;
    }
    return 0.5 * s;
}

double tv_to_chi(const EmpiricalMeasure& a, const ProductMeasure& chi)
{
    double d = 0.0;
    for (std::size_t v = 0; v < a.nodes.size(); ++v) d = std::max(d, tv_distance(a, chi, v));
    return d;
}

DerivedMeasure sample_derived_measure(std::shared_ptr<const StateSpace> space, double K, int max_shell,
                                      CounterRng& rng)
{
    const double e = std::exp(1.0);
    if (!(K >= e)) throw Error(ErrorKind::InvalidArgument, "norm bound K must be at least e");
    max_shell = std::clamp(max_shell, 1, space->max_total());
    const std::size_t n = space->derived_size();
    const int top = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_shell)));

    std::vector<double> raw(n, 0.0), unit(n, 0.0);
    double raw_sum = 0.0, unit_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const int t = space->derived_total(k);
        if (t <= top) raw_sum += raw[k] = rng.exponential(1.0);
        if (t == 1) unit_sum += unit[k] = rng.exponential(1.0);
    }
    for (double& x : raw) x /= raw_sum;
    for (double& x : unit) x /= unit_sum;

    const double target = e + (K - e) * rng.uniform();
    const double raw_norm = norm_Y(*space, raw);
    const double lambda = raw_norm > target ? (target - e) / (raw_norm - e) : 1.0;
    std::vector<double> mu(n);
    for (std::size_t k = 0; k < n; ++k) mu[k] = lambda * raw[k] + (1.0 - lambda) * unit[k];
    return DerivedMeasure(std::move(space), std::move(mu));
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y, std::span<const double> w)
{
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::InvalidArgument, "least squares needs >= 2 points");
    if (!w.empty() && w.size() != x.size()) throw Error(ErrorKind::IndexMismatch, "weights differ in length");
    auto weight = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
    double sw = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sw += weight(i);
        mx += weight(i) * x[i];
        my += weight(i) * y[i];
    }
    if (!(sw > 0.0)) throw Error(ErrorKind::InvalidArgument, "weights must not all vanish");
    mx /= sw;
    my /= sw;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += weight(i) * (x[i] - mx) * (x[i] - mx);
        sxy += weight(i) * (x[i] - mx) * (y[i] - my);
        syy += weight(i) * (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ssr += weight(i) * r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    const double n = static_cast<double>(x.size());
    f.slope_se = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return f;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) { return least_squares(x, y, {}); }

ContractionReport contraction_time(const ElementaryNetwork& net, double K, int pairs, std::uint64_t seed,
                                   const ContractionOptions& opt)
{
    if (pairs < 1) throw Error(ErrorKind::InvalidArgument, "pairs must be >= 1");
    const auto space = StateSpace::make(net, opt.L);
    const double h_max = 0.2 / max_service_rate(net);
    const auto sub = static_cast<int>(std::ceil(opt.sample_dt / h_max));
    LinearFlow flow(space, opt.sample_dt / sub);

    ContractionReport rep;
    rep.T_half = 0.0;
    rep.T_half_min = std::numeric_limits<double>::infinity();
    rep.beta_est = std::numeric_limits<double>::infinity();
    rep.r2_min = 1.0;
    double beta_sum = 0.0;

    for (int p = 0; p < pairs; ++p) {
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(p)}));
        const DerivedMeasure a = sample_derived_measure(space, K, opt.L, rng);
        const DerivedMeasure b = sample_derived_measure(space, K, opt.L, rng);
        std::vector<double> d(a.size());
        for (std::size_t k = 0; k < d.size(); ++k) d[k] = a[k] - b[k];
        const double n0 = norm_Y(*space, d);
        if (n0 == 0.0) continue;

        std::vector<double> t{0.0}, norms{n0};
        while (norms.back() >= opt.floor * n0 && t.back() < opt.t_max) {
            for (int s = 0; s < sub; ++s) flow.step(d);
            t.push_back(t.back() + opt.sample_dt);
            norms.push_back(norm_Y(*space, d));
        }

        PairContraction pc;
        pc.t_half = std::numeric_limits<double>::infinity();
        for (std::size_t j = 1; j < norms.size(); ++j) {
            bool ok = true;
            for (std::size_t i = 0; i + j < norms.size() && ok; ++i) ok = norms[i + j] <= 0.5 * norms[i];
            if (ok) {
                pc.t_half = static_cast<double>(j) * opt.sample_dt;
                break;
            }
        }

        std::size_t start = 0;
        while (start < norms.size() && norms[start] > opt.fit_start * n0) ++start;
        if (norms.size() - start < 3) start = 0;
        std::vector<double> x(t.begin() + static_cast<std::ptrdiff_t>(start), t.end()), y;
        for (std::size_t i = start; i < norms.size(); ++i) y.push_back(std::log(norms[i]));
        const LinearFit fit = least_squares(x, y);
        pc.beta_fit = -fit.slope;
        pc.r2 = fit.r2;

        rep.pairs.push_back(pc);
        ++rep.pairs_tested;
        rep.T_half = std::max(rep.T_half, pc.t_half);
        rep.T_half_min = std::min(rep.T_half_min, pc.t_half);
        rep.beta_est = std::min(rep.beta_est, pc.beta_fit);
        rep.r2_min = std::min(rep.r2_min, pc.r2);
        beta_sum += pc.beta_fit;
    }
    if (rep.pairs_tested == 0) {
        rep.T_half_min = 0.0;
        rep.beta_est = 0.0;
    } else {
        rep.beta_mean = beta_sum / rep.pairs_tested;
    }
    return rep;
}

LipschitzReport lipschitz_check(std::shared_ptr<const StateSpace> space, int pairs, double K, double beta,
                                std::uint64_t seed)
{
    if (pairs < 1) throw Error(ErrorKind::InvalidArgument, "pairs must be >= 1");
    LipschitzReport rep;
    double sum = 0.0;
    for (int p = 0; p < pairs; ++p) {
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(p)}));
        // Support below the truncation keeps H mass-conserving.
        const DerivedMeasure mu = sample_derived_measure(space, K, space->max_total() - 1, rng);
        const DerivedMeasure nu = sample_derived_measure(space, K, space->max_total() - 1, rng);
        const SignedDerived diff = mu - nu;
        const double dn = norm_one(diff, beta);
        if (dn == 0.0) continue;
        const SignedDerived dh = quadratic_part(mu) - quadratic_part(nu);
        const double ratio = norm_one(dh, beta) / ((norm_Y(mu) + norm_Y(nu)) * dn);
        rep.C1 = std::max(rep.C1, ratio);
        sum += ratio;
        ++rep.pairs_tested;
    }
    if (rep.pairs_tested > 0) rep.mean_ratio = sum / rep.pairs_tested;
    return rep;
}

MarginReport gronwall_margin(const ElementaryNetwork& net, double rho, double K, std::uint64_t seed,
                             const MarginOptions& opt)
{
    if (!(rho >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rho must be >= 0");
    const auto space = StateSpace::make(net, opt.L);
    ContractionOptions copt;
    copt.L = opt.L;
    const ContractionReport cr = contraction_time(net, K, opt.contraction_pairs, derive_seed(seed, {0}), copt);
    if (!(cr.beta_est > 0.0)) throw Error(ErrorKind::NoDecay, "linear flow shows no contraction");
    const LipschitzReport lr = lipschitz_check(space, opt.lipschitz_pairs, K, 0.5 * cr.beta_est, derive_seed(seed, {1}));

    MarginReport rep;
    rep.beta_est = cr.beta_est;
    rep.lipschitz_C1 = lr.C1;

    std::vector<double> grid = opt.rho_grid;
    grid.push_back(rho);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const double dt = 0.2 / max_outflow_rate(*space);
    for (double r : grid) {
        MarginPoint mp;
        mp.rho = r;
        for (int k = 0; k < opt.trajectories; ++k) {
            CounterRng rng(derive_seed(seed, {2, static_cast<std::uint64_t>(k)}));
            const DerivedMeasure mu0 = sample_derived_measure(space, K, opt.L - 1, rng);
            const DerivedTrajectory traj = integrate_derived(mu0, r, opt.horizon, dt, opt.horizon / 200.0);
            for (const auto& s : traj.states) mp.load_bound = std::max(mp.load_bound, norm_Y(s));
        }
        if (r > 0.0) {
            try {
                mp.chi_norm = norm_Y(to_derived(chi_rho(space, r)));
            } catch (const Error&) {
                mp.chi_norm = std::numeric_limits<double>::infinity();
            }
            mp.margin = -cr.beta_est + r * lr.C1 * (mp.load_bound + mp.chi_norm);
        } else {
            mp.margin = -cr.beta_est;
        }
        if (r == rho) {
            rep.load_bound = mp.load_bound;
            rep.margin = mp.margin;
        }
        rep.scan.push_back(mp);
    }
    for (const auto& mp : rep.scan) {
        if (!(mp.margin < 0.0)) break;
        rep.rho_star = mp.rho;
    }
    return rep;
}

RelaxationFit relaxation_rate(std::span<const double> t, std::span<const double> d, std::span<const double> sigma)
{
    if (t.size() != d.size() || sigma.size() != d.size())
        throw Error(ErrorKind::IndexMismatch, "relaxation inputs differ in length");
    const std::size_t n = d.size();
    std::size_t i0 = n;
    for (std::size_t i = 0; i < n; ++i) {
        const bool left = i == 0 || d[i] >= d[i - 1];
        const bool right = i + 1 == n || d[i] >= d[i + 1];
        if (left && right) {
            i0 = i;
            break;
        }
    }
    std::size_t end = i0;
    while (end < n && d[end] > 0.0 && d[end] >= 3.0 * sigma[end]) ++end;
    if (i0 >= n || end - i0 < 3) throw Error(ErrorKind::NoDecay, "fewer than 3 points above the noise floor");

    std::vector<double> x(t.begin() + static_cast<std::ptrdiff_t>(i0), t.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<double> y, w;
    bool weighted = true;
    for (std::size_t i = i0; i < end; ++i) {
        y.push_back(std::log(d[i]));
        // var(log d) ~ (sigma / d)^2
        w.push_back(d[i] * d[i] / (sigma[i] * sigma[i]));
        weighted = weighted && sigma[i] > 0.0;
    }
    if (!weighted) w.clear();
    const LinearFit fit = least_squares(x, y, w);
    if (!(fit.slope < 0.0)) throw Error(ErrorKind::NoDecay, "distance does not decrease over the window");

    RelaxationFit r;
    r.tau = -fit.slope;
    r.r2 = fit.r2;
    r.n = fit.n;
    r.t_begin = x.front();
    r.t_end = x.back();
    double q = 0.0;
    if (fit.n > 2) {
        const boost::math::students_t dist(static_cast<double>(fit.n - 2));
        q = boost::math::quantile(dist, 0.975);
    }
    r.ci_lo = r.tau - q * fit.slope_se;
    r.ci_hi = r.tau + q * fit.slope_se;
    return r;
}

RelaxationFit relaxation_rate(std::span<const double> t, std::span<const double> d, double noise_std)
{
    const std::vector<double> sigma(d.size(), noise_std);
    return relaxation_rate(t, d, sigma);
}

} // namespace mfnet
