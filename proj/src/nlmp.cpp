#include "mfnet/nlmp.hpp"

#include "mfnet/csv.hpp"
#include "mfnet/error.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace mfnet {

void TruncationPolicy::validate() const
{
    if (L < 2) throw Error(ErrorKind::InvalidArgument, "truncation L must be >= 2");
    if (!(mass_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "mass_tol must be positive");
}

namespace {

// Flat color c -> derived index of the unit vector e_c at its node.
std::size_t unit_index(const StateSpace& s, std::size_t flat_color)
{
    const ColorRef r = s.network().ref(flat_color);
    return s.derived_index(r.node, s.lattice(r.node).unit(r.color));
}

void compute_throughput(const StateSpace& s, std::span<const double> nu, std::vector<double>& thr)
{
    const ElementaryNetwork& net = s.network();
    thr.assign(net.color_count(), 0.0);
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        const Lattice& lat = s.lattice(v);
        const std::size_t off = s.queue_offset(v);
        const std::size_t base = net.node_offset(v);
        for (std::size_t i = 1; i < lat.size(); ++i)
            thr[base + static_cast<std::size_t>(lat.in_service(i))] += nu[off + i];
    }
    for (std::size_t a = 0; a < thr.size(); ++a) thr[a] *= net.gamma(a);
}

void compute_inflow(const ElementaryNetwork& net, const std::vector<double>& thr, std::vector<double>& in)
{
    in.assign(net.color_count(), 0.0);
    for (std::size_t a = 0; a < thr.size(); ++a) {
        if (thr[a] == 0.0) continue;
        for (const auto& [c, p] : net.routing_row(a)) in[c] += thr[a] * p;
    }
}

} // namespace

RateVector effective_rates(const ProductMeasure& nu)
{
    std::vector<double> thr;
    compute_throughput(nu.space(), nu.values(), thr);
    return RateVector(std::move(thr));
}

RateVector inflow_rates(const ElementaryNetwork& net, const RateVector& throughput)
{
    std::vector<double> in;
    compute_inflow(net, throughput.values, in);
    return RateVector(std::move(in));
}

namespace detail {

double queue_rhs_into(const StateSpace& s, OverflowMode mode, std::span<const double> nu, std::span<double> out,
                      std::vector<double>& thr, std::vector<double>& in)
{
    const ElementaryNetwork& net = s.network();
    compute_throughput(s, nu, thr);
    compute_inflow(net, thr, in);
    std::fill(out.begin(), out.end(), 0.0);

    double flux = 0.0;
    for (std::size_t v = 0; v < s.node_count(); ++v) {
        const Lattice& lat = s.lattice(v);
        const std::size_t off = s.queue_offset(v);
        const std::size_t base = net.node_offset(v);
        const std::size_t dim = lat.dim();
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const double m = nu[off + i];
            if (m == 0.0) continue;
            double leave = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double rate = in[base + c];
                if (rate == 0.0) continue;
                const std::size_t j = lat.up(i, c);
                if (j != Lattice::npos) {
                    out[off + j] += m * rate;
                    leave += rate;
                } else if (mode == OverflowMode::Track) {
                    leave += rate;
                    flux += m * rate;
                }
            }
            if (i > 0) {
                const auto k = static_cast<std::size_t>(lat.in_service(i));
                const double g = net.gamma(base + k);
                out[off + lat.down(i, k)] += m * g;
                leave += g;
            }
            out[off + i] -= m * leave;
        }
    }
    return flux;
}

void linear_into(const StateSpace& s, std::span<const double> mu, std::span<double> out)
{
    const ElementaryNetwork& net = s.network();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double m = mu[k];
        if (m == 0.0) continue;
        const std::size_t a = s.derived_service(k);
        const double g = net.gamma(a);
        const int n = s.derived_total(k);
        out[k] -= g * m;
        if (n > 1) {
            const std::size_t v = s.derived_node(k);
            const std::size_t site = s.lattice(v).down(s.derived_site(k), net.ref(a).color);
            out[s.derived_index(v, site)] += m * g * (n - 1) / n;
        }
        for (const auto& [c, p] : net.routing_row(a)) out[unit_index(s, c)] += m * g * p / n;
    }
}

void quadratic_into(const StateSpace& s, std::span<const double> mu, std::span<double> out,
                    std::vector<double>& scratch)
{
    const ElementaryNetwork& net = s.network();
    const std::size_t nc = net.color_count();
    const std::size_t nv = s.node_count();
    // scratch layout: S[nc] | I[nc] | T[nv] | Isum[nv]
    scratch.assign(2 * nc + 2 * nv, 0.0);
    double* S = scratch.data();
    double* I = S + nc;
    double* T = I + nc;
    double* Isum = T + nv;

    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double w = mu[k] / s.derived_total(k);
        S[s.derived_service(k)] += w;
        T[s.derived_node(k)] += w;
    }
    for (std::size_t a = 0; a < nc; ++a) {
        if (S[a] == 0.0) continue;
        for (const auto& [c, p] : net.routing_row(a)) I[c] += net.gamma(a) * p * S[a];
    }
    for (std::size_t c = 0; c < nc; ++c) Isum[net.ref(c).node] += I[c];

    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        const double m = mu[k];
        if (m == 0.0) continue;
        const std::size_t v = s.derived_node(k);
        const Lattice& lat = s.lattice(v);
        const std::size_t site = s.derived_site(k);
        const int n = s.derived_total(k);
        const std::size_t base = net.node_offset(v);
        out[k] -= m * Isum[v];
        for (std::size_t c = 0; c < lat.dim(); ++c) {
            const double ic = I[base + c];
            if (ic == 0.0) continue;
            const std::size_t j = lat.up(site, c);
            if (j != Lattice::npos) out[s.derived_index(v, j)] += ic * m * (n + 1) / n;
        }
    }
    for (std::size_t c = 0; c < nc; ++c)
        if (I[c] != 0.0) out[unit_index(s, c)] -= I[c] * T[net.ref(c).node];
}

} // namespace detail

std::vector<double> nlmp_rhs(const ProductMeasure& nu, const TruncationPolicy& policy)
{
    policy.validate();
    std::vector<double> out(nu.values().size());
    std::vector<double> a, b;
    const double flux = detail::queue_rhs_into(nu.space(), policy.overflow_mode, nu.values(), out, a, b);
    if (policy.overflow_mode == OverflowMode::Track && flux > policy.mass_tol)
        throw Error(ErrorKind::TruncationOverflow,
                    "boundary outflow rate " + format_double(flux) + " exceeds mass_tol; increase L");
    return out;
}

double max_outflow_rate(const StateSpace& s)
{
    const ElementaryNetwork& net = s.network();
    // Throughput of color a is at most gamma_a.
    std::vector<double> max_in(net.color_count(), 0.0);
    for (std::size_t a = 0; a < net.color_count(); ++a)
        for (const auto& [c, p] : net.routing_row(a)) max_in[c] += net.gamma(a) * p;
    double best = 0.0;
    for (std::size_t v = 0; v < net.node_count(); ++v) {
        double g = 0.0;
        double in = 0.0;
        for (std::size_t c = 0; c < net.colors_at(v); ++c) {
            g = std::max(g, net.gamma(net.flat(v, c)));
            in += max_in[net.flat(v, c)];
        }
        best = std::max(best, g + in);
    }
    return best;
}

double default_dt(const StateSpace& s) { return 0.01 / max_outflow_rate(s); }

namespace {

template <class Rhs>
void rk4_step(std::vector<double>& y, double dt, Rhs&& f, std::vector<double>& k1, std::vector<double>& k2,
              std::vector<double>& k3, std::vector<double>& k4, std::vector<double>& tmp)
{
    const std::size_t n = y.size();
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);
    f(y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

struct StepPlan {
    long long steps;
    double dt;
    long long sample_stride;
};

StepPlan plan_steps(double T, double dt, double sample_every)
{
    if (!(T >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon T must be nonnegative");
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const auto steps = std::max(1LL, static_cast<long long>(std::ceil(T / dt - 1e-9)));
    const double h = T / static_cast<double>(steps);
    if (sample_every <= 0.0) sample_every = T / 100.0;
    const auto stride = std::max(1LL, std::llround(sample_every / std::max(h, 1e-300)));
    return {T > 0.0 ? steps : 0, h, stride};
}

} // namespace

NlmpTrajectory integrate(const ProductMeasure& nu0, double T, double dt, const TruncationPolicy& policy,
                         double sample_every)
{
    policy.validate();
    const StateSpace& s = nu0.space();
    if (s.max_total() != policy.L)
        throw Error(ErrorKind::IndexMismatch, "measure truncation differs from the policy's L");
    if (!(dt > 0.0) || dt * max_outflow_rate(s) >= 0.5)
        throw Error(ErrorKind::InvalidArgument,
                    "dt " + format_double(dt) + " violates dt * max outflow rate < 0.5");
    const StepPlan plan = plan_steps(T, dt, sample_every);

    NlmpTrajectory traj;
    std::vector<double> y = nu0.values();
    std::vector<double> k1, k2, k3, k4, tmp, sa, sb;
    double step_flux = 0.0;
    auto f = [&](const std::vector<double>& in, std::vector<double>& out) {
        const double flux = detail::queue_rhs_into(s, policy.overflow_mode, in, out, sa, sb);
        step_flux = std::max(step_flux, flux);
    };
    auto record = [&](double t) {
        ProductMeasure nu(nu0.space_ptr(), y);
        const double load = nu.load();
        traj.samples.push_back({t, std::move(nu), load});
    };

    record(0.0);
    for (long long n = 1; n <= plan.steps; ++n) {
        step_flux = 0.0;
        rk4_step(y, plan.dt, f, k1, k2, k3, k4, tmp);
        if (policy.overflow_mode == OverflowMode::Track) {
            if (step_flux > policy.mass_tol)
                throw Error(ErrorKind::TruncationOverflow,
                            "boundary outflow rate " + format_double(step_flux) + " exceeds mass_tol; increase L");
            traj.boundary_loss += step_flux * plan.dt;
        }
        for (double& m : y)
            if (m < 0.0) {
                traj.most_negative = std::min(traj.most_negative, m);
                m = 0.0;
            }
        for (std::size_t v = 0; v < s.node_count(); ++v) {
            const auto begin = y.begin() + static_cast<std::ptrdiff_t>(s.queue_offset(v));
            const auto end = begin + static_cast<std::ptrdiff_t>(s.lattice(v).size());
            const double mass = std::accumulate(begin, end, 0.0);
            const double defect = std::abs(mass - 1.0);
            traj.max_step_defect = std::max(traj.max_step_defect, defect);
            traj.total_defect += defect;
            if (defect > policy.mass_tol)
                throw Error(ErrorKind::MassDefect, "node '" + s.network().node(v).name + "' mass drifted by " +
                                                       format_double(defect) + " in one step");
            for (auto it = begin; it != end; ++it) *it /= mass;
        }
        if (n % plan.sample_stride == 0 || n == plan.steps) record(static_cast<double>(n) * plan.dt);
    }
    return traj;
}

SignedDerived linear_generator_apply(const SignedDerived& mu)
{
    SignedDerived out(mu.space_ptr());
    detail::linear_into(mu.space(), mu.values(), out.values());
    return out;
}

SignedDerived quadratic_part(const SignedDerived& mu)
{
    SignedDerived out(mu.space_ptr());
    std::vector<double> scratch;
    detail::quadratic_into(mu.space(), mu.values(), out.values(), scratch);
    return out;
}

SignedDerived derived_rhs(const SignedDerived& mu, double rho)
{
    SignedDerived out = linear_generator_apply(mu);
    if (rho != 0.0) {
        const SignedDerived h = quadratic_part(mu);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += rho * h[k];
    }
    return out;
}

SparseDerived kernel_v(const StateSpace& s, std::size_t x, std::size_t y)
{
    if (x >= s.derived_size() || y >= s.derived_size())
        throw Error(ErrorKind::InvalidArgument, "kernel_v index out of range");
    const ElementaryNetwork& net = s.network();
    std::map<std::size_t, double> acc;

    // Terms where `recv` is the queue receiving an arrival and `drv` is the
    // queue whose service emits it.
    auto ordered = [&](std::size_t recv, std::size_t drv) {
        const std::size_t a = s.derived_service(drv);
        const double ny = s.derived_total(drv);
        const std::size_t v = s.derived_node(recv);
        const Lattice& lat = s.lattice(v);
        const std::size_t site = s.derived_site(recv);
        const double nx = s.derived_total(recv);
        for (std::size_t c = 0; c < lat.dim(); ++c) {
            const std::size_t cf = net.flat(v, c);
            const double p = net.routing(a, cf);
            if (p == 0.0) continue;
            const double r = net.gamma(a) * p / ny;
            acc[recv] -= r;
            const std::size_t j = lat.up(site, c);
            if (j != Lattice::npos) acc[s.derived_index(v, j)] += r * (nx + 1.0) / nx;
            acc[unit_index(s, cf)] -= r / nx;
        }
    };
    ordered(x, y);
    if (x != y) ordered(y, x);

    SparseDerived out;
    for (const auto& [k, val] : acc)
        if (val != 0.0) out.emplace_back(k, val);
    return out;
}

Eigen::SparseMatrix<double> linear_generator_matrix(const std::shared_ptr<const StateSpace>& space)
{
    const std::size_t n = space->derived_size();
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> e(n, 0.0), col(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = 1.0;
        detail::linear_into(*space, e, col);
        e[k] = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (col[i] != 0.0)
                triplets.emplace_back(static_cast<int>(i), static_cast<int>(k), col[i]);
    }
    Eigen::SparseMatrix<double> g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    g.setFromTriplets(triplets.begin(), triplets.end());
    return g;
}

DerivedMeasure linear_generator_stationary(const std::shared_ptr<const StateSpace>& space)
{
    const Eigen::SparseMatrix<double> g = linear_generator_matrix(space);
    const auto n = g.rows();
    // Replace row 0 with the normalization sum(mu) = 1.
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index k = 0; k < g.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(g, k); it; ++it)
            if (it.row() != 0) triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (Eigen::Index k = 0; k < n; ++k) triplets.emplace_back(0, static_cast<int>(k), 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::NonErgodic, "linear generator is singular");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(0) = 1.0;
    const Eigen::VectorXd x = lu.solve(b);
    return DerivedMeasure(space, std::vector<double>(x.data(), x.data() + n));
}

DerivedTrajectory integrate_derived(const DerivedVector& mu0, double rho, double T, double dt, double sample_every)
{
    const StateSpace& s = mu0.space();
    const StepPlan plan = plan_steps(T, dt, sample_every);
    DerivedTrajectory traj;
    std::vector<double> y = mu0.values();
    std::vector<double> k1, k2, k3, k4, tmp, h, scratch;
    auto f = [&](const std::vector<double>& in, std::vector<double>& out) {
        detail::linear_into(s, in, out);
        if (rho != 0.0) {
            h.resize(in.size());
            detail::quadratic_into(s, in, h, scratch);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += rho * h[i];
        }
    };
    traj.times.push_back(0.0);
    traj.states.push_back(mu0);
    for (long long n = 1; n <= plan.steps; ++n) {
        rk4_step(y, plan.dt, f, k1, k2, k3, k4, tmp);
        if (n % plan.sample_stride == 0 || n == plan.steps) {
            traj.times.push_back(static_cast<double>(n) * plan.dt);
            traj.states.emplace_back(mu0.space_ptr(), y);
        }
    }
    return traj;
}

LinearFlow::LinearFlow(std::shared_ptr<const StateSpace> space, double dt) : space_(std::move(space)), dt_(dt)
{
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
}

void LinearFlow::step(std::vector<double>& mu)
{
    auto f = [&](const std::vector<double>& in, std::vector<double>& out) { detail::linear_into(*space_, in, out); };
    rk4_step(mu, dt_, f, k1_, k2_, k3_, k4_, tmp_);
}

} // namespace mfnet
