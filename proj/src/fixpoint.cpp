#include "mfnet/fixpoint.hpp"

#include "mfnet/csv.hpp"
#include "mfnet/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace mfnet {

RateVector solve_flow_balance(const ElementaryNetwork& net)
{
    if (!routing_strongly_connected(net))
        throw Error(ErrorKind::NonErgodic, "routing chain is not irreducible");
    const auto n = static_cast<Eigen::Index>(net.color_count());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = net.routing(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) - (i == j ? 1.0 : 0.0);
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    const Eigen::VectorXd x = a.fullPivLu().solve(b);
    return RateVector(std::vector<double>(x.data(), x.data() + n));
}

double node_utilization(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas)
{
    double u = 0.0;
    for (std::size_t c = 0; c < net.colors_at(v); ++c) {
        const std::size_t f = net.flat(v, c);
        u += lambdas[f] / net.gamma(f);
    }
    return u;
}

double NodeDistribution::mean_total() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) m += lattice->total(i) * p[i];
    return m;
}

double NodeDistribution::busy(std::size_t c) const
{
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (lattice->point(i)[c] > 0) m += p[i];
    return m;
}

namespace {

struct Solved {
    std::vector<double> p;
    double tail;
    double residual;
};

// arrivals[c] and service[c] in priority order.
Solved solve_on(const Lattice& lat, const std::vector<double>& arrivals, const std::vector<double>& service)
{
    const auto n = static_cast<Eigen::Index>(lat.size());
    // Transposed generator: column i holds the rates out of state i.
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> diag(lat.size(), 0.0);
    for (std::size_t i = 0; i < lat.size(); ++i) {
        for (std::size_t c = 0; c < lat.dim(); ++c) {
            const std::size_t j = lat.up(i, c);
            if (j == Lattice::npos || arrivals[c] == 0.0) continue;
            trip.emplace_back(static_cast<int>(j), static_cast<int>(i), arrivals[c]);
            diag[i] += arrivals[c];
        }
        if (i > 0) {
            const auto k = static_cast<std::size_t>(lat.in_service(i));
            trip.emplace_back(static_cast<int>(lat.down(i, k)), static_cast<int>(i), service[k]);
            diag[i] += service[k];
        }
    }
    for (std::size_t i = 0; i < lat.size(); ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -diag[i]);
    Eigen::SparseMatrix<double> qt(n, n);
    qt.setFromTriplets(trip.begin(), trip.end());

    std::vector<Eigen::Triplet<double>> sys;
    for (const auto& t : trip)
        if (t.row() != 0) sys.push_back(t);
    for (Eigen::Index i = 0; i < n; ++i) sys.emplace_back(0, static_cast<int>(i), 1.0);
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(sys.begin(), sys.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorKind::NonErgodic, "node generator is singular");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(0) = 1.0;
    Eigen::VectorXd x = lu.solve(b);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = std::max(x(i), 0.0);
    x /= x.sum();
    const Eigen::VectorXd r = qt * x;

    Solved s{std::vector<double>(x.data(), x.data() + n), 0.0, r.cwiseAbs().maxCoeff()};
    for (std::size_t i = lat.shell_begin(lat.max_total()); i < lat.size(); ++i) s.tail += s.p[i];
    return s;
}

void node_rates(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas, std::vector<double>& arr,
                std::vector<double>& svc)
{
    arr.clear();
    svc.clear();
    for (std::size_t c = 0; c < net.colors_at(v); ++c) {
        arr.push_back(lambdas[net.flat(v, c)]);
        svc.push_back(net.gamma(net.flat(v, c)));
    }
}

void require_stable(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas)
{
    const double u = node_utilization(net, v, lambdas);
    if (!(u < kStabilityMargin))
        throw Error(ErrorKind::Unstable, "node '" + net.node(v).name + "' utilization " + format_double(u) +
                                             " is not below " + format_double(kStabilityMargin));
}

NodeDistribution solve_node(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas, int L)
{
    std::vector<double> arr, svc;
    node_rates(net, v, lambdas, arr, svc);
    auto lat = std::make_shared<const Lattice>(net.colors_at(v), L);
    Solved s = solve_on(*lat, arr, svc);
    return {std::move(lat), std::move(s.p), s.tail, s.residual};
}

} // namespace

int truncation_cap(std::size_t dim)
{
    switch (dim) {
    case 1: return 200;
    case 2: return 80;
    case 3: return 32;
    default: return 16;
    }
}

NodeDistribution node_stationary(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas, int L,
                                 double tail_tol)
{
    if (v >= net.node_count()) throw Error(ErrorKind::InvalidArgument, "node index out of range");
    if (lambdas.size() != net.color_count()) throw Error(ErrorKind::IndexMismatch, "rate vector size mismatch");
    require_stable(net, v, lambdas);

    if (L > 0) {
        NodeDistribution d = solve_node(net, v, lambdas, L);
        if (d.tail >= tail_tol)
            throw Error(ErrorKind::TruncationTooSmall, "node '" + net.node(v).name + "' tail mass " +
                                                           format_double(d.tail) + " at L=" + std::to_string(L));
        return d;
    }
    const int cap = truncation_cap(net.colors_at(v));
    NodeDistribution d;
    for (int l = 8;; l = std::min(l + 8, cap)) {
        d = solve_node(net, v, lambdas, l);
        if (d.tail < tail_tol) return d;
        if (l == cap) break;
    }
    throw Error(ErrorKind::TruncationTooSmall, "node '" + net.node(v).name + "' tail mass " + format_double(d.tail) +
                                                   " at the largest truncation L=" + std::to_string(cap));
}

double expected_customers(const ElementaryNetwork& net, const RateVector& lambdas)
{
    double total = 0.0;
    for (std::size_t v = 0; v < net.node_count(); ++v) {
        bool idle = true;
        for (std::size_t c = 0; c < net.colors_at(v); ++c) idle = idle && lambdas[net.flat(v, c)] == 0.0;
        if (idle) continue;
        total += node_stationary(net, v, lambdas).mean_total();
    }
    return total;
}

LoadCalibration calibrate_load(const ElementaryNetwork& net, double rho, double tol)
{
    if (!(rho > 0.0)) throw Error(ErrorKind::InvalidArgument, "load must be positive");
    LoadCalibration cal;
    cal.direction = solve_flow_balance(net);
    double worst = 0.0;
    for (std::size_t v = 0; v < net.node_count(); ++v) worst = std::max(worst, node_utilization(net, v, cal.direction));
    cal.alpha_max = kStabilityMargin / worst;

    // Feasibility at the margin, on the largest lattices and without the tail check.
    const double hi_alpha = cal.alpha_max * (1.0 - 1e-9);
    const RateVector hi_rates = cal.direction.scaled(hi_alpha);
    double n_hi = 0.0;
    for (std::size_t v = 0; v < net.node_count(); ++v)
        n_hi += solve_node(net, v, hi_rates, truncation_cap(net.colors_at(v))).mean_total();
    if (rho >= n_hi)
        throw Error(ErrorKind::LoadInfeasible, "load " + format_double(rho) + " exceeds " + format_double(n_hi) +
                                                   ", the mean population at the stability margin");

    double lo = 0.0;
    double hi = hi_alpha;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const RateVector r = cal.direction.scaled(mid);
        const double n = expected_customers(net, r);
        cal.alpha = mid;
        cal.rates = r;
        cal.expected = n;
        if (std::abs(n - rho) < tol) return cal;
        (n < rho ? lo : hi) = mid;
    }
    return cal;
}

ProductMeasure chi_rho(std::shared_ptr<const StateSpace> space, double rho)
{
    const ElementaryNetwork& net = space->network();
    const LoadCalibration cal = calibrate_load(net, rho);
    std::vector<double> mass(space->queue_size(), 0.0);
    std::vector<double> arr, svc;
    for (std::size_t v = 0; v < net.node_count(); ++v) {
        node_rates(net, v, cal.rates, arr, svc);
        const Solved s = solve_on(space->lattice(v), arr, svc);
        if (s.tail >= kTailTolerance)
            throw Error(ErrorKind::TruncationTooSmall, "node '" + net.node(v).name + "' tail mass " +
                                                           format_double(s.tail) + " at L=" +
                                                           std::to_string(space->max_total()));
        std::copy(s.p.begin(), s.p.end(), mass.begin() + static_cast<std::ptrdiff_t>(space->queue_offset(v)));
    }
    return ProductMeasure(std::move(space), std::move(mass));
}

ProductMeasure chi_rho(const ElementaryNetwork& net, double rho, int L) { return chi_rho(StateSpace::make(net, L), rho); }

} // namespace mfnet
