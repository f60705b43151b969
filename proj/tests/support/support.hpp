#pragma once

// Oracles and generators shared by the test binaries. Everything here is
// written independently of the library's numerics: plain loops and a
// hand-rolled Gaussian elimination, no Eigen.

#include "mfnet/lattice.hpp"
#include "mfnet/measure.hpp"
#include "mfnet/network.hpp"
#include "mfnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mfnet::testing {

using Matrix = std::vector<std::vector<double>>;

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> gauss_solve(Matrix a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) throw std::runtime_error("singular system");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Stationary law of a generator q (rows sum to zero): pi q = 0, sum pi = 1.
inline std::vector<double> generator_stationary(const Matrix& q)
{
    const std::size_t n = q.size();
    Matrix a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = q[j][i];
    for (std::size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
    std::vector<double> b(n, 0.0);
    b[n - 1] = 1.0;
    return gauss_solve(a, b);
}

/// Generator of one client's flat color: leave a at gamma_a, move by P.
inline Matrix single_client_generator(const ElementaryNetwork& net)
{
    const std::size_t n = net.color_count();
    Matrix q(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) q[a][b] += net.gamma(a) * net.routing(a, b);
        q[a][a] -= net.gamma(a);
    }
    return q;
}

/// M/M/1 law pi(k) = (1 - u) u^k.
inline double geometric(int k, double lambda, double gamma)
{
    const double u = lambda / gamma;
    return (1.0 - u) * std::pow(u, k);
}

/// Birth-death chain on {0..L} by the product formula.
inline std::vector<double> birth_death(const std::vector<double>& birth, const std::vector<double>& death)
{
    std::vector<double> p{1.0};
    for (std::size_t k = 0; k < birth.size(); ++k) p.push_back(p.back() * birth[k] / death[k]);
    const double z = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& x : p) x /= z;
    return p;
}

/// Random product measure: node v puts mass on shells |x| <= max_shell
/// with weights decaying like q^|x|.
inline ProductMeasure random_product(const std::shared_ptr<const StateSpace>& space, CounterRng& rng,
                                     int max_shell = 4, double q = 0.2)
{
    ProductMeasure nu(space);
    for (std::size_t v = 0; v < space->node_count(); ++v) {
        const Lattice& lat = space->lattice(v);
        auto p = nu.node(v);
        double z = 0.0;
        for (std::size_t i = 0; i < lat.size(); ++i) {
            p[i] = lat.total(i) <= max_shell ? rng.uniform() * std::pow(q, lat.total(i)) : 0.0;
            z += p[i];
        }
        for (auto& x : p) x /= z;
    }
    return nu;
}

/// Random probability vector on derived indices with |x| <= max_shell.
inline DerivedVector random_derived(const std::shared_ptr<const StateSpace>& space, CounterRng& rng,
                                    int max_shell = 4)
{
    DerivedVector mu(space);
    double z = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        mu[k] = space->derived_total(k) <= max_shell ? rng.uniform() : 0.0;
        z += mu[k];
    }
    mu *= 1.0 / z;
    return mu;
}

/// Zero-sum vector: difference of two random probability vectors.
inline DerivedVector random_zero_sum(const std::shared_ptr<const StateSpace>& space, CounterRng& rng,
                                     int max_shell = 4)
{
    return random_derived(space, rng, max_shell) - random_derived(space, rng, max_shell);
}

inline double max_abs(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// The flat index of "node.color" in a lattice-based vector: lattice point e_c.
inline std::size_t queue_index(const StateSpace& space, std::size_t v, std::vector<int> x)
{
    return space.queue_offset(v) + *space.lattice(v).index_of(x);
}

inline std::size_t derived_index(const StateSpace& space, std::size_t v, std::vector<int> x)
{
    return space.derived_index(v, *space.lattice(v).index_of(x));
}

} // namespace mfnet::testing
