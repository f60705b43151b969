#pragma once

#include "mfnet/measure.hpp"
#include "mfnet/rates.hpp"

#include <memory>
#include <vector>

namespace mfnet {

inline constexpr double kStabilityMargin = 0.95;
inline constexpr double kTailTolerance = 1e-10;

/// Left fixed vector of the routing matrix (lambda = lambda P), normalized to
/// sum 1. Throws NonErgodic.
RateVector solve_flow_balance(const ElementaryNetwork& net);

/// sum_c lambda_c / gamma_c over the colors of node v.
double node_utilization(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas);

struct NodeDistribution {
    std::shared_ptr<const Lattice> lattice;
    std::vector<double> p;   // indexed like the lattice
    double tail = 0.0;       // mass on |x| = L
    double residual = 0.0;   // max |pi Q| on the truncation

    double mean_total() const;
    /// Probability that coordinate c is positive.
    double busy(std::size_t c) const;
};

/// Stationary law of node v fed by independent Poisson flows lambda_c, with
/// preemptive-priority exponential service, solved exactly on |x| <= L.
/// Arrivals at |x| = L are blocked. L <= 0 picks the smallest L on a grid of
/// 8 with tail below kTailTolerance (capped per dimension).
/// Throws Unstable (utilization >= kStabilityMargin) and TruncationTooSmall.
NodeDistribution node_stationary(const ElementaryNetwork& net, std::size_t v, const RateVector& lambdas, int L = 0,
                                 double tail_tol = kTailTolerance);

/// Largest automatic truncation tried for a lattice of this dimension.
int truncation_cap(std::size_t dim);

/// Mean total number of clients, summed over nodes.
double expected_customers(const ElementaryNetwork& net, const RateVector& lambdas);

struct LoadCalibration {
    RateVector direction; // from solve_flow_balance
    double alpha = 0.0;
    RateVector rates;     // alpha * direction
    double expected = 0.0;
    double alpha_max = 0.0; // stability margin along the direction
};

/// Bisection on alpha until |N(alpha direction) - rho| < tol.
/// Throws LoadInfeasible if rho is not reachable below the stability margin.
LoadCalibration calibrate_load(const ElementaryNetwork& net, double rho, double tol = 1e-8);

/// Product of node stationary laws at the calibrated rates, each solved on
/// the lattice |x| <= L.
ProductMeasure chi_rho(const ElementaryNetwork& net, double rho, int L = 40);
ProductMeasure chi_rho(std::shared_ptr<const StateSpace> space, double rho);

} // namespace mfnet
