#pragma once

#include "mfnet/ctmc.hpp"
#include "mfnet/measure.hpp"
#include "mfnet/rng.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace mfnet {

/// sum_x |mu(x)| e^{|x|} / |x|, accumulated shell by shell in the log domain.
double norm_Y(const SignedDerived& mu);
double norm_Y(const StateSpace& space, std::span<const double> mu);

struct NormOneOptions {
    double dt = 0.0;        // RK4 / Simpson step; 0 picks 0.2 / max service rate
    double rel_stop = 1e-12; // stop once the integrand is below this fraction of its start
    double t_limit = 1e4;    // BetaTooLarge beyond this horizon
    // Mass conservation holds only to rounding, so ||nu(t)|| levels off near
    // 1e-16 ||nu||; integration also stops once it falls below this fraction.
    double roundoff = 1e-14;
};

/// int_0^inf e^{beta t} || e^{tG} nu || dt by composite Simpson along an RK4
/// trajectory of the linear flow. nu must sum to zero within 1e-12.
/// Throws InvalidArgument off the zero-sum subspace and BetaTooLarge when the
/// integrand has not decayed by t_limit.
double norm_one(const SignedDerived& nu, double beta, const NormOneOptions& opt = {});

/// Half the l1 distance. Throws IndexMismatch on different lengths.
double tv_distance(std::span<const double> a, std::span<const double> b);
double tv_distance(const DerivedVector& a, const DerivedVector& b);
/// Distance between the node-v marginals of two product measures.
double tv_distance(const ProductMeasure& a, const ProductMeasure& b, std::size_t v);
/// Empirical node-v marginal against a truncated measure; empirical mass
/// outside the truncation counts in full.
double tv_distance(const EmpiricalMeasure& a, const ProductMeasure& b, std::size_t v);
/// Largest node-wise distance.
double tv_to_chi(const EmpiricalMeasure& a, const ProductMeasure& chi);

/// Random probability measure on the derived index set with norm_Y at most K
/// (K >= e) and support on |x| <= max_shell.
DerivedMeasure sample_derived_measure(std::shared_ptr<const StateSpace> space, double K, int max_shell,
                                      CounterRng& rng);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = a + b x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);
/// Weighted by w (empty means unit weights); r2 and slope_se use the weights.
LinearFit least_squares(std::span<const double> x, std::span<const double> y, std::span<const double> w);

struct PairContraction {
    double t_half = 0.0;  // infinity if the difference never halves from every start
    double beta_fit = 0.0;
    double r2 = 0.0;
};

struct ContractionReport {
    double T_half = 0.0;     // max over pairs
    double T_half_min = 0.0;
    double beta_est = 0.0;   // smallest fitted rate over pairs
    double beta_mean = 0.0;
    double r2_min = 0.0;
    int pairs_tested = 0;    // identical pairs are skipped
    std::vector<PairContraction> pairs;
};

struct ContractionOptions {
    int L = 20;
    double sample_dt = 0.05;
    double t_max = 400.0;
    double floor = 1e-10;     // stop once the norm falls below floor * initial
    double fit_start = 1e-2;  // fit window opens when the norm drops below this fraction
};

/// Random pairs with norm_Y(mu_i(0)) <= K, each difference evolved by the
/// linear flow. T_half per pair is the smallest grid T with
/// |d(t+T)| <= |d(t)| / 2 for all sampled t; beta is fitted on log |d(t)|
/// after the transient.
ContractionReport contraction_time(const ElementaryNetwork& net, double K, int pairs, std::uint64_t seed,
                                   const ContractionOptions& opt = {});

struct LipschitzReport {
    double C1 = 0.0;        // max ratio
    double mean_ratio = 0.0;
    int pairs_tested = 0;
};

/// Max over random pairs (norm <= K, support below the truncation) of
/// ||H(mu) - H(nu)||_1 / ((||mu|| + ||nu||) ||mu - nu||_1), with the ||.||_1
/// weight beta.
LipschitzReport lipschitz_check(std::shared_ptr<const StateSpace> space, int pairs, double K, double beta,
                                std::uint64_t seed);

struct MarginPoint {
    double rho = 0.0;
    double load_bound = 0.0; // observed sup of ||mu(t)|| along derived trajectories
    double chi_norm = 0.0;   // ||(chi^rho)'||
    double margin = 0.0;
};

struct MarginReport {
    double beta_est = 0.0;
    double lipschitz_C1 = 0.0;
    double load_bound = 0.0; // at the requested rho
    double margin = 0.0;     // at the requested rho
    double rho_star = 0.0;   // largest grid rho with negative margin at and below it
    std::vector<MarginPoint> scan;
};

struct MarginOptions {
    int L = 16;
    int contraction_pairs = 20;
    int lipschitz_pairs = 100;
    int trajectories = 4;
    double horizon = 20.0;
    std::vector<double> rho_grid{0.0, 1e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1};
};

/// margin(rho) = -beta_est + rho C1 (B(rho) + ||(chi^rho)'||), scanned over
/// the grid plus the requested rho.
MarginReport gronwall_margin(const ElementaryNetwork& net, double rho, double K, std::uint64_t seed,
                             const MarginOptions& opt = {});

struct RelaxationFit {
    double tau = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
};

/// Least-squares decay rate of log distance over the window from the first
/// local maximum to the first point below 3 noise_std. With a positive noise
/// level each point is weighted by (d / noise_std)^2. Confidence interval at
/// 95% from the Student t law. Throws NoDecay.
RelaxationFit relaxation_rate(std::span<const double> t, std::span<const double> distance,
                              std::span<const double> noise_std);
RelaxationFit relaxation_rate(std::span<const double> t, std::span<const double> distance, double noise_std = 0.0);

} // namespace mfnet
