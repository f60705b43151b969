#pragma once

#include "mfnet/measure.hpp"
#include "mfnet/rates.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <utility>
#include <vector>

namespace mfnet {

enum class OverflowMode {
    Reflect, // arrivals that would leave the lattice are blocked
    Track,   // such arrivals leave; the lost mass is accounted for
};

struct TruncationPolicy {
    int L = 40;
    OverflowMode overflow_mode = OverflowMode::Track;
    double mass_tol = 1e-8;

    void validate() const;
};

/// Service throughput per flat color: gamma_a times the probability that a
/// is the color in service at its node.
RateVector effective_rates(const ProductMeasure& nu);

/// Poisson inflow per flat color: sum_a throughput_a P[a, c].
RateVector inflow_rates(const ElementaryNetwork& net, const RateVector& throughput);

/// d nu / dt of the limiting process in queue coordinates, flat in the
/// StateSpace queue layout. Under Track, throws TruncationOverflow if the
/// rate of mass leaving through |x| = L exceeds policy.mass_tol.
std::vector<double> nlmp_rhs(const ProductMeasure& nu, const TruncationPolicy& policy = {});

/// Upper bound on the total jump rate out of any lattice state, over all
/// measures: max_v (max service rate at v + sum of the largest possible
/// inflows into v's colors).
double max_outflow_rate(const StateSpace& space);

/// 0.01 / max_outflow_rate.
double default_dt(const StateSpace& space);

struct NlmpSample {
    double t = 0.0;
    ProductMeasure nu;
    double load = 0.0;
};

struct NlmpTrajectory {
    std::vector<NlmpSample> samples;
    double max_step_defect = 0.0;  // largest per-step |node mass - 1| before renormalization
    double total_defect = 0.0;     // sum of the per-step defects
    double boundary_loss = 0.0;    // mass leaked through |x| = L (Track only)
    double most_negative = 0.0;    // most negative entry clipped to zero
};

/// Fixed-step RK4 from nu0 over [0, T]. The step is shrunk so that an
/// integer number of steps covers T. Samples every `sample_every` time units
/// (default T / 100) plus both ends. Requires dt * max_outflow_rate < 0.5.
/// Throws MassDefect if a step changes some node's mass by more than
/// policy.mass_tol; otherwise renormalizes each node.
NlmpTrajectory integrate(const ProductMeasure& nu0, double T, double dt, const TruncationPolicy& policy = {},
                         double sample_every = 0.0);

// ---- derived coordinates -------------------------------------------------

/// G mu: service jumps x -> x - e_k at rate gamma (|x|-1)/|x| and rebirth
/// jumps x -> e_c at rate gamma P[k, c] / |x|, k the color in service at x.
/// Never leaves the truncation.
SignedDerived linear_generator_apply(const SignedDerived& mu);

/// H(mu), the quadratic part: dmu/dt = G mu + rho H(mu).
SignedDerived quadratic_part(const SignedDerived& mu);

/// F(mu) = G mu + rho H(mu).
SignedDerived derived_rhs(const SignedDerived& mu, double rho);

/// Sparse vector on derived indices, sorted by index.
using SparseDerived = std::vector<std::pair<std::size_t, double>>;

/// Coefficient vector of mu(x) mu(y) in H (both orderings combined for
/// x != y), so that H(mu) = sum over unordered pairs {x, y} of
/// kernel_v(x, y) mu(x) mu(y). x and y are derived indices.
SparseDerived kernel_v(const StateSpace& space, std::size_t x, std::size_t y);

/// Matrix of G (column k = G e_k), assembled through linear_generator_apply.
Eigen::SparseMatrix<double> linear_generator_matrix(const std::shared_ptr<const StateSpace>& space);

/// Probability vector mu with G mu = 0, by sparse LU on the truncation.
DerivedMeasure linear_generator_stationary(const std::shared_ptr<const StateSpace>& space);

struct DerivedTrajectory {
    std::vector<double> times;
    std::vector<DerivedVector> states;
};

/// RK4 for dmu/dt = F(mu) with load rho (rho = 0 gives the linear flow).
DerivedTrajectory integrate_derived(const DerivedVector& mu0, double rho, double T, double dt,
                                    double sample_every = 0.0);

/// Steps the linear flow in place; the workhorse behind the contraction and
/// norm computations.
class LinearFlow {
public:
    LinearFlow(std::shared_ptr<const StateSpace> space, double dt);

    double dt() const noexcept { return dt_; }
    /// One RK4 step of size dt.
    void step(std::vector<double>& mu);

private:
    std::shared_ptr<const StateSpace> space_;
    double dt_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

namespace detail {

/// Raw kernels on flat spans; out is overwritten. Return boundary flux.
double queue_rhs_into(const StateSpace& space, OverflowMode mode, std::span<const double> nu, std::span<double> out,
                      std::vector<double>& scratch_a, std::vector<double>& scratch_b);
void linear_into(const StateSpace& space, std::span<const double> mu, std::span<double> out);
void quadratic_into(const StateSpace& space, std::span<const double> mu, std::span<double> out,
                    std::vector<double>& scratch);

} // namespace detail

} // namespace mfnet
