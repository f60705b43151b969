#pragma once

#include "mfnet/analysis.hpp"
#include "mfnet/ctmc.hpp"
#include "mfnet/measure.hpp"

#include <cstdint>
#include <vector>

namespace mfnet {

struct StationaryOptions {
    double burn_in = 50.0;
    double t_max = 2e5;
    int replicas = 8;
    int jobs = 1;
};

/// Time-averaged occupation of the M-copy system against chi^rho.
struct StationaryComparison {
    long long M = 0;
    long long N = 0;
    double tv = 0.0;                 // pooled occupation, largest node-wise distance
    std::vector<double> replica_tv;  // the same per replica
    double tv_se = 0.0;              // standard error of the replica mean
    std::size_t events = 0;
};

/// Replica r is seeded derive_seed(seed, {M, r}) and starts from a uniform
/// random placement.
StationaryComparison stationary_tv(const ElementaryNetwork& net, long long M, double rho, const ProductMeasure& chi,
                                   std::uint64_t seed, const StationaryOptions& opt = {});

/// Expected share of clients in each flat color.
std::vector<double> color_shares(const ProductMeasure& nu);
std::vector<double> color_shares(const ElementaryNetwork& net, const EmpiricalMeasure& m);

/// Replica groups for the jackknife interval of the relaxation rate.
inline constexpr std::size_t kJackknifeGroups = 20;

struct RelaxationOptions {
    double t_max = 8.0;
    double sample_dt = 0.05;
    // Replicas at M are ceil(client_samples / N), so every M sees about the
    // same number of client paths and the same noise floor.
    long long client_samples = 4000;
    // Start: client colors drawn i.i.d. from the slow-mode perturbation of
    // the single-client equilibrium, or every client at start_node.
    bool slow_mode_start = true;
    std::size_t start_node = 0;
    // The equilibrium shares of the M-copy system come from one time-averaged
    // run of this length after a burn-in of 50.
    double reference_time = 2e5;
    int jobs = 1;
};

/// Distance of the pooled client color distribution from its equilibrium
/// along relaxation from a non-stationary start.
struct RelaxationCurve {
    long long M = 0;
    long long N = 0;
    int replicas = 0;
    std::vector<double> t;
    std::vector<double> distance;
    std::vector<double> reference;   // equilibrium color shares at this M
    std::vector<double> chi_shares;  // the same under chi^rho
    double noise_std = 0.0; // delta-method std of the distance at equilibrium
    RelaxationFit fit;      // left default when the curve never decays; the
                            // interval is the jackknife one over replica groups
    double tau_se = 0.0;
    bool fitted = false;
};

RelaxationCurve relaxation_curve(const ElementaryNetwork& net, long long M, double rho, const ProductMeasure& chi,
                                 std::uint64_t seed, const RelaxationOptions& opt = {});

/// pi + eps v, where pi is the single-client stationary law, v the left
/// eigenvector of the slowest nonzero mode of its generator and eps 0.9 of
/// the largest step keeping the vector nonnegative. rate receives -Re(lambda).
std::vector<double> slow_mode_shares(const ElementaryNetwork& net, double* rate = nullptr);

/// Time-averaged color shares of the M-copy system.
std::vector<double> equilibrium_color_shares(const ElementaryNetwork& net, long long M, double rho, double burn_in,
                                             double t_max, std::uint64_t seed);

} // namespace mfnet
