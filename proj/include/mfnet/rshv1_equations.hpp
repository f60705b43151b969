#pragma once

#include "mfnet/measure.hpp"

#include <vector>

namespace mfnet::rshv1 {

// The three-node example written out term by term, independently of the
// generic builders in nlmp.hpp. The state space must be built on a network
// with the node and color names of build_rshv1(); rates and routing are read
// from it, the routing structure is hard-coded.
//
// Truncated terms (neighbors beyond |x| = L) are dropped; outflow terms are
// kept, which matches OverflowMode::Track.

/// Node master equations in queue coordinates, flat in queue layout.
std::vector<double> queue_rhs(const ProductMeasure& nu);

/// The full system in derived coordinates at load rho.
std::vector<double> derived_rhs(const DerivedVector& mu, double rho);

/// The linear part (rho = 0) in derived coordinates.
std::vector<double> linear_rhs(const DerivedVector& mu);

} // namespace mfnet::rshv1
