#pragma once

#include "mfnet/network.hpp"

#include <cstddef>
#include <vector>

namespace mfnet {

/// A nonnegative rate per flat color (Poisson inflow or service throughput).
struct RateVector {
    std::vector<double> values;

    RateVector() = default;
    explicit RateVector(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit RateVector(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    double at(const ElementaryNetwork& net, std::string_view qualified) const { return values.at(net.flat(qualified)); }

    RateVector scaled(double s) const
    {
        RateVector out = *this;
        for (double& v : out.values) v *= s;
        return out;
    }
};

} // namespace mfnet
