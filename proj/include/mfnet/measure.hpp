#pragma once

#include "mfnet/lattice.hpp"

#include <json.hpp>

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace mfnet {

/// One probability measure per node on its truncated lattice, stored flat
/// in StateSpace queue layout.
class ProductMeasure {
public:
    /// Every node empty with probability one.
    explicit ProductMeasure(std::shared_ptr<const StateSpace> space);
    ProductMeasure(std::shared_ptr<const StateSpace> space, std::vector<double> mass);

    const StateSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const StateSpace>& space_ptr() const noexcept { return space_; }

    std::span<const double> node(std::size_t v) const;
    std::span<double> node(std::size_t v);
    const std::vector<double>& values() const noexcept { return mass_; }
    std::vector<double>& values() noexcept { return mass_; }

    double node_mass(std::size_t v) const;
    /// Mean number of clients per copy: sum over nodes of E|x|.
    double load() const;

private:
    std::shared_ptr<const StateSpace> space_;
    std::vector<double> mass_;
};

/// A real vector on the disjoint union of punctured lattices. Used both for
/// probability measures (the queue seen by an average customer) and for
/// signed differences / derivatives.
class DerivedVector {
public:
    explicit DerivedVector(std::shared_ptr<const StateSpace> space);
    DerivedVector(std::shared_ptr<const StateSpace> space, std::vector<double> values);

    const StateSpace& space() const noexcept { return *space_; }
    const std::shared_ptr<const StateSpace>& space_ptr() const noexcept { return space_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    double& operator[](std::size_t k) { return values_[k]; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::vector<double>& values() noexcept { return values_; }

    double total() const;

    DerivedVector& operator+=(const DerivedVector& other);
    DerivedVector& operator-=(const DerivedVector& other);
    DerivedVector& operator*=(double s);
    friend DerivedVector operator+(DerivedVector a, const DerivedVector& b) { return a += b; }
    friend DerivedVector operator-(DerivedVector a, const DerivedVector& b) { return a -= b; }
    friend DerivedVector operator*(double s, DerivedVector a) { return a *= s; }

private:
    std::shared_ptr<const StateSpace> space_;
    std::vector<double> values_;
};

using DerivedMeasure = DerivedVector;
using SignedDerived = DerivedVector;

/// mu'(x) = |x| nu_v(x) / load(nu). Throws ZeroLoad.
DerivedMeasure to_derived(const ProductMeasure& nu);

/// nu_v(x) = rho mu'(x) / |x| for x != 0, origin mass by normalization.
/// Throws LoadTooLarge if some origin mass would be negative.
ProductMeasure from_derived(const DerivedMeasure& mu, double rho);

/// Throws IndexMismatch unless both objects live on equal state spaces.
void require_same_space(const StateSpace& a, const StateSpace& b);

/// {"node": [{"x": [...], "mass": m}, ...], ...}; zero entries omitted.
nlohmann::json measure_to_json(const ProductMeasure& nu);
ProductMeasure measure_from_json(const nlohmann::json& doc, std::shared_ptr<const StateSpace> space);

/// Rows "t,node,x,mass" with x dash-separated; nonzero entries only.
void write_measure_csv_rows(std::ostream& out, double t, const ProductMeasure& nu);
void write_derived_csv_rows(std::ostream& out, double t, const DerivedVector& mu);

} // namespace mfnet
