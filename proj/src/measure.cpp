#include "mfnet/measure.hpp"

#include "mfnet/csv.hpp"
#include "mfnet/error.hpp"

#include <numeric>
#include <ostream>

namespace mfnet {

void require_same_space(const StateSpace& a, const StateSpace& b)
{
    if (!(a == b)) throw Error(ErrorKind::IndexMismatch, "measures live on different state spaces");
}

ProductMeasure::ProductMeasure(std::shared_ptr<const StateSpace> space) : space_(std::move(space))
{
    mass_.assign(space_->queue_size(), 0.0);
    for (std::size_t v = 0; v < space_->node_count(); ++v) mass_[space_->queue_offset(v)] = 1.0;
}

ProductMeasure::ProductMeasure(std::shared_ptr<const StateSpace> space, std::vector<double> mass)
    : space_(std::move(space)), mass_(std::move(mass))
{
    if (mass_.size() != space_->queue_size())
        throw Error(ErrorKind::IndexMismatch, "mass vector does not match the state space");
}

std::span<const double> ProductMeasure::node(std::size_t v) const
{
    return {mass_.data() + space_->queue_offset(v), space_->lattice(v).size()};
}

std::span<double> ProductMeasure::node(std::size_t v)
{
    return {mass_.data() + space_->queue_offset(v), space_->lattice(v).size()};
}

double ProductMeasure::node_mass(std::size_t v) const
{
    const auto m = node(v);
    return std::accumulate(m.begin(), m.end(), 0.0);
}

double ProductMeasure::load() const
{
    double total = 0.0;
    for (std::size_t v = 0; v < space_->node_count(); ++v) {
        const auto m = node(v);
        const Lattice& lat = space_->lattice(v);
        for (std::size_t i = 1; i < m.size(); ++i) total += lat.total(i) * m[i];
    }
    return total;
}

DerivedVector::DerivedVector(std::shared_ptr<const StateSpace> space)
    : space_(std::move(space)), values_(space_->derived_size(), 0.0)
{
}

DerivedVector::DerivedVector(std::shared_ptr<const StateSpace> space, std::vector<double> values)
    : space_(std::move(space)), values_(std::move(values))
{
    if (values_.size() != space_->derived_size())
        throw Error(ErrorKind::IndexMismatch, "derived vector does not match the state space");
}

double DerivedVector::total() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

DerivedVector& DerivedVector::operator+=(const DerivedVector& other)
{
    require_same_space(*space_, *other.space_);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
    return *this;
}

DerivedVector& DerivedVector::operator-=(const DerivedVector& other)
{
    require_same_space(*space_, *other.space_);
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
    return *this;
}

DerivedVector& DerivedVector::operator*=(double s)
{
    for (double& v : values_) v *= s;
    return *this;
}

DerivedMeasure to_derived(const ProductMeasure& nu)
{
    const double rho = nu.load();
    if (!(rho > 0.0)) throw Error(ErrorKind::ZeroLoad, "measure carries no clients");
    const StateSpace& space = nu.space();
    DerivedMeasure mu(nu.space_ptr());
    for (std::size_t k = 0; k < space.derived_size(); ++k) {
        const std::size_t v = space.derived_node(k);
        mu[k] = space.derived_total(k) * nu.values()[space.queue_offset(v) + space.derived_site(k)] / rho;
    }
    return mu;
}

ProductMeasure from_derived(const DerivedMeasure& mu, double rho)
{
    if (!(rho > 0.0)) throw Error(ErrorKind::InvalidArgument, "load must be positive");
    const StateSpace& space = mu.space();
    std::vector<double> mass(space.queue_size(), 0.0);
    for (std::size_t k = 0; k < space.derived_size(); ++k) {
        const std::size_t v = space.derived_node(k);
        mass[space.queue_offset(v) + space.derived_site(k)] = rho * mu[k] / space.derived_total(k);
    }
    for (std::size_t v = 0; v < space.node_count(); ++v) {
        const std::size_t begin = space.queue_offset(v);
        const std::size_t end = begin + space.lattice(v).size();
        const double busy = std::accumulate(mass.begin() + static_cast<std::ptrdiff_t>(begin) + 1,
                                            mass.begin() + static_cast<std::ptrdiff_t>(end), 0.0);
        const double empty = 1.0 - busy;
        if (empty < 0.0)
            throw Error(ErrorKind::LoadTooLarge, "node '" + space.network().node(v).name +
                                                     "' would need negative empty-queue mass " +
                                                     format_double(empty));
        mass[begin] = empty;
    }
    return ProductMeasure(mu.space_ptr(), std::move(mass));
}

nlohmann::json measure_to_json(const ProductMeasure& nu)
{
    nlohmann::json doc = nlohmann::json::object();
    const StateSpace& space = nu.space();
    for (std::size_t v = 0; v < space.node_count(); ++v) {
        const Lattice& lat = space.lattice(v);
        const auto m = nu.node(v);
        auto arr = nlohmann::json::array();
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i] == 0.0) continue;
            const auto p = lat.point(i);
            arr.push_back({{"x", std::vector<int>(p.begin(), p.end())}, {"mass", m[i]}});
        }
        doc[space.network().node(v).name] = arr;
    }
    return doc;
}

ProductMeasure measure_from_json(const nlohmann::json& doc, std::shared_ptr<const StateSpace> space)
{
    std::vector<double> mass(space->queue_size(), 0.0);
    try {
        for (const auto& [name, entries] : doc.items()) {
            const std::size_t v = space->network().node_index(name);
            const Lattice& lat = space->lattice(v);
            for (const auto& e : entries) {
                const auto x = e.at("x").get<std::vector<int>>();
                const auto i = lat.index_of(x);
                if (!i) throw Error(ErrorKind::ParseError, "point outside the lattice at node '" + name + "'");
                mass[space->queue_offset(v) + *i] += e.at("mass").get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed measure: ") + e.what());
    }
    return ProductMeasure(std::move(space), std::move(mass));
}

void write_measure_csv_rows(std::ostream& out, double t, const ProductMeasure& nu)
{
    const StateSpace& space = nu.space();
    const std::string ts = format_double(t);
    for (std::size_t v = 0; v < space.node_count(); ++v) {
        const Lattice& lat = space.lattice(v);
        const auto m = nu.node(v);
        for (std::size_t i = 0; i < m.size(); ++i)
            if (m[i] != 0.0)
                out << ts << ',' << space.network().node(v).name << ',' << dash_join(lat.point(i)) << ','
                    << format_double(m[i]) << '\n';
    }
}

void write_derived_csv_rows(std::ostream& out, double t, const DerivedVector& mu)
{
    const StateSpace& space = mu.space();
    const std::string ts = format_double(t);
    for (std::size_t k = 0; k < mu.size(); ++k) {
        if (mu[k] == 0.0) continue;
        const std::size_t v = space.derived_node(k);
        out << ts << ',' << space.network().node(v).name << ','
            << dash_join(space.lattice(v).point(space.derived_site(k))) << ',' << format_double(mu[k]) << '\n';
    }
}

} // namespace mfnet
