#pragma once

#include "mfnet/network.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace mfnet {

/// Queue vectors x in Z_+^dim with |x| = x_1 + ... + x_dim <= max_total.
///
/// Points are grouped in shells of equal |x|; the origin is index 0 and the
/// unit vector e_c is index 1 + c. Coordinates are in priority order, so the
/// color in service at x is its first nonzero coordinate.
class Lattice {
public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    Lattice(std::size_t dim, int max_total);

    std::size_t dim() const noexcept { return dim_; }
    int max_total() const noexcept { return max_total_; }
    std::size_t size() const noexcept { return totals_.size(); }

    std::span<const int> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    int total(std::size_t i) const { return totals_[i]; }
    /// Color rank in service at point i, or -1 at the origin.
    int in_service(std::size_t i) const { return service_[i]; }

    /// Index of x+e_c / x-e_c, or npos when it falls outside the lattice.
    std::size_t up(std::size_t i, std::size_t c) const { return up_[i * dim_ + c]; }
    std::size_t down(std::size_t i, std::size_t c) const { return down_[i * dim_ + c]; }
    std::size_t unit(std::size_t c) const { return 1 + c; }

    /// First index of the shell |x| = n; shell_begin(max_total + 1) == size().
    std::size_t shell_begin(int n) const { return shell_begin_.at(static_cast<std::size_t>(n)); }

    std::optional<std::size_t> index_of(std::span<const int> x) const;

private:
    std::size_t dim_;
    int max_total_;
    std::vector<int> coords_;
    std::vector<int> totals_;
    std::vector<int> service_;
    std::vector<std::size_t> up_;
    std::vector<std::size_t> down_;
    std::vector<std::size_t> shell_begin_;
};

/// Per-node truncated lattices of a network, plus the flat layouts used by
/// queue-coordinate measures (all points) and derived measures (origins
/// removed). Immutable; shared between measures via shared_ptr.
class StateSpace {
public:
    StateSpace(ElementaryNetwork net, int max_total);

    static std::shared_ptr<const StateSpace> make(const ElementaryNetwork& net, int max_total)
    {
        return std::make_shared<const StateSpace>(net, max_total);
    }

    const ElementaryNetwork& network() const noexcept { return net_; }
    int max_total() const noexcept { return max_total_; }
    std::size_t node_count() const noexcept { return lattices_.size(); }
    const Lattice& lattice(std::size_t v) const { return lattices_.at(v); }

    std::size_t queue_size() const noexcept { return queue_offset_.back(); }
    std::size_t queue_offset(std::size_t v) const { return queue_offset_.at(v); }

    std::size_t derived_size() const noexcept { return derived_offset_.back(); }
    std::size_t derived_offset(std::size_t v) const { return derived_offset_.at(v); }
    /// Derived index of lattice point i >= 1 at node v.
    std::size_t derived_index(std::size_t v, std::size_t i) const { return derived_offset_[v] + i - 1; }

    // Per derived index k:
    std::size_t derived_node(std::size_t k) const { return d_node_[k]; }
    std::size_t derived_site(std::size_t k) const { return d_site_[k]; }
    int derived_total(std::size_t k) const { return d_total_[k]; }
    /// Flat color in service at derived point k.
    std::size_t derived_service(std::size_t k) const { return d_service_[k]; }

    friend bool operator==(const StateSpace& a, const StateSpace& b) noexcept
    {
        return &a == &b || (a.max_total_ == b.max_total_ && a.queue_offset_ == b.queue_offset_ &&
                            a.net_.gamma_vector() == b.net_.gamma_vector() &&
                            a.net_.routing_matrix() == b.net_.routing_matrix());
    }

private:
    ElementaryNetwork net_;
    int max_total_;
    std::vector<Lattice> lattices_;
    std::vector<std::size_t> queue_offset_;
    std::vector<std::size_t> derived_offset_;
    std::vector<std::size_t> d_node_;
    std::vector<std::size_t> d_site_;
    std::vector<int> d_total_;
    std::vector<std::size_t> d_service_;
};

} // namespace mfnet
