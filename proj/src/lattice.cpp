#include "mfnet/lattice.hpp"

#include "mfnet/error.hpp"

#include <map>

namespace mfnet {

namespace {

// Compositions of n into dim parts, first coordinate descending.
void enumerate_shell(std::size_t dim, int n, std::vector<int>& current, std::vector<int>& out)
{
    const std::size_t pos = current.size();
    if (pos + 1 == dim) {
        current.push_back(n);
        out.insert(out.end(), current.begin(), current.end());
        current.pop_back();
        return;
    }
    for (int k = n; k >= 0; --k) {
        current.push_back(k);
        enumerate_shell(dim, n - k, current, out);
        current.pop_back();
    }
}

} // namespace

Lattice::Lattice(std::size_t dim, int max_total) : dim_(dim), max_total_(max_total)
{
    if (dim == 0) throw Error(ErrorKind::InvalidArgument, "lattice dimension must be positive");
    if (max_total < 1) throw Error(ErrorKind::InvalidArgument, "lattice truncation must be >= 1");

    // C(L + d, d) points; refuse anything that would not fit comfortably in memory.
    double count = 1.0;
    for (std::size_t k = 1; k <= dim; ++k) count = count * (max_total + static_cast<double>(k)) / static_cast<double>(k);
    if (count > 2e7) throw Error(ErrorKind::InvalidArgument, "lattice too large for dimension and truncation");

    std::vector<int> current;
    for (int n = 0; n <= max_total; ++n) {
        shell_begin_.push_back(coords_.size() / dim_);
        enumerate_shell(dim_, n, current, coords_);
    }
    shell_begin_.push_back(coords_.size() / dim_);

    const std::size_t size = coords_.size() / dim_;
    totals_.resize(size);
    service_.resize(size);
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < size; ++i) {
        const auto p = point(i);
        int total = 0;
        int service = -1;
        for (std::size_t c = 0; c < dim_; ++c) {
            total += p[c];
            if (service < 0 && p[c] > 0) service = static_cast<int>(c);
        }
        totals_[i] = total;
        service_[i] = service;
        index.emplace(std::vector<int>(p.begin(), p.end()), i);
    }

    up_.assign(size * dim_, npos);
    down_.assign(size * dim_, npos);
    std::vector<int> q(dim_);
    for (std::size_t i = 0; i < size; ++i) {
        const auto p = point(i);
        for (std::size_t c = 0; c < dim_; ++c) {
            q.assign(p.begin(), p.end());
            if (totals_[i] < max_total_) {
                q[c] += 1;
                up_[i * dim_ + c] = index.at(q);
                q[c] -= 1;
            }
            if (p[c] > 0) {
                q[c] -= 1;
                down_[i * dim_ + c] = index.at(q);
            }
        }
    }
}

std::optional<std::size_t> Lattice::index_of(std::span<const int> x) const
{
    if (x.size() != dim_) return std::nullopt;
    int total = 0;
    for (int v : x) {
        if (v < 0) return std::nullopt;
        total += v;
    }
    if (total > max_total_) return std::nullopt;
    // Walk up from the origin along coordinates.
    std::size_t i = 0;
    for (std::size_t c = 0; c < dim_; ++c)
        for (int k = 0; k < x[c]; ++k) i = up(i, c);
    return i;
}

StateSpace::StateSpace(ElementaryNetwork net, int max_total) : net_(std::move(net)), max_total_(max_total)
{
    queue_offset_.push_back(0);
    derived_offset_.push_back(0);
    for (std::size_t v = 0; v < net_.node_count(); ++v) {
        lattices_.emplace_back(net_.colors_at(v), max_total);
        const Lattice& lat = lattices_.back();
        queue_offset_.push_back(queue_offset_.back() + lat.size());
        derived_offset_.push_back(derived_offset_.back() + lat.size() - 1);
        for (std::size_t i = 1; i < lat.size(); ++i) {
            d_node_.push_back(v);
            d_site_.push_back(i);
            d_total_.push_back(lat.total(i));
            d_service_.push_back(net_.flat(v, static_cast<std::size_t>(lat.in_service(i))));
        }
    }
}

} // namespace mfnet
