#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfnet {

/// A (node, color) pair. `color` is the priority rank within the node:
/// rank 0 is served first.
struct ColorRef {
    std::size_t node = 0;
    std::size_t color = 0;

    friend bool operator==(const ColorRef&, const ColorRef&) = default;
};

struct NodeSpec {
    std::string name;
    std::vector<std::string> colors; // highest priority first
};

/// Servers, client colors, exponential service rates and a routing matrix
/// over the disjoint union of all colors. Immutable after construction.
///
/// Colors are addressed either by ColorRef or by a flat index into the
/// concatenation of all color lists in node order.
class ElementaryNetwork {
public:
    /// `gamma` and `routing` are indexed by flat color; `routing` is dense
    /// row-major, size n*n. Throws InvalidNetwork on malformed shapes or
    /// duplicate names; value-level problems are left to validate_network.
    ElementaryNetwork(std::vector<NodeSpec> nodes, std::vector<double> gamma,
                      std::vector<double> routing);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t color_count() const noexcept { return gamma_.size(); }
    std::size_t colors_at(std::size_t node) const { return nodes_.at(node).colors.size(); }
    const NodeSpec& node(std::size_t v) const { return nodes_.at(v); }
    const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }

    std::size_t flat(ColorRef ref) const { return offsets_.at(ref.node) + ref.color; }
    std::size_t flat(std::size_t node, std::size_t color) const { return flat(ColorRef{node, color}); }
    ColorRef ref(std::size_t flat_index) const { return refs_.at(flat_index); }
    std::size_t node_offset(std::size_t node) const { return offsets_.at(node); }

    /// Lookup by "node.color" (e.g. "A.BA"). Throws InvalidArgument if unknown.
    std::size_t flat(std::string_view qualified_name) const;
    std::size_t node_index(std::string_view name) const;
    std::string qualified_name(std::size_t flat_index) const;

    double gamma(std::size_t flat_index) const { return gamma_.at(flat_index); }
    double gamma(ColorRef ref) const { return gamma_.at(flat(ref)); }
    double routing(std::size_t from, std::size_t to) const { return routing_[from * gamma_.size() + to]; }
    const std::vector<double>& gamma_vector() const noexcept { return gamma_; }
    const std::vector<double>& routing_matrix() const noexcept { return routing_; }

    /// Nonzero entries of a routing row, in increasing target order.
    const std::vector<std::pair<std::size_t, double>>& routing_row(std::size_t from) const
    {
        return sparse_rows_.at(from);
    }

private:
    std::vector<NodeSpec> nodes_;
    std::vector<double> gamma_;
    std::vector<double> routing_;
    std::vector<std::size_t> offsets_;
    std::vector<ColorRef> refs_;
    std::vector<std::vector<std::pair<std::size_t, double>>> sparse_rows_;
};

struct ValidationReport {
    bool row_stochastic = false;
    bool rates_positive = false;
    bool chain_ergodic = false;
    std::vector<std::string> messages;

    bool ok() const noexcept { return row_stochastic && rates_positive && chain_ergodic; }
};

inline constexpr double kRowSumTolerance = 1e-12;

/// Soft limit on nodes and colors per node; larger networks are accepted but
/// reported in the validation messages.
inline constexpr std::size_t kSoftSizeLimit = 32;

ValidationReport validate_network(const ElementaryNetwork& net);

/// True iff the digraph on flat colors with an edge wherever routing > 0 is
/// strongly connected.
bool routing_strongly_connected(const ElementaryNetwork& net);

/// Stationary law of one client wandering the network: it leaves (v,c) at
/// rate gamma(v,c) and moves according to the routing row. Throws NonErgodic.
std::vector<double> single_client_stationary(const ElementaryNetwork& net);

/// A server of the expanded graph: copy index and base node.
struct ServerRef {
    std::size_t copy = 0;
    std::size_t node = 0;

    friend bool operator==(const ServerRef&, const ServerRef&) = default;
};

/// M copies of a base network with every routing entry spread uniformly over
/// the M target copies.
class MeanFieldNetwork {
public:
    MeanFieldNetwork(ElementaryNetwork base, std::size_t copies);

    const ElementaryNetwork& base() const noexcept { return base_; }
    std::size_t copies() const noexcept { return copies_; }

    double routing(std::size_t from_copy, std::size_t from_flat, std::size_t to_copy,
                   std::size_t to_flat) const;

    /// Dense routing over (copy, flat color) pairs, index copy * n + flat.
    std::vector<double> dense_routing() const;

    /// Number of directed colored bonds: M^2 per positive base routing entry.
    std::size_t bond_count() const;

    /// Directed server-level edges: (v1^i, v2^j) for every base node edge.
    std::vector<std::pair<ServerRef, ServerRef>> node_edges() const;

private:
    ElementaryNetwork base_;
    std::size_t copies_;
};

MeanFieldNetwork mean_field_expand(const ElementaryNetwork& net, long long copies);

/// The three-server network with nodes O (one color), A (colors BA > A) and
/// B (colors AB > B).
ElementaryNetwork build_rshv1();

} // namespace mfnet
