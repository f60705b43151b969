#include "mfnet/network.hpp"

#include "mfnet/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mfnet {

ElementaryNetwork::ElementaryNetwork(std::vector<NodeSpec> nodes, std::vector<double> gamma,
                                     std::vector<double> routing)
    : nodes_(std::move(nodes)), gamma_(std::move(gamma)), routing_(std::move(routing))
{
    if (nodes_.empty()) throw Error(ErrorKind::InvalidNetwork, "network has no nodes");

    std::set<std::string> node_names;
    std::size_t total = 0;
    for (const auto& n : nodes_) {
        if (n.name.empty()) throw Error(ErrorKind::InvalidNetwork, "empty node name");
        if (!node_names.insert(n.name).second)
            throw Error(ErrorKind::InvalidNetwork, "duplicate node name '" + n.name + "'");
        if (n.colors.empty())
            throw Error(ErrorKind::InvalidNetwork, "node '" + n.name + "' has no colors");
        std::set<std::string> color_names(n.colors.begin(), n.colors.end());
        if (color_names.size() != n.colors.size())
            throw Error(ErrorKind::InvalidNetwork,
                        "node '" + n.name + "' lists a color twice; priority must be a strict order");
        offsets_.push_back(total);
        for (std::size_t c = 0; c < n.colors.size(); ++c) refs_.push_back({offsets_.size() - 1, c});
        total += n.colors.size();
    }
    if (gamma_.size() != total) {
        std::ostringstream os;
        os << "gamma has " << gamma_.size() << " entries, expected " << total;
        throw Error(ErrorKind::InvalidNetwork, os.str());
    }
    if (routing_.size() != total * total) {
        std::ostringstream os;
        os << "routing has " << routing_.size() << " entries, expected " << total * total;
        throw Error(ErrorKind::InvalidNetwork, os.str());
    }
    sparse_rows_.resize(total);
    for (std::size_t i = 0; i < total; ++i)
        for (std::size_t j = 0; j < total; ++j)
            if (routing_[i * total + j] != 0.0) sparse_rows_[i].emplace_back(j, routing_[i * total + j]);
}

std::size_t ElementaryNetwork::node_index(std::string_view name) const
{
    for (std::size_t v = 0; v < nodes_.size(); ++v)
        if (nodes_[v].name == name) return v;
    throw Error(ErrorKind::InvalidArgument, "unknown node '" + std::string(name) + "'");
}

std::size_t ElementaryNetwork::flat(std::string_view qualified_name) const
{
    const auto dot = qualified_name.find('.');
    if (dot == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument,
                    "color reference '" + std::string(qualified_name) + "' is not of the form node.color");
    const std::size_t v = node_index(qualified_name.substr(0, dot));
    const auto color = qualified_name.substr(dot + 1);
    const auto& colors = nodes_[v].colors;
    for (std::size_t c = 0; c < colors.size(); ++c)
        if (colors[c] == color) return offsets_[v] + c;
    throw Error(ErrorKind::InvalidArgument, "unknown color '" + std::string(qualified_name) + "'");
}

std::string ElementaryNetwork::qualified_name(std::size_t flat_index) const
{
    const ColorRef r = ref(flat_index);
    return nodes_[r.node].name + "." + nodes_[r.node].colors[r.color];
}

bool routing_strongly_connected(const ElementaryNetwork& net)
{
    const std::size_t n = net.color_count();
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        std::size_t count = 1;
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                const double p = transpose ? net.routing(j, i) : net.routing(i, j);
                if (p > 0.0 && !seen[j]) {
                    seen[j] = 1;
                    ++count;
                    stack.push_back(j);
                }
            }
        }
        return count == n;
    };
    return reaches_all(false) && reaches_all(true);
}

ValidationReport validate_network(const ElementaryNetwork& net)
{
    ValidationReport report;
    const std::size_t n = net.color_count();

    report.rates_positive = true;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = net.gamma(i);
        if (!(g > 0.0) || !std::isfinite(g)) {
            report.rates_positive = false;
            report.messages.push_back("gamma(" + net.qualified_name(i) + ") must be a positive number");
        }
    }

    report.row_stochastic = true;
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        bool negative = false;
        for (std::size_t j = 0; j < n; ++j) {
            const double p = net.routing(i, j);
            negative = negative || p < 0.0 || !std::isfinite(p);
            sum += p;
        }
        if (negative || std::abs(sum - 1.0) > kRowSumTolerance) {
            report.row_stochastic = false;
            std::ostringstream os;
            os.precision(17);
            os << "routing row " << net.qualified_name(i) << " sums to " << sum
               << (negative ? " and has a negative entry" : "");
            report.messages.push_back(os.str());
        }
    }

    report.chain_ergodic = routing_strongly_connected(net);
    if (!report.chain_ergodic)
        report.messages.push_back("single-client chain is not irreducible");

    if (net.node_count() > kSoftSizeLimit)
        report.messages.push_back("note: more than 32 nodes; beyond the tested size range");
    for (const auto& node : net.nodes())
        if (node.colors.size() > kSoftSizeLimit)
            report.messages.push_back("note: node '" + node.name + "' has more than 32 colors");
    return report;
}

std::vector<double> single_client_stationary(const ElementaryNetwork& net)
{
    if (!routing_strongly_connected(net))
        throw Error(ErrorKind::NonErgodic, "routing graph is not strongly connected");
    const auto n = static_cast<Eigen::Index>(net.color_count());

    // Q^T pi = 0 with the last balance equation swapped for sum(pi) = 1.
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double g = net.gamma(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double rate = g * net.routing(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            a(j, i) += rate;
            a(i, i) -= rate;
        }
    }
    a.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b(n - 1) = 1.0;
    const Eigen::VectorXd pi = a.fullPivLu().solve(b);
    return {pi.data(), pi.data() + n};
}

MeanFieldNetwork::MeanFieldNetwork(ElementaryNetwork base, std::size_t copies)
    : base_(std::move(base)), copies_(copies)
{
    if (copies_ < 1) throw Error(ErrorKind::InvalidM, "number of copies must be at least 1");
}

double MeanFieldNetwork::routing(std::size_t from_copy, std::size_t from_flat, std::size_t to_copy,
                                 std::size_t to_flat) const
{
    if (from_copy >= copies_ || to_copy >= copies_)
        throw Error(ErrorKind::InvalidArgument, "copy index out of range");
    return base_.routing(from_flat, to_flat) / static_cast<double>(copies_);
}

std::vector<double> MeanFieldNetwork::dense_routing() const
{
    const std::size_t n = base_.color_count();
    const std::size_t size = n * copies_;
    std::vector<double> out(size * size, 0.0);
    const double scale = 1.0 / static_cast<double>(copies_);
    for (std::size_t i = 0; i < copies_; ++i)
        for (std::size_t a = 0; a < n; ++a)
            for (const auto& [b, p] : base_.routing_row(a))
                for (std::size_t j = 0; j < copies_; ++j)
                    out[(i * n + a) * size + (j * n + b)] = p * scale;
    return out;
}

std::size_t MeanFieldNetwork::bond_count() const
{
    std::size_t base_bonds = 0;
    for (std::size_t a = 0; a < base_.color_count(); ++a) base_bonds += base_.routing_row(a).size();
    return base_bonds * copies_ * copies_;
}

std::vector<std::pair<ServerRef, ServerRef>> MeanFieldNetwork::node_edges() const
{
    const std::size_t nv = base_.node_count();
    std::vector<char> edge(nv * nv, 0);
    for (std::size_t a = 0; a < base_.color_count(); ++a)
        for (const auto& [b, p] : base_.routing_row(a))
            if (p > 0.0) edge[base_.ref(a).node * nv + base_.ref(b).node] = 1;

    std::vector<std::pair<ServerRef, ServerRef>> out;
    for (std::size_t v1 = 0; v1 < nv; ++v1)
        for (std::size_t v2 = 0; v2 < nv; ++v2) {
            if (!edge[v1 * nv + v2]) continue;
            for (std::size_t i = 0; i < copies_; ++i)
                for (std::size_t j = 0; j < copies_; ++j) out.push_back({{i, v1}, {j, v2}});
        }
    return out;
}

MeanFieldNetwork mean_field_expand(const ElementaryNetwork& net, long long copies)
{
    if (copies < 1) throw Error(ErrorKind::InvalidM, "M must be >= 1, got " + std::to_string(copies));
    return MeanFieldNetwork(net, static_cast<std::size_t>(copies));
}

ElementaryNetwork build_rshv1()
{
    // flat order: O.O, A.BA, A.A, B.AB, B.B
    std::vector<NodeSpec> nodes{{"O", {"O"}}, {"A", {"BA", "A"}}, {"B", {"AB", "B"}}};
    std::vector<double> gamma{3.0, 2.0, 10.0, 2.0, 10.0};
    constexpr std::size_t O = 0, BA = 1, A = 2, AB = 3, B = 4;
    std::vector<double> routing(25, 0.0);
    auto set = [&](std::size_t i, std::size_t j, double p) { routing[i * 5 + j] = p; };
    set(O, A, 0.5);
    set(O, B, 0.5);
    set(A, AB, 1.0);
    set(BA, O, 1.0);
    set(B, BA, 1.0);
    set(AB, O, 1.0);
    return ElementaryNetwork(std::move(nodes), std::move(gamma), std::move(routing));
}

} // namespace mfnet
