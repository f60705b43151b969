#include "mfnet/network_io.hpp"

#include "mfnet/error.hpp"

#include <fstream>

namespace mfnet {

using nlohmann::json;

ElementaryNetwork network_from_json(const json& doc)
{
    try {
        if (!doc.is_object()) throw Error(ErrorKind::ParseError, "network description must be a JSON object");
        for (const char* key : {"nodes", "gamma", "routing"})
            if (!doc.contains(key)) throw Error(ErrorKind::ParseError, std::string("missing key '") + key + "'");

        std::vector<NodeSpec> nodes;
        for (const auto& n : doc.at("nodes")) {
            NodeSpec spec;
            spec.name = n.at("name").get<std::string>();
            spec.colors = n.at("colors").get<std::vector<std::string>>();
            nodes.push_back(std::move(spec));
        }
        std::size_t total = 0;
        for (const auto& n : nodes) total += n.colors.size();

        // Placeholder network to resolve "node.color" names.
        const ElementaryNetwork names(nodes, std::vector<double>(total, 1.0), std::vector<double>(total * total, 0.0));

        std::vector<double> gamma(total, 0.0);
        std::vector<char> seen(total, 0);
        for (const auto& [key, value] : doc.at("gamma").items()) {
            const std::size_t i = names.flat(key);
            gamma[i] = value.get<double>();
            seen[i] = 1;
        }
        for (std::size_t i = 0; i < total; ++i)
            if (!seen[i]) throw Error(ErrorKind::ParseError, "gamma missing for '" + names.qualified_name(i) + "'");

        std::vector<double> routing(total * total, 0.0);
        for (const auto& [from, row] : doc.at("routing").items()) {
            const std::size_t i = names.flat(from);
            for (const auto& [to, p] : row.items()) routing[i * total + names.flat(to)] = p.get<double>();
        }
        return ElementaryNetwork(std::move(nodes), std::move(gamma), std::move(routing));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed network description: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidArgument) throw Error(ErrorKind::ParseError, e.detail());
        throw;
    }
}

json network_to_json(const ElementaryNetwork& net)
{
    json doc;
    doc["nodes"] = json::array();
    for (const auto& n : net.nodes()) doc["nodes"].push_back({{"name", n.name}, {"colors", n.colors}});
    doc["gamma"] = json::object();
    doc["routing"] = json::object();
    for (std::size_t i = 0; i < net.color_count(); ++i) {
        const std::string name = net.qualified_name(i);
        doc["gamma"][name] = net.gamma(i);
        json row = json::object();
        for (const auto& [j, p] : net.routing_row(i)) row[net.qualified_name(j)] = p;
        doc["routing"][name] = row;
    }
    return doc;
}

ElementaryNetwork load_network(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open network file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    try {
        return network_from_json(doc);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.detail());
    }
}

} // namespace mfnet
