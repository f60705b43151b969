#include "mfnet/cli.hpp"

#include "mfnet/analysis.hpp"
#include "mfnet/campaign.hpp"
#include "mfnet/csv.hpp"
#include "mfnet/ctmc.hpp"
#include "mfnet/error.hpp"
#include "mfnet/fixpoint.hpp"
#include "mfnet/log.hpp"
#include "mfnet/network_io.hpp"
#include "mfnet/nlmp.hpp"
#include "mfnet/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

namespace mfnet {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what)
{
    throw Error(ErrorKind::ParseError, "config " + (path.empty() ? std::string("/") : path) + ": " + what);
}

void only_keys(const json& o, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!o.is_object()) bad(path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : o.items())
        if (!allowed.count(k)) bad(path + "/" + k, "unknown key");
}

double number(const json& o, const std::string& path, const char* key, std::optional<double> def)
{
    const std::string p = path + "/" + key;
    if (!o.contains(key)) {
        if (!def) bad(p, "required");
        return *def;
    }
    const json& v = o.at(key);
    if (!v.is_number()) bad(p, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) bad(p, "must be finite");
    return x;
}

double positive(const json& o, const std::string& path, const char* key, std::optional<double> def)
{
    const double x = number(o, path, key, def);
    if (!(x > 0.0)) bad(path + "/" + key, "must be positive");
    return x;
}

double nonnegative(const json& o, const std::string& path, const char* key, std::optional<double> def)
{
    const double x = number(o, path, key, def);
    if (!(x >= 0.0)) bad(path + "/" + key, "must be nonnegative");
    return x;
}

long long positive_int_value(const json& v, const std::string& p)
{
    if (!v.is_number_integer() && !(v.is_number_float() && v.get<double>() == std::floor(v.get<double>())))
        bad(p, "expected an integer");
    const double x = v.get<double>();
    if (!(x >= 1.0) || x > 9e15) bad(p, "must be a positive integer");
    return static_cast<long long>(x);
}

long long positive_int(const json& o, const std::string& path, const char* key, std::optional<long long> def)
{
    const std::string p = path + "/" + key;
    if (!o.contains(key)) {
        if (!def) bad(p, "required");
        return *def;
    }
    return positive_int_value(o.at(key), p);
}

double nonnegative_value(const json& v, const std::string& p)
{
    if (!v.is_number()) bad(p, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x) || !(x >= 0.0)) bad(p, "must be finite and nonnegative");
    return x;
}

std::optional<std::uint64_t> seed_field(const json& o, const std::string& path)
{
    if (!o.contains("seed")) return std::nullopt;
    const json& v = o.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        bad(path + "/seed", "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::vector<long long> m_list(const json& o, const std::string& path)
{
    const std::string p = path + "/M_list";
    if (!o.contains("M_list")) bad(p, "required");
    const json& v = o.at("M_list");
    if (!v.is_array() || v.empty()) bad(p, "expected a nonempty array");
    std::vector<long long> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(positive_int_value(v[i], p + "/" + std::to_string(i)));
    return out;
}

std::string text(const json& o, const std::string& path, const char* key, const std::string& def)
{
    if (!o.contains(key)) return def;
    if (!o.at(key).is_string()) bad(path + "/" + key, "expected a string");
    return o.at(key).get<std::string>();
}

std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir)
{
    ExperimentConfig cfg;
    cfg.raw = doc;
    only_keys(doc, "", {"network_file", "seed", "simulate", "nlmp", "fixpoint", "contraction", "margin", "compare"});
    if (!doc.contains("network_file") || !doc.at("network_file").is_string()) bad("/network_file", "required string");
    cfg.network_file = doc.at("network_file").get<std::string>();
    if (cfg.network_file.is_relative()) cfg.network_file = base_dir / cfg.network_file;
    cfg.seed = seed_field(doc, "").value_or(0);

    if (doc.contains("simulate")) {
        const json& o = doc.at("simulate");
        const std::string p = "/simulate";
        only_keys(o, p, {"M_list", "rho", "t_max", "sample_dt", "replicas", "placement", "origin", "record_events", "seed"});
        SimulateBlock b;
        b.M_list = m_list(o, p);
        b.rho = positive(o, p, "rho", std::nullopt);
        b.t_max = positive(o, p, "t_max", std::nullopt);
        b.sample_dt = nonnegative(o, p, "sample_dt", 0.0);
        b.replicas = static_cast<int>(positive_int(o, p, "replicas", 1));
        b.placement = text(o, p, "placement", "origin");
        if (b.placement != "uniform" && b.placement != "origin") bad(p + "/placement", "expected 'uniform' or 'origin'");
        b.origin = text(o, p, "origin", "");
        if (o.contains("record_events")) {
            if (!o.at("record_events").is_boolean()) bad(p + "/record_events", "expected a boolean");
            b.record_events = o.at("record_events").get<bool>();
        }
        b.seed = seed_field(o, p);
        cfg.simulate = b;
    }
    if (doc.contains("nlmp")) {
        const json& o = doc.at("nlmp");
        const std::string p = "/nlmp";
        only_keys(o, p, {"L", "dt", "T", "rho", "sample_every", "overflow", "initial"});
        NlmpBlock b;
        b.L = static_cast<int>(positive_int(o, p, "L", 20));
        b.dt = nonnegative(o, p, "dt", 0.0);
        b.T = positive(o, p, "T", 10.0);
        b.rho = positive(o, p, "rho", 0.05);
        b.sample_every = nonnegative(o, p, "sample_every", 0.0);
        b.overflow = text(o, p, "overflow", "track");
        if (b.overflow != "track" && b.overflow != "reflect") bad(p + "/overflow", "expected 'track' or 'reflect'");
        b.initial = o.value("initial", json{{"kind", "color"}});
        only_keys(b.initial, p + "/initial", {"kind", "color", "path"});
        const std::string kind = text(b.initial, p + "/initial", "kind", "color");
        if (kind != "color" && kind != "chi" && kind != "file")
            bad(p + "/initial/kind", "expected 'color', 'chi' or 'file'");
        if (kind == "file") {
            if (!b.initial.contains("path") || !b.initial.at("path").is_string()) bad(p + "/initial/path", "required string");
            fs::path f = b.initial.at("path").get<std::string>();
            if (f.is_relative()) f = base_dir / f;
            b.initial["path"] = f.string();
        }
        cfg.nlmp = b;
    }
    if (doc.contains("fixpoint")) {
        const json& o = doc.at("fixpoint");
        only_keys(o, "/fixpoint", {"rho", "L"});
        cfg.fixpoint = FixpointBlock{positive(o, "/fixpoint", "rho", std::nullopt),
                                     static_cast<int>(positive_int(o, "/fixpoint", "L", 40))};
    }
    if (doc.contains("contraction")) {
        const json& o = doc.at("contraction");
        const std::string p = "/contraction";
        only_keys(o, p, {"K", "pairs", "L", "seed"});
        ContractionBlock b;
        b.K = number(o, p, "K", 10.0);
        if (!(b.K >= std::exp(1.0))) bad(p + "/K", "must be at least e");
        b.pairs = static_cast<int>(positive_int(o, p, "pairs", 20));
        b.L = static_cast<int>(positive_int(o, p, "L", 20));
        b.seed = seed_field(o, p);
        cfg.contraction = b;
    }
    if (doc.contains("margin")) {
        const json& o = doc.at("margin");
        const std::string p = "/margin";
        only_keys(o, p, {"rho", "K", "L", "contraction_pairs", "lipschitz_pairs", "rho_grid", "seed"});
        MarginBlock b;
        b.rho = nonnegative(o, p, "rho", 0.01);
        b.K = number(o, p, "K", 10.0);
        if (!(b.K >= std::exp(1.0))) bad(p + "/K", "must be at least e");
        b.L = static_cast<int>(positive_int(o, p, "L", 16));
        b.contraction_pairs = static_cast<int>(positive_int(o, p, "contraction_pairs", 20));
        b.lipschitz_pairs = static_cast<int>(positive_int(o, p, "lipschitz_pairs", 100));
        if (o.contains("rho_grid")) {
            const json& g = o.at("rho_grid");
            if (!g.is_array()) bad(p + "/rho_grid", "expected an array");
            for (std::size_t i = 0; i < g.size(); ++i)
                b.rho_grid.push_back(nonnegative_value(g[i], p + "/rho_grid/" + std::to_string(i)));
        }
        b.seed = seed_field(o, p);
        cfg.margin = b;
    }
    if (doc.contains("compare")) {
        const json& o = doc.at("compare");
        const std::string p = "/compare";
        only_keys(o, p, {"M_list", "rho", "burn_in", "t_max", "replicas", "relax_t_max", "relax_dt", "client_samples",
                         "seed"});
        CompareBlock b;
        b.M_list = m_list(o, p);
        b.rho = positive(o, p, "rho", std::nullopt);
        b.burn_in = nonnegative(o, p, "burn_in", 50.0);
        b.t_max = positive(o, p, "t_max", 2e4);
        if (!(b.t_max > b.burn_in)) bad(p + "/t_max", "must exceed burn_in");
        b.replicas = static_cast<int>(positive_int(o, p, "replicas", 8));
        b.relax_t_max = positive(o, p, "relax_t_max", 8.0);
        b.relax_dt = positive(o, p, "relax_dt", 0.05);
        if (!(b.relax_t_max > b.relax_dt)) bad(p + "/relax_t_max", "must exceed relax_dt");
        b.client_samples = positive_int(o, p, "client_samples", 100000);
        b.seed = seed_field(o, p);
        cfg.compare = b;
    }
    return cfg;
}

ExperimentConfig load_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    try {
        return parse_config(doc, path.parent_path());
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.detail());
    }
}

std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const ExperimentConfig& cfg, const ElementaryNetwork& net)
{
    return fnv1a(cfg.raw.dump() + "\n" + network_to_json(net).dump());
}

namespace {

struct Context {
    std::string command;
    const ExperimentConfig& cfg;
    const ElementaryNetwork& net;
    fs::path out_dir;
    int jobs = 1;
    std::uint64_t hash = 0;
    std::optional<std::uint64_t> seed_override;
    std::ostream* out = nullptr;

    std::uint64_t seed(const std::optional<std::uint64_t>& block) const
    {
        return seed_override.value_or(block.value_or(cfg.seed));
    }
    std::string header(std::uint64_t seed) const
    {
        return "# mfnet " + command + " config_hash=" + hex64(hash) + " seed=" + std::to_string(seed) + "\n";
    }
    std::ofstream open(const std::string& name) const
    {
        std::ofstream f(out_dir / name, std::ios::binary);
        if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write '" + (out_dir / name).string() + "'");
        f.precision(17);
        return f;
    }
    json stamp(std::uint64_t seed) const
    {
        return json{{"command", command}, {"config_hash", hex64(hash)}, {"seed", seed}};
    }
    void wrote(const std::string& name) const { *out << (out_dir / name).string() << '\n'; }
};

template <class Block>
const Block& need(const std::optional<Block>& b, const char* name)
{
    if (!b) throw Error(ErrorKind::ParseError, std::string("config has no '") + name + "' block");
    return *b;
}

std::string fmt(double v) { return std::isfinite(v) ? format_double(v) : (std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }

json num(double v) { return std::isfinite(v) ? json(v) : json(fmt(v)); }

void cmd_simulate(const Context& ctx)
{
    const SimulateBlock& b = need(ctx.cfg.simulate, "simulate");
    const std::uint64_t seed = ctx.seed(b.seed);
    std::size_t origin = 0;
    if (!b.origin.empty()) {
        bool found = false;
        for (std::size_t v = 0; v < ctx.net.node_count(); ++v)
            if (ctx.net.node(v).name == b.origin) {
                origin = v;
                found = true;
            }
        if (!found) throw Error(ErrorKind::ParseError, "config /simulate/origin: no node named '" + b.origin + "'");
    }
    const double dt = b.sample_dt > 0.0 ? b.sample_dt : b.t_max / 10.0;
    std::vector<double> times;
    for (std::size_t k = 0;; ++k) {
        const double t = std::min(static_cast<double>(k) * dt, b.t_max);
        times.push_back(t);
        if (t >= b.t_max) break;
    }

    struct Job {
        long long M;
        int r;
    };
    std::vector<Job> jobs;
    for (long long M : b.M_list)
        for (int r = 0; r < b.replicas; ++r) jobs.push_back({M, r});
    std::vector<SimResult> results(jobs.size());
    std::vector<long long> clients(jobs.size());
    parallel_for(jobs.size(), ctx.jobs, [&](std::size_t i) {
        SimConfig sc{ctx.net};
        sc.M = jobs[i].M;
        sc.rho = b.rho;
        sc.t_max = b.t_max;
        sc.sample_times = times;
        sc.seed = derive_seed(seed, {static_cast<std::uint64_t>(jobs[i].M), static_cast<std::uint64_t>(jobs[i].r)});
        sc.placement = b.placement == "origin" ? Placement::all_at_origin(origin) : Placement::uniform_random();
        results[i] = simulate(sc, b.record_events);
        clients[i] = client_count(sc.M, sc.rho);
    });

    auto summary = ctx.open("simulate_summary.csv");
    summary << ctx.header(seed) << "M,replica,N,events\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const std::string name = "simulate_M" + std::to_string(jobs[i].M) + "_r" + std::to_string(jobs[i].r) + ".csv";
        auto f = ctx.open(name);
        f << ctx.header(seed) << "t,node,queue_vector,frequency\n";
        for (std::size_t k = 0; k < results[i].times.size(); ++k)
            write_empirical_csv_rows(f, ctx.net, results[i].times[k], results[i].measures[k]);
        ctx.wrote(name);
        if (b.record_events) {
            const std::string ev = "events_M" + std::to_string(jobs[i].M) + "_r" + std::to_string(jobs[i].r) + ".csv";
            auto e = ctx.open(ev);
            e << ctx.header(seed) << "t,copy,node,color,dest_copy,dest_node,dest_color\n";
            write_event_csv_rows(e, ctx.net, results[i].log);
            ctx.wrote(ev);
        }
        summary << jobs[i].M << ',' << jobs[i].r << ',' << clients[i] << ',' << results[i].events << '\n';
    }
    ctx.wrote("simulate_summary.csv");
}

ProductMeasure nlmp_initial(const NlmpBlock& b, const std::shared_ptr<const StateSpace>& space)
{
    const ElementaryNetwork& net = space->network();
    const std::string kind = b.initial.value("kind", std::string("color"));
    if (kind == "chi") return chi_rho(space, b.rho);
    if (kind == "file") {
        const std::string path = b.initial.at("path").get<std::string>();
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::ParseError, "cannot open initial measure file '" + path + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::ParseError, path + ": " + e.what());
        }
        return measure_from_json(doc, space);
    }
    const std::string color = b.initial.value("color", net.qualified_name(0));
    std::size_t f = 0;
    try {
        f = net.flat(color);
    } catch (const Error&) {
        throw Error(ErrorKind::ParseError, "config /nlmp/initial/color: unknown color '" + color + "'");
    }
    if (!(b.rho <= 1.0)) throw Error(ErrorKind::ParseError, "config /nlmp/rho: a one-color start needs rho <= 1");
    const ColorRef ref = net.ref(f);
    ProductMeasure nu(space);
    auto node = nu.node(ref.node);
    const Lattice& lat = space->lattice(ref.node);
    node[0] = 1.0 - b.rho;
    node[lat.unit(ref.color)] = b.rho;
    return nu;
}

void cmd_nlmp(const Context& ctx)
{
    const NlmpBlock& b = need(ctx.cfg.nlmp, "nlmp");
    const std::uint64_t seed = ctx.seed(std::nullopt);
    const auto space = StateSpace::make(ctx.net, b.L);
    const ProductMeasure nu0 = nlmp_initial(b, space);
    TruncationPolicy policy;
    policy.L = b.L;
    policy.overflow_mode = b.overflow == "reflect" ? OverflowMode::Reflect : OverflowMode::Track;
    policy.validate();
    const double dt = b.dt > 0.0 ? b.dt : default_dt(*space);
    const NlmpTrajectory q = integrate(nu0, b.T, dt, policy, b.sample_every);
    const double rho = nu0.load();
    const DerivedTrajectory d = integrate_derived(to_derived(nu0), rho, b.T, dt, b.sample_every);
    if (d.times.size() != q.samples.size())
        throw Error(ErrorKind::IndexMismatch, "queue and derived sample grids differ");

    auto fq = ctx.open("nlmp_queue.csv");
    fq << ctx.header(seed) << "t,node,x,mass\n";
    auto fd = ctx.open("nlmp_derived.csv");
    fd << ctx.header(seed) << "t,node,x,mass\n";
    auto fr = ctx.open("nlmp_residual.csv");
    fr << ctx.header(seed) << "t,load,commutation_residual\n";
    double worst = 0.0;
    for (std::size_t k = 0; k < q.samples.size(); ++k) {
        const auto& s = q.samples[k];
        write_measure_csv_rows(fq, s.t, s.nu);
        write_derived_csv_rows(fd, d.times[k], d.states[k]);
        const DerivedVector via = to_derived(s.nu);
        double r = 0.0;
        for (std::size_t i = 0; i < via.size(); ++i) r = std::max(r, std::abs(via[i] - d.states[k][i]));
        worst = std::max(worst, r);
        fr << fmt(s.t) << ',' << fmt(s.load) << ',' << fmt(r) << '\n';
    }
    json summary = ctx.stamp(seed);
    summary["L"] = b.L;
    summary["dt"] = dt;
    summary["T"] = b.T;
    summary["rho"] = rho;
    summary["max_step_defect"] = q.max_step_defect;
    summary["total_defect"] = q.total_defect;
    summary["boundary_loss"] = q.boundary_loss;
    summary["most_negative"] = q.most_negative;
    summary["max_commutation_residual"] = worst;
    summary["final_load"] = q.samples.back().load;
    auto fs = ctx.open("nlmp_summary.json");
    fs << summary.dump(2) << '\n';
    for (const char* n : {"nlmp_queue.csv", "nlmp_derived.csv", "nlmp_residual.csv", "nlmp_summary.json"}) ctx.wrote(n);
}

void cmd_fixpoint(const Context& ctx)
{
    const FixpointBlock& b = need(ctx.cfg.fixpoint, "fixpoint");
    const std::uint64_t seed = ctx.seed(std::nullopt);
    const LoadCalibration cal = calibrate_load(ctx.net, b.rho);
    const auto space = StateSpace::make(ctx.net, b.L);
    const ProductMeasure chi = chi_rho(space, b.rho);

    json doc = ctx.stamp(seed);
    doc["rho"] = b.rho;
    doc["L"] = b.L;
    doc["alpha"] = cal.alpha;
    doc["alpha_max"] = cal.alpha_max;
    doc["expected_customers"] = cal.expected;
    json rates = json::object(), direction = json::object();
    for (std::size_t f = 0; f < ctx.net.color_count(); ++f) {
        rates[ctx.net.qualified_name(f)] = cal.rates[f];
        direction[ctx.net.qualified_name(f)] = cal.direction[f];
    }
    doc["rates"] = rates;
    doc["flow_balance"] = direction;
    json nodes = json::array();
    for (std::size_t v = 0; v < ctx.net.node_count(); ++v) {
        const NodeDistribution nd = node_stationary(ctx.net, v, cal.rates, b.L);
        nodes.push_back({{"name", ctx.net.node(v).name},
                         {"utilization", node_utilization(ctx.net, v, cal.rates)},
                         {"mean_customers", nd.mean_total()},
                         {"tail", nd.tail},
                         {"residual", nd.residual}});
    }
    doc["nodes"] = nodes;
    doc["distribution"] = measure_to_json(chi);
    auto fj = ctx.open("fixpoint.json");
    fj << doc.dump(2) << '\n';
    auto fc = ctx.open("fixpoint_marginals.csv");
    fc << ctx.header(seed) << "t,node,x,mass\n";
    write_measure_csv_rows(fc, 0.0, chi);
    ctx.wrote("fixpoint.json");
    ctx.wrote("fixpoint_marginals.csv");
}

void cmd_contraction(const Context& ctx)
{
    const ContractionBlock& b = need(ctx.cfg.contraction, "contraction");
    const std::uint64_t seed = ctx.seed(b.seed);
    ContractionOptions opt;
    opt.L = b.L;
    const ContractionReport rep = contraction_time(ctx.net, b.K, b.pairs, seed, opt);
    auto f = ctx.open("contraction.csv");
    f << ctx.header(seed) << "pair_id,t_half,beta_fit\n";
    for (std::size_t i = 0; i < rep.pairs.size(); ++i)
        f << i << ',' << fmt(rep.pairs[i].t_half) << ',' << fmt(rep.pairs[i].beta_fit) << '\n';
    json doc = ctx.stamp(seed);
    doc["K"] = b.K;
    doc["L"] = b.L;
    doc["T_half"] = num(rep.T_half);
    doc["T_half_min"] = num(rep.T_half_min);
    doc["beta_est"] = rep.beta_est;
    doc["beta_mean"] = rep.beta_mean;
    doc["r2_min"] = rep.r2_min;
    doc["pairs_tested"] = rep.pairs_tested;
    auto j = ctx.open("contraction.json");
    j << doc.dump(2) << '\n';
    ctx.wrote("contraction.csv");
    ctx.wrote("contraction.json");
}

void cmd_margin(const Context& ctx)
{
    const MarginBlock& b = need(ctx.cfg.margin, "margin");
    const std::uint64_t seed = ctx.seed(b.seed);
    MarginOptions opt;
    opt.L = b.L;
    opt.contraction_pairs = b.contraction_pairs;
    opt.lipschitz_pairs = b.lipschitz_pairs;
    if (!b.rho_grid.empty()) opt.rho_grid = b.rho_grid;
    const MarginReport rep = gronwall_margin(ctx.net, b.rho, b.K, seed, opt);
    auto f = ctx.open("margin.csv");
    f << ctx.header(seed) << "rho,margin\n";
    for (const auto& p : rep.scan) f << fmt(p.rho) << ',' << fmt(p.margin) << '\n';
    json doc = ctx.stamp(seed);
    doc["rho"] = b.rho;
    doc["beta_est"] = rep.beta_est;
    doc["lipschitz_C1"] = rep.lipschitz_C1;
    doc["load_bound"] = num(rep.load_bound);
    doc["margin"] = num(rep.margin);
    doc["rho_star"] = rep.rho_star;
    json scan = json::array();
    for (const auto& p : rep.scan)
        scan.push_back({{"rho", p.rho}, {"load_bound", num(p.load_bound)}, {"chi_norm", num(p.chi_norm)},
                        {"margin", num(p.margin)}});
    doc["scan"] = scan;
    auto j = ctx.open("margin.json");
    j << doc.dump(2) << '\n';
    ctx.wrote("margin.csv");
    ctx.wrote("margin.json");
}

void cmd_compare(const Context& ctx)
{
    const CompareBlock& b = need(ctx.cfg.compare, "compare");
    const std::uint64_t seed = ctx.seed(b.seed);
    const ProductMeasure chi = chi_rho(ctx.net, b.rho, 40);

    auto f = ctx.open("compare.csv");
    f << ctx.header(seed) << "M,tv_to_chi,tau_est,tau_ci_lo,tau_ci_hi\n";
    auto fc = ctx.open("compare_curves.csv");
    fc << ctx.header(seed) << "M,t,distance,noise_std\n";
    json rows = json::array();
    for (long long M : b.M_list) {
        StationaryOptions so;
        so.burn_in = b.burn_in;
        so.t_max = b.t_max;
        so.replicas = b.replicas;
        so.jobs = ctx.jobs;
        const StationaryComparison st = stationary_tv(ctx.net, M, b.rho, chi, derive_seed(seed, {1}), so);
        RelaxationOptions ro;
        ro.t_max = b.relax_t_max;
        ro.sample_dt = b.relax_dt;
        ro.client_samples = b.client_samples;
        ro.jobs = ctx.jobs;
        const RelaxationCurve rc = relaxation_curve(ctx.net, M, b.rho, chi, derive_seed(seed, {2}), ro);
        if (!rc.fitted) log::warn("M=" + std::to_string(M) + ": relaxation curve never rises above the noise floor");
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double tau = rc.fitted ? rc.fit.tau : nan;
        const double lo = rc.fitted ? rc.fit.ci_lo : nan;
        const double hi = rc.fitted ? rc.fit.ci_hi : nan;
        f << M << ',' << fmt(st.tv) << ',' << fmt(tau) << ',' << fmt(lo) << ',' << fmt(hi) << '\n';
        for (std::size_t k = 0; k < rc.t.size(); ++k)
            fc << M << ',' << fmt(rc.t[k]) << ',' << fmt(rc.distance[k]) << ',' << fmt(rc.noise_std) << '\n';
        rows.push_back({{"M", M}, {"N", st.N}, {"tv_to_chi", st.tv}, {"tv_se", st.tv_se}, {"events", st.events},
                        {"tau_est", num(tau)}, {"tau_ci_lo", num(lo)}, {"tau_ci_hi", num(hi)},
                        {"relaxation_replicas", rc.replicas}, {"fit_window", {num(rc.fit.t_begin), num(rc.fit.t_end)}}});
        log::info("compare M=" + std::to_string(M) + " tv=" + fmt(st.tv) + " tau=" + fmt(tau));
    }
    json doc = ctx.stamp(seed);
    doc["rho"] = b.rho;
    doc["rows"] = rows;
    auto j = ctx.open("compare.json");
    j << doc.dump(2) << '\n';
    for (const char* n : {"compare.csv", "compare_curves.csv", "compare.json"}) ctx.wrote(n);
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Closed mean-field queueing networks: simulation, limit dynamics and fixed point"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::string out_dir = ".";
    int jobs = 1;
    std::optional<std::uint64_t> seed;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "finite-M Gillespie trajectories"},
        {"nlmp", "limit dynamics in queue and derived coordinates"},
        {"fixpoint", "calibrated Poisson fixed point"},
        {"contraction", "contraction time of the linear flow"},
        {"margin", "Gronwall margin scan over the load"},
        {"compare", "finite-M distance to the fixed point and relaxation rates"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "override the config seed");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const ExperimentConfig cfg = load_config(config_path);
        const ElementaryNetwork net = load_network(cfg.network_file);
        const ValidationReport report = validate_network(net);
        if (!report.ok()) {
            std::string msg = cfg.network_file.string() + ":";
            for (const auto& m : report.messages) msg += " " + m + ";";
            throw Error(ErrorKind::InvalidNetwork, msg);
        }
        for (const auto& m : report.messages) log::warn(m);
        Context ctx{command, cfg, net, out_dir, jobs, config_hash(cfg, net), seed, &out};
        std::error_code ec;
        fs::create_directories(ctx.out_dir, ec);
        if (ec) throw Error(ErrorKind::InvalidArgument, "cannot create '" + out_dir + "': " + ec.message());

        if (ctx.command == "simulate") cmd_simulate(ctx);
        else if (ctx.command == "nlmp") cmd_nlmp(ctx);
        else if (ctx.command == "fixpoint") cmd_fixpoint(ctx);
        else if (ctx.command == "contraction") cmd_contraction(ctx);
        else if (ctx.command == "margin") cmd_margin(ctx);
        else cmd_compare(ctx);
    } catch (const Error& e) {
        err << "mfnet " << command << ": " << e.what() << '\n';
        return is_validation_error(e.kind()) ? 1 : 2;
    } catch (const std::exception& e) {
        err << "mfnet " << command << ": " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace mfnet
