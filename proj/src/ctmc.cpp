#include "mfnet/ctmc.hpp"

#include "mfnet/csv.hpp"
#include "mfnet/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mfnet {

long long client_count(long long M, double rho)
{
    if (M < 1) throw Error(ErrorKind::InvalidM, "M must be >= 1, got " + std::to_string(M));
    if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::InvalidArgument, "rho must be finite and >= 0");
    return static_cast<long long>(std::floor(rho * static_cast<double>(M) * (1.0 + 1e-12)));
}

void SimConfig::validate() const
{
    const ValidationReport report = validate_network(network);
    if (!report.ok()) {
        std::string msg = "network fails validation";
        for (const auto& m : report.messages) msg += "; " + m;
        throw Error(ErrorKind::InvalidNetwork, msg);
    }
    if (M < 1) throw Error(ErrorKind::InvalidM, "M must be >= 1, got " + std::to_string(M));
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::InvalidArgument, "rho must be positive");
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw Error(ErrorKind::InvalidArgument, "t_max must be >= 0");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        const double t = sample_times[i];
        if (!(t >= 0.0 && t <= t_max)) throw Error(ErrorKind::InvalidArgument, "sample time outside [0, t_max]");
        if (i > 0 && t < sample_times[i - 1]) throw Error(ErrorKind::InvalidArgument, "sample times not sorted");
    }
}

namespace {

std::vector<ClientPlacement> place_from_measure(const SimConfig& cfg, const ProductMeasure& nu, long long N,
                                                CounterRng& rng)
{
    const ElementaryNetwork& net = cfg.network;
    const StateSpace& s = nu.space();
    if (s.node_count() != net.node_count())
        throw Error(ErrorKind::BadPlacement, "placement measure has the wrong number of nodes");
    for (std::size_t v = 0; v < net.node_count(); ++v) {
        if (s.lattice(v).dim() != net.colors_at(v))
            throw Error(ErrorKind::BadPlacement, "placement measure lattice dimension differs at node '" +
                                                     net.node(v).name + "'");
        const auto m = nu.node(v);
        if (std::any_of(m.begin(), m.end(), [](double x) { return !(x >= 0.0); }))
            throw Error(ErrorKind::BadPlacement, "placement measure has negative mass");
        if (std::abs(nu.node_mass(v) - 1.0) > 1e-8)
            throw Error(ErrorKind::BadPlacement, "placement measure at node '" + net.node(v).name +
                                                     "' is not a probability measure");
    }
    const auto M = static_cast<std::size_t>(cfg.M);
    const double expected = nu.load() * static_cast<double>(M);
    const double slack = static_cast<double>(net.node_count() + 1);
    if (std::abs(expected - static_cast<double>(N)) > slack)
        throw Error(ErrorKind::BadPlacement, "measure carries " + format_double(expected) + " clients on " +
                                                 std::to_string(M) + " copies but N=" + std::to_string(N));

    const std::size_t V = net.node_count();
    std::vector<std::vector<int>> state(M * V); // server copy * V + v -> counts
    for (std::size_t v = 0; v < V; ++v) {
        const Lattice& lat = s.lattice(v);
        const auto m = nu.node(v);
        // Largest-remainder allocation of the M copies to lattice points.
        std::vector<std::size_t> count(lat.size());
        std::vector<std::pair<double, std::size_t>> rem;
        std::size_t used = 0;
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const double q = m[i] * static_cast<double>(M);
            count[i] = static_cast<std::size_t>(std::floor(q));
            used += count[i];
            rem.emplace_back(q - std::floor(q), i);
        }
        std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t k = 0; used < M && k < rem.size(); ++k, ++used) ++count[rem[k].second];
        std::vector<std::size_t> points;
        for (std::size_t i = 0; i < lat.size(); ++i) points.insert(points.end(), count[i], i);
        points.resize(M, 0);
        for (std::size_t i = M; i > 1; --i) std::swap(points[i - 1], points[rng.below(i)]);
        for (std::size_t c = 0; c < M; ++c) {
            const auto p = lat.point(points[c]);
            state[c * V + v].assign(p.begin(), p.end());
        }
    }

    auto total_of = [](const std::vector<int>& x) { return std::accumulate(x.begin(), x.end(), 0); };
    long long total = 0;
    for (const auto& x : state) total += total_of(x);
    while (total > N) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < state.size(); ++k)
            if (total_of(state[k]) > total_of(state[best])) best = k;
        auto& x = state[best];
        for (std::size_t c = x.size(); c-- > 0;)
            if (x[c] > 0) {
                --x[c];
                break;
            }
        --total;
    }
    while (total < N) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < state.size(); ++k)
            if (total_of(state[k]) < total_of(state[best])) best = k;
        ++state[best].back();
        ++total;
    }

    std::vector<ClientPlacement> out;
    for (std::size_t k = 0; k < state.size(); ++k)
        for (std::size_t c = 0; c < state[k].size(); ++c)
            for (int j = 0; j < state[k][c]; ++j) out.push_back({k / V, k % V, c});
    return out;
}

} // namespace

std::vector<ClientPlacement> initial_placement(const SimConfig& cfg, CounterRng& rng)
{
    const long long N = client_count(cfg.M, cfg.rho);
    const auto M = static_cast<std::uint64_t>(cfg.M);
    const ElementaryNetwork& net = cfg.network;
    std::vector<ClientPlacement> out;
    switch (cfg.placement.kind) {
    case Placement::Kind::AllAtOrigin:
        if (cfg.placement.node >= net.node_count())
            throw Error(ErrorKind::BadPlacement, "origin node index " + std::to_string(cfg.placement.node) +
                                                     " out of range");
        for (long long k = 0; k < N; ++k) out.push_back({rng.below(M), cfg.placement.node, 0});
        return out;
    case Placement::Kind::UniformRandom:
        for (long long k = 0; k < N; ++k) {
            const ColorRef r = net.ref(rng.below(net.color_count()));
            out.push_back({rng.below(M), r.node, r.color});
        }
        return out;
    case Placement::Kind::FromMeasure:
        if (!cfg.placement.measure) throw Error(ErrorKind::BadPlacement, "FromMeasure placement without a measure");
        return place_from_measure(cfg, *cfg.placement.measure, N, rng);
    }
    return out;
}

double EmpiricalMeasure::frequency(std::size_t v, const std::vector<int>& x) const
{
    const auto& m = nodes.at(v);
    const auto it = m.find(x);
    return it == m.end() ? 0.0 : it->second;
}

ProductMeasure EmpiricalMeasure::project(std::shared_ptr<const StateSpace> space) const
{
    if (nodes.size() != space->node_count()) throw Error(ErrorKind::IndexMismatch, "node count differs");
    std::vector<double> mass(space->queue_size(), 0.0);
    for (std::size_t v = 0; v < nodes.size(); ++v)
        for (const auto& [x, f] : nodes[v])
            if (const auto i = space->lattice(v).index_of(x)) mass[space->queue_offset(v) + *i] += f;
    return ProductMeasure(std::move(space), std::move(mass));
}

std::vector<double> exp_moment(const EmpiricalMeasure& m, double kappa)
{
    if (!(kappa > 0.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be positive");
    std::vector<double> out;
    for (const auto& node : m.nodes) {
        double s = 0.0;
        for (const auto& [x, f] : node) s += std::exp(kappa * std::accumulate(x.begin(), x.end(), 0)) * f;
        out.push_back(s);
    }
    return out;
}

// ---- Simulator ---------------------------------------------------------------

std::size_t Simulator::VecHash::operator()(const std::vector<int>& v) const noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int x : v) h = (h ^ static_cast<std::uint32_t>(x)) * 0x100000001b3ULL;
    return static_cast<std::size_t>(h);
}

Simulator::Simulator(MeanFieldNetwork net, const std::vector<ClientPlacement>& clients, CounterRng rng)
    : net_(std::move(net)), nodes_(net_.base().node_count()), servers_(net_.copies() * nodes_), rng_(rng)
{
    const ElementaryNetwork& base = net_.base();
    color_base_.resize(servers_ + 1);
    std::size_t off = 0;
    for (std::size_t s = 0; s < servers_; ++s) {
        color_base_[s] = off;
        off += base.colors_at(s % nodes_);
    }
    color_base_[servers_] = off;
    counts_.assign(off, 0);
    fifos_.resize(off);
    totals_.assign(servers_, 0);
    color_totals_.assign(base.color_count(), 0);
    active_pos_.assign(servers_, static_cast<std::size_t>(-1));
    last_change_.assign(servers_, 0.0);
    histograms_.resize(nodes_);

    if (servers_ > kLinearScanLimit) {
        tree_offset_ = 1;
        while (tree_offset_ < servers_) tree_offset_ <<= 1;
        tree_.assign(2 * tree_offset_, 0.0);
    }

    std::uint32_t id = 0;
    for (const auto& c : clients) {
        if (c.copy >= net_.copies() || c.node >= nodes_ || c.color >= base.colors_at(c.node))
            throw Error(ErrorKind::BadPlacement, "client placement out of range");
        add_client(server_index(c.copy, c.node), c.color, id++);
    }
    for (std::size_t s = 0; s < servers_; ++s) update_rate(s);
}

namespace {

Simulator build_simulator(const SimConfig& cfg)
{
    cfg.validate();
    CounterRng rng(cfg.seed);
    const auto clients = initial_placement(cfg, rng);
    return Simulator(mean_field_expand(cfg.network, cfg.M), clients, rng);
}

} // namespace

Simulator::Simulator(const SimConfig& cfg) : Simulator(build_simulator(cfg)) {}

std::span<const int> Simulator::queue(std::size_t copy, std::size_t node) const
{
    const std::size_t s = server_index(copy, node);
    return {counts_.data() + color_base_[s], color_base_[s + 1] - color_base_[s]};
}

const std::deque<std::uint32_t>& Simulator::fifo(std::size_t copy, std::size_t node, std::size_t color) const
{
    return fifos_.at(color_base_[server_index(copy, node)] + color);
}

std::optional<std::size_t> Simulator::in_service(std::size_t copy, std::size_t node) const
{
    const auto q = queue(copy, node);
    for (std::size_t c = 0; c < q.size(); ++c)
        if (q[c] > 0) return c;
    return std::nullopt;
}

double Simulator::server_rate(std::size_t s) const
{
    if (totals_[s] == 0) return 0.0;
    const std::size_t v = s % nodes_;
    for (std::size_t c = color_base_[s]; c < color_base_[s + 1]; ++c)
        if (counts_[c] > 0) return net_.base().gamma(net_.base().flat(v, c - color_base_[s]));
    return 0.0;
}

void Simulator::update_rate(std::size_t s)
{
    if (!tree_.empty()) {
        std::size_t i = tree_offset_ + s;
        tree_[i] = server_rate(s);
        for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
        return;
    }
    const bool busy = totals_[s] > 0;
    const bool listed = active_pos_[s] != static_cast<std::size_t>(-1);
    if (busy && !listed) {
        active_pos_[s] = active_.size();
        active_.push_back(s);
    } else if (!busy && listed) {
        const std::size_t pos = active_pos_[s];
        active_[pos] = active_.back();
        active_pos_[active_[pos]] = pos;
        active_.pop_back();
        active_pos_[s] = static_cast<std::size_t>(-1);
    }
}

double Simulator::total_rate() const
{
    if (!tree_.empty()) return tree_[1];
    double r = 0.0;
    for (std::size_t s : active_) r += server_rate(s);
    return r;
}

void Simulator::add_client(std::size_t s, std::size_t color, std::uint32_t id)
{
    fifos_[color_base_[s] + color].push_back(id);
    ++counts_[color_base_[s] + color];
    ++totals_[s];
    ++color_totals_[net_.base().node_offset(s % nodes_) + color];
    ++clients_;
}

void Simulator::touch(std::size_t s)
{
    if (occupation_on_ && totals_[s] > 0) {
        const double dt = time_ - last_change_[s];
        if (dt > 0.0) {
            key_.assign(counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s]),
                        counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s + 1]));
            Histogram& h = histograms_[s % nodes_];
            if (const auto it = h.find(key_); it != h.end()) it->second += dt;
            else h.emplace(key_, dt);
        }
    }
    last_change_[s] = time_;
}

Simulator::Event Simulator::choose_event()
{
    if (clients_ == 0) throw Error(ErrorKind::EmptyNetwork, "no clients in the network");
    Event e;
    const double R = total_rate();
    e.dt = rng_.exponential(R);

    std::size_t s = 0;
    double u = rng_.uniform() * R;
    if (!tree_.empty()) {
        std::size_t i = 1;
        while (i < tree_offset_) {
            const double left = tree_[2 * i];
            if ((u < left || tree_[2 * i + 1] <= 0.0) && left > 0.0) {
                i = 2 * i;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        s = i - tree_offset_;
    } else {
        s = active_.back();
        for (std::size_t a : active_) {
            const double r = server_rate(a);
            if (u < r) {
                s = a;
                break;
            }
            u -= r;
        }
    }
    e.server = {s / nodes_, s % nodes_};

    const std::size_t k = *in_service(e.server.copy, e.server.node);
    const auto& row = net_.base().routing_row(net_.base().flat(e.server.node, k));
    double w = rng_.uniform();
    e.dest_flat = row.back().first;
    for (const auto& [j, p] : row) {
        if (w < p) {
            e.dest_flat = j;
            break;
        }
        w -= p;
    }
    e.dest_copy = rng_.below(net_.copies());
    return e;
}

EventRecord Simulator::apply(const Event& e)
{
    const ElementaryNetwork& base = net_.base();
    const std::size_t s = server_index(e.server.copy, e.server.node);
    const auto k = in_service(e.server.copy, e.server.node);
    if (!k) throw Error(ErrorKind::InvalidArgument, "event at an empty server");
    time_ += e.dt;

    touch(s);
    auto& q = fifos_[color_base_[s] + *k];
    const std::uint32_t id = q.front();
    q.pop_front();
    --counts_[color_base_[s] + *k];
    --totals_[s];
    --color_totals_[base.flat(e.server.node, *k)];
    --clients_;
    update_rate(s);

    const ColorRef dest = base.ref(e.dest_flat);
    const std::size_t d = server_index(e.dest_copy, dest.node);
    touch(d);
    add_client(d, dest.color, id);
    update_rate(d);

    return {time_, e.server.copy, e.server.node, *k, e.dest_copy, dest.node, dest.color};
}

std::size_t Simulator::run_until(double t, std::vector<EventRecord>* log)
{
    std::size_t n = 0;
    while (clients_ > 0) {
        const Event e = choose_event();
        if (time_ + e.dt > t) break;
        const EventRecord r = apply(e);
        if (log) log->push_back(r);
        ++n;
    }
    time_ = std::max(time_, t);
    return n;
}

EmpiricalMeasure Simulator::empirical() const
{
    EmpiricalMeasure m;
    m.nodes.resize(nodes_);
    const double w = 1.0 / static_cast<double>(net_.copies());
    for (std::size_t s = 0; s < servers_; ++s) {
        std::vector<int> x(counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s]),
                           counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s + 1]));
        m.nodes[s % nodes_][std::move(x)] += w;
    }
    return m;
}

void Simulator::start_occupation()
{
    occupation_on_ = true;
    occupation_start_ = time_;
    std::fill(last_change_.begin(), last_change_.end(), time_);
    for (auto& h : histograms_) h.clear();
}

EmpiricalMeasure Simulator::occupation() const
{
    const double elapsed = time_ - occupation_start_;
    if (!occupation_on_ || !(elapsed > 0.0)) return empirical();
    std::vector<Histogram> h = histograms_;
    for (std::size_t s = 0; s < servers_; ++s) {
        if (totals_[s] == 0) continue;
        const double dt = time_ - last_change_[s];
        if (dt <= 0.0) continue;
        std::vector<int> key(counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s]),
                             counts_.begin() + static_cast<std::ptrdiff_t>(color_base_[s + 1]));
        h[s % nodes_][std::move(key)] += dt;
    }
    EmpiricalMeasure m;
    m.nodes.resize(nodes_);
    const double norm = elapsed * static_cast<double>(net_.copies());
    for (std::size_t v = 0; v < nodes_; ++v) {
        double busy = 0.0;
        for (const auto& [x, t] : h[v]) {
            m.nodes[v][x] = t / norm;
            busy += t / norm;
        }
        m.nodes[v][std::vector<int>(net_.base().colors_at(v), 0)] = std::max(0.0, 1.0 - busy);
    }
    return m;
}

SimResult simulate(const SimConfig& cfg, bool record_events)
{
    Simulator sim(cfg);
    SimResult res;
    for (double t : cfg.sample_times) {
        res.events += sim.run_until(t, record_events ? &res.log : nullptr);
        res.times.push_back(t);
        res.measures.push_back(sim.empirical());
    }
    return res;
}

void write_empirical_csv_rows(std::ostream& out, const ElementaryNetwork& net, double t, const EmpiricalMeasure& m)
{
    for (std::size_t v = 0; v < m.nodes.size(); ++v)
        for (const auto& [x, f] : m.nodes[v])
            if (f != 0.0) out << format_double(t) << ',' << net.node(v).name << ',' << dash_join(x) << ','
                              << format_double(f) << '\n';
}

void write_event_csv_rows(std::ostream& out, const ElementaryNetwork& net, const std::vector<EventRecord>& log)
{
    for (const auto& e : log)
        out << format_double(e.t) << ',' << e.copy << ',' << net.node(e.node).name << ','
            << net.node(e.node).colors[e.color_served] << ',' << e.dest_copy << ',' << net.node(e.dest_node).name
            << ',' << net.node(e.dest_node).colors[e.dest_color] << '\n';
}

// ---- single-server coupling ----------------------------------------------

std::vector<PathPoint> queue_length_path(std::vector<Arrival> schedule, Discipline discipline)
{
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const Arrival& a, const Arrival& b) { return a.time < b.time; });
    struct Present {
        std::size_t order;
        std::size_t color;
        double remaining;
    };
    std::vector<Present> present;
    std::vector<PathPoint> path;
    double now = 0.0;
    std::size_t next = 0;

    auto current = [&]() -> std::size_t {
        std::size_t best = 0;
        for (std::size_t i = 1; i < present.size(); ++i) {
            const auto& a = present[i];
            const auto& b = present[best];
            const bool better = discipline == Discipline::Fifo
                                    ? a.order < b.order
                                    : (a.color < b.color || (a.color == b.color && a.order < b.order));
            if (better) best = i;
        }
        return best;
    };

    while (next < schedule.size() || !present.empty()) {
        const double ta = next < schedule.size() ? schedule[next].time : INFINITY;
        if (!present.empty()) {
            const std::size_t i = current();
            const double td = now + present[i].remaining;
            if (td <= ta) {
                now = td;
                present.erase(present.begin() + static_cast<std::ptrdiff_t>(i));
                path.push_back({now, static_cast<int>(present.size())});
                continue;
            }
            present[i].remaining -= ta - now;
        }
        now = ta;
        present.push_back({next, schedule[next].color, std::max(0.0, schedule[next].work)});
        ++next;
        path.push_back({now, static_cast<int>(present.size())});
    }
    return path;
}

int path_value(const std::vector<PathPoint>& path, double t)
{
    int v = 0;
    for (const auto& p : path) {
        if (p.t > t) break;
        v = p.count;
    }
    return v;
}

bool monotonicity_check(const std::vector<Arrival>& schedule, const Arrival& extra, Discipline discipline)
{
    const auto base = queue_length_path(schedule, discipline);
    std::vector<Arrival> more = schedule;
    more.push_back(extra);
    const auto with_extra = queue_length_path(more, discipline);
    for (const auto* path : {&base, &with_extra})
        for (const auto& p : *path)
            if (path_value(with_extra, p.t) < path_value(base, p.t)) return false;
    return true;
}

} // namespace mfnet
