#pragma once

#include "mfnet/measure.hpp"
#include "mfnet/network.hpp"
#include "mfnet/rng.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mfnet {

/// N = floor(rho M). The product is nudged up by a relative 1e-12 so that
/// values like 0.29 * 100 land on 29 rather than 28.
long long client_count(long long M, double rho);

struct Placement {
    enum class Kind { AllAtOrigin, UniformRandom, FromMeasure };

    Kind kind = Kind::AllAtOrigin;
    std::size_t node = 0;                  // AllAtOrigin
    std::optional<ProductMeasure> measure; // FromMeasure

    static Placement all_at_origin(std::size_t node) { return {Kind::AllAtOrigin, node, std::nullopt}; }
    static Placement uniform_random() { return {Kind::UniformRandom, 0, std::nullopt}; }
    static Placement from_measure(ProductMeasure nu) { return {Kind::FromMeasure, 0, std::move(nu)}; }
};

struct SimConfig {
    explicit SimConfig(ElementaryNetwork net) : network(std::move(net)) {}

    ElementaryNetwork network;
    long long M = 1;
    double rho = 0.0;
    double t_max = 0.0;
    std::vector<double> sample_times;
    std::uint64_t seed = 0;
    Placement placement;

    void validate() const;
};

/// One client's initial server and color. Within a server, the order of the
/// list is the FIFO order.
struct ClientPlacement {
    std::size_t copy = 0;
    std::size_t node = 0;
    std::size_t color = 0;
};

/// Initial positions for cfg, drawn from rng. Throws BadPlacement.
std::vector<ClientPlacement> initial_placement(const SimConfig& cfg, CounterRng& rng);

/// Per node: frequency of each queue vector among the node's M copies.
struct EmpiricalMeasure {
    std::vector<std::map<std::vector<int>, double>> nodes;

    double frequency(std::size_t v, const std::vector<int>& x) const;
    /// Frequencies projected on a truncated lattice; mass beyond it is dropped.
    ProductMeasure project(std::shared_ptr<const StateSpace> space) const;
};

/// sum_x exp(kappa |x|) m_v(x), per node.
std::vector<double> exp_moment(const EmpiricalMeasure& m, double kappa);

struct EventRecord {
    double t = 0.0;
    std::size_t copy = 0;
    std::size_t node = 0;
    std::size_t color_served = 0; // rank at `node`
    std::size_t dest_copy = 0;
    std::size_t dest_node = 0;
    std::size_t dest_color = 0;   // rank at `dest_node`
};

/// Gillespie simulation of the closed network on M copies.
class Simulator {
public:
    /// A drawn but not yet applied transition.
    struct Event {
        double dt = 0.0;
        ServerRef server;
        std::size_t dest_flat = 0;
        std::size_t dest_copy = 0;
    };

    /// Servers above this count use the rate tree instead of a linear scan.
    static constexpr std::size_t kLinearScanLimit = 10000;

    Simulator(MeanFieldNetwork net, const std::vector<ClientPlacement>& clients, CounterRng rng);
    /// init_state: validates cfg and places floor(rho M) clients.
    explicit Simulator(const SimConfig& cfg);

    const MeanFieldNetwork& network() const noexcept { return net_; }
    double time() const noexcept { return time_; }
    std::size_t client_count() const noexcept { return clients_; }
    const CounterRng& rng() const noexcept { return rng_; }
    bool uses_rate_tree() const noexcept { return !tree_.empty(); }

    std::span<const int> queue(std::size_t copy, std::size_t node) const;
    int server_total(std::size_t copy, std::size_t node) const { return totals_[server_index(copy, node)]; }
    const std::deque<std::uint32_t>& fifo(std::size_t copy, std::size_t node, std::size_t color) const;
    /// Color rank in service, or nullopt for an empty server.
    std::optional<std::size_t> in_service(std::size_t copy, std::size_t node) const;
    /// Clients per flat color over all copies.
    const std::vector<long long>& color_totals() const noexcept { return color_totals_; }
    /// Sum over nonempty servers of the service rate of the color in service.
    double total_rate() const;

    /// Draws, in order: holding time, server, routing target, target copy.
    /// Throws EmptyNetwork when no client is present.
    Event choose_event();
    EventRecord apply(const Event& e);
    EventRecord step() { return apply(choose_event()); }

    /// Runs until time t. The event that would cross t is discarded and the
    /// clock set to t, which is exact for exponential holding times.
    /// Returns the number of events applied.
    std::size_t run_until(double t, std::vector<EventRecord>* log = nullptr);

    /// Snapshot frequencies over the M copies of each node.
    EmpiricalMeasure empirical() const;

    /// Starts time-averaging of server states from the current time.
    void start_occupation();
    /// Time average of the empirical measure since start_occupation.
    EmpiricalMeasure occupation() const;

private:
    struct VecHash {
        std::size_t operator()(const std::vector<int>& v) const noexcept;
    };
    using Histogram = std::unordered_map<std::vector<int>, double, VecHash>;

    std::size_t server_index(std::size_t copy, std::size_t node) const { return copy * nodes_ + node; }
    double server_rate(std::size_t s) const;
    void touch(std::size_t s);  // occupation bookkeeping before a change
    void update_rate(std::size_t s);
    void add_client(std::size_t s, std::size_t color, std::uint32_t id);

    MeanFieldNetwork net_;
    std::size_t nodes_;
    std::size_t servers_;
    CounterRng rng_;
    double time_ = 0.0;
    std::size_t clients_ = 0;

    std::vector<std::size_t> color_base_;           // per server: offset into counts_/fifos_
    std::vector<int> counts_;                        // per server, per color
    std::vector<int> totals_;
    std::vector<std::deque<std::uint32_t>> fifos_;
    std::vector<long long> color_totals_;

    // linear scan
    std::vector<std::size_t> active_;
    std::vector<std::size_t> active_pos_;
    // rate tree (leaves at tree_offset_)
    std::vector<double> tree_;
    std::size_t tree_offset_ = 0;

    bool occupation_on_ = false;
    double occupation_start_ = 0.0;
    std::vector<double> last_change_;
    std::vector<Histogram> histograms_;
    std::vector<int> key_;
};

/// Snapshots of the pooled empirical measure at cfg.sample_times.
struct SimResult {
    std::vector<double> times;
    std::vector<EmpiricalMeasure> measures;
    std::size_t events = 0;
    std::vector<EventRecord> log; // filled when requested
};

SimResult simulate(const SimConfig& cfg, bool record_events = false);

/// CSV rows "t,node,queue_vector,frequency".
void write_empirical_csv_rows(std::ostream& out, const ElementaryNetwork& net, double t, const EmpiricalMeasure& m);
void write_event_csv_rows(std::ostream& out, const ElementaryNetwork& net, const std::vector<EventRecord>& log);

// ---- single-server coupling ----------------------------------------------

enum class Discipline { Fifo, PreemptivePriority };

/// An arrival to a single server carrying its own service requirement
/// (served at unit speed). Color rank 0 has the highest priority.
struct Arrival {
    double time = 0.0;
    std::size_t color = 0;
    double work = 0.0;
};

struct PathPoint {
    double t;
    int count; // queue length from t onward
};

/// Right-continuous queue-length path, one point per arrival or departure.
std::vector<PathPoint> queue_length_path(std::vector<Arrival> schedule, Discipline discipline);

/// Queue length at time t (right limit).
int path_value(const std::vector<PathPoint>& path, double t);

/// True iff adding `extra` to the schedule never lowers the queue length, at
/// every event time of either run.
bool monotonicity_check(const std::vector<Arrival>& schedule, const Arrival& extra, Discipline discipline);

} // namespace mfnet
