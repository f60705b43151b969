#include "mfnet/rshv1_equations.hpp"

#include "mfnet/error.hpp"

#include <array>

namespace mfnet::rshv1 {

namespace {

struct Layout {
    std::size_t O, A, B; // node indices
    double gO, gBA, gA, gAB, gB;
};

Layout layout_of(const StateSpace& s)
{
    const ElementaryNetwork& net = s.network();
    Layout l{};
    try {
        l.O = net.node_index("O");
        l.A = net.node_index("A");
        l.B = net.node_index("B");
        if (net.flat("A.BA") != net.flat(l.A, 0) || net.flat("B.AB") != net.flat(l.B, 0) ||
            net.flat("A.A") != net.flat(l.A, 1) || net.flat("B.B") != net.flat(l.B, 1) || net.colors_at(l.O) != 1)
            throw Error(ErrorKind::InvalidNetwork, "priority layout differs from the RShV1 network");
        l.gO = net.gamma(net.flat("O.O"));
        l.gBA = net.gamma(net.flat("A.BA"));
        l.gA = net.gamma(net.flat("A.A"));
        l.gAB = net.gamma(net.flat("B.AB"));
        l.gB = net.gamma(net.flat("B.B"));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidNetwork) throw;
        throw Error(ErrorKind::InvalidNetwork, "not an RShV1 network: " + std::string(e.detail()));
    }
    return l;
}

// Read access by coordinates, zero outside the truncated lattice.
class View {
public:
    View(const StateSpace& s, std::span<const double> data, bool derived) : s_(s), data_(data), derived_(derived) {}

    double at(std::size_t v, std::array<int, 2> x) const
    {
        const Lattice& lat = s_.lattice(v);
        const std::span<const int> pt(x.data(), lat.dim());
        const auto i = lat.index_of(pt);
        if (!i) return 0.0;
        if (derived_) return *i == 0 ? 0.0 : data_[s_.derived_index(v, *i)];
        return data_[s_.queue_offset(v) + *i];
    }

private:
    const StateSpace& s_;
    std::span<const double> data_;
    bool derived_;
};

std::array<int, 2> coords(const Lattice& lat, std::size_t i)
{
    const auto p = lat.point(i);
    return {p[0], lat.dim() > 1 ? p[1] : 0};
}

// Sums of mu(x)/|x| over the sets appearing in the equations.
struct Sums {
    double O = 0;   // x_O > 0
    double BA = 0;  // x in A, x_BA > 0
    double Aonly = 0; // x in A, x_A > 0, x_BA = 0
    double AB = 0;
    double Bonly = 0;
    double TA = 0;  // all x in A
    double TB = 0;
    double TO = 0;
};

Sums sums_of(const StateSpace& s, const Layout& l, const View& mu)
{
    Sums r;
    for (std::size_t v : {l.O, l.A, l.B}) {
        const Lattice& lat = s.lattice(v);
        for (std::size_t i = 1; i < lat.size(); ++i) {
            const auto x = coords(lat, i);
            const double w = mu.at(v, x) / lat.total(i);
            if (v == l.O) {
                r.O += w;
                r.TO += w;
            } else if (v == l.A) {
                r.TA += w;
                if (x[0] > 0) r.BA += w;
                else r.Aonly += w;
            } else {
                r.TB += w;
                if (x[0] > 0) r.AB += w;
                else r.Bonly += w;
            }
        }
    }
    return r;
}

// Two-color node with priority color p (coordinate 0) and low color q
// (coordinate 1). Low-color arrivals come from O at rate gO/2 * SO; priority
// arrivals from the other node's low color at rate g_other * S_other.
void derived_two_color(const StateSpace& s, std::size_t v, const View& mu, double rho, double gp, double gq,
                       double low_in, double high_in, double T, std::vector<double>& out)
{
    const Lattice& lat = s.lattice(v);
    for (std::size_t i = 1; i < lat.size(); ++i) {
        const auto x = coords(lat, i);
        const double n = lat.total(i);
        const double m = mu.at(v, x);
        const double out_rate = x[0] > 0 ? gp : gq;
        double d = -rho * m * (low_in + high_in);
        if (x == std::array<int, 2>{0, 1}) {
            d += -rho * low_in * T + low_in;
            d += 0.5 * mu.at(v, {0, 2}) * gq + 0.5 * mu.at(v, {1, 1}) * gp - m * gq;
        } else if (x == std::array<int, 2>{1, 0}) {
            d += -rho * high_in * T + high_in;
            d += 0.5 * mu.at(v, {2, 0}) * gp - m * gp;
        } else {
            if (x[1] > 0) d += rho * low_in * n / (n - 1) * mu.at(v, {x[0], x[1] - 1});
            if (x[0] > 0) d += rho * high_in * n / (n - 1) * mu.at(v, {x[0] - 1, x[1]});
            if (x[0] == 0) d += n / (n + 1) * mu.at(v, {x[0], x[1] + 1}) * gq;
            d += n / (n + 1) * mu.at(v, {x[0] + 1, x[1]}) * gp;
            d -= m * out_rate;
        }
        out[s.derived_index(v, i)] = d;
    }
}

void linear_two_color(const StateSpace& s, std::size_t v, const View& mu, double gp, double gq, double low_in,
                      double high_in, std::vector<double>& out)
{
    const Lattice& lat = s.lattice(v);
    for (std::size_t i = 1; i < lat.size(); ++i) {
        const auto x = coords(lat, i);
        const double n = lat.total(i);
        const double m = mu.at(v, x);
        double d;
        if (x == std::array<int, 2>{0, 1}) {
            d = low_in + 0.5 * mu.at(v, {0, 2}) * gq + 0.5 * mu.at(v, {1, 1}) * gp - m * gq;
        } else if (x == std::array<int, 2>{1, 0}) {
            d = high_in + 0.5 * mu.at(v, {2, 0}) * gp - m * gp;
        } else {
            d = n / (n + 1) * mu.at(v, {x[0], x[1] + 1}) * gq * (x[0] == 0 ? 1.0 : 0.0) +
                n / (n + 1) * mu.at(v, {x[0] + 1, x[1]}) * gp - m * (x[0] > 0 ? gp : gq);
        }
        out[s.derived_index(v, i)] = d;
    }
}

} // namespace

std::vector<double> queue_rhs(const ProductMeasure& nu)
{
    const StateSpace& s = nu.space();
    const Layout l = layout_of(s);
    const View q(s, nu.values(), false);

    double lO = 0, lBA = 0, lA = 0, lAB = 0, lB = 0;
    for (std::size_t v : {l.O, l.A, l.B}) {
        const Lattice& lat = s.lattice(v);
        for (std::size_t i = 1; i < lat.size(); ++i) {
            const auto x = coords(lat, i);
            const double m = q.at(v, x);
            if (v == l.O) lO += m;
            else if (v == l.A) (x[0] > 0 ? lBA : lA) += m;
            else (x[0] > 0 ? lAB : lB) += m;
        }
    }
    lO *= l.gO;
    lBA *= l.gBA;
    lA *= l.gA;
    lAB *= l.gAB;
    lB *= l.gB;

    std::vector<double> out(s.queue_size(), 0.0);
    auto two_color = [&](std::size_t v, double gp, double gq, double low_in, double high_in) {
        const Lattice& lat = s.lattice(v);
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const auto x = coords(lat, i);
            const bool hp = x[0] > 0;
            const bool lo = x[1] > 0;
            double d = -q.at(v, x) * (low_in + high_in + (hp ? gp : 0.0) + (lo && !hp ? gq : 0.0));
            if (lo) d += q.at(v, {x[0], x[1] - 1}) * low_in;
            if (hp) d += q.at(v, {x[0] - 1, x[1]}) * high_in;
            if (!hp) d += q.at(v, {x[0], x[1] + 1}) * gq;
            d += q.at(v, {x[0] + 1, x[1]}) * gp;
            out[s.queue_offset(v) + i] = d;
        }
    };
    two_color(l.A, l.gBA, l.gA, lO / 2, lB);
    two_color(l.B, l.gAB, l.gB, lO / 2, lA);

    const Lattice& lat = s.lattice(l.O);
    const double in = lAB + lBA;
    for (std::size_t i = 0; i < lat.size(); ++i) {
        const int x = lat.point(i)[0];
        double d = -q.at(l.O, {x, 0}) * (in + (x > 0 ? l.gO : 0.0));
        if (x > 0) d += q.at(l.O, {x - 1, 0}) * in;
        d += q.at(l.O, {x + 1, 0}) * l.gO;
        out[s.queue_offset(l.O) + i] = d;
    }
    return out;
}

std::vector<double> derived_rhs(const DerivedVector& mu, double rho)
{
    const StateSpace& s = mu.space();
    const Layout l = layout_of(s);
    const View d(s, mu.values(), true);
    const Sums S = sums_of(s, l, d);
    std::vector<double> out(s.derived_size(), 0.0);

    derived_two_color(s, l.A, d, rho, l.gBA, l.gA, l.gO / 2 * S.O, l.gB * S.Bonly, S.TA, out);
    derived_two_color(s, l.B, d, rho, l.gAB, l.gB, l.gO / 2 * S.O, l.gA * S.Aonly, S.TB, out);

    const double J = l.gAB * S.AB + l.gBA * S.BA;
    const Lattice& lat = s.lattice(l.O);
    for (std::size_t i = 1; i < lat.size(); ++i) {
        const int x = lat.point(i)[0];
        const double m = d.at(l.O, {x, 0});
        double r;
        if (x > 1) {
            r = rho * (x / (x - 1.0) * d.at(l.O, {x - 1, 0}) - m) * J +
                (-m + x / (x + 1.0) * d.at(l.O, {x + 1, 0})) * l.gO;
        } else {
            r = -rho * (S.TO + m) * J + (-m + 0.5 * d.at(l.O, {2, 0})) * l.gO + J;
        }
        out[s.derived_index(l.O, i)] = r;
    }
    return out;
}

std::vector<double> linear_rhs(const DerivedVector& mu)
{
    const StateSpace& s = mu.space();
    const Layout l = layout_of(s);
    const View d(s, mu.values(), true);
    const Sums S = sums_of(s, l, d);
    std::vector<double> out(s.derived_size(), 0.0);

    linear_two_color(s, l.A, d, l.gBA, l.gA, l.gO / 2 * S.O, l.gB * S.Bonly, out);
    linear_two_color(s, l.B, d, l.gAB, l.gB, l.gO / 2 * S.O, l.gA * S.Aonly, out);

    const Lattice& lat = s.lattice(l.O);
    for (std::size_t i = 1; i < lat.size(); ++i) {
        const int x = lat.point(i)[0];
        const double m = d.at(l.O, {x, 0});
        double r = (-m + x / (x + 1.0) * d.at(l.O, {x + 1, 0})) * l.gO;
        if (x == 1) r += l.gAB * S.AB + l.gBA * S.BA;
        out[s.derived_index(l.O, i)] = r;
    }
    return out;
}

} // namespace mfnet::rshv1
