#include "uip/grid.hpp"

#include "uip/quadrature.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

namespace uip {

Grid Grid::make(const MarketModel& m, const std::vector<int>& nodes_per_axis, int time_steps,
                double n_sd) {
    validate(m);
    const int n = m.n(), d = m.d();
    if (static_cast<int>(nodes_per_axis.size()) != n + d)
        throw validation_error("grid: need one node count per axis");
    if (time_steps < 1) throw validation_error("grid: need at least one time step");
    if (!(n_sd > 0.0)) throw validation_error("grid: n_sd must be positive");
    Grid g;
    g.n = n;
    g.d = d;
    g.time_steps = time_steps;
    const Mat ss = m.sigma * m.sigma.transpose();
    for (int i = 0; i < n; ++i) {
        const int nodes = nodes_per_axis[i];
        if (nodes < 4) throw validation_error("grid: traded axes need at least 4 nodes");
        const double sd = std::sqrt(std::max(ss(i, i) * m.T, 1e-16));
        const double mq = std::log(m.s0[i]) - 0.5 * ss(i, i) * m.T;
        const double mp = mq + m.mu[i] * m.T;
        const double lo = std::min(mq, mp) - n_sd * sd;
        const double hi = std::max(mq, mp) + n_sd * sd;
        Vec ax(nodes);
        for (int k = 0; k < nodes; ++k) ax[k] = lo + (hi - lo) * k / (nodes - 1);
        g.axes.push_back(ax);
    }
    if (d > 0) {
        const GaussianLaw law = ou_conditional_moments(m, 0.0, m.x0, m.T);
        for (int j = 0; j < d; ++j) {
            const int nodes = nodes_per_axis[n + j];
            if (nodes < 4) throw validation_error("grid: factor axes need at least 4 nodes");
            const double sd = std::max(std::sqrt(std::max(law.cov(j, j), 0.0)),
                                       1e-8 * (1.0 + std::abs(m.x0[j])));
            const double lo = std::min(m.x0[j], law.mean[j]) - n_sd * sd;
            const double hi = std::max(m.x0[j], law.mean[j]) + n_sd * sd;
            Vec ax(nodes);
            for (int k = 0; k < nodes; ++k) ax[k] = lo + (hi - lo) * k / (nodes - 1);
            g.axes.push_back(ax);
        }
    }
    return g;
}

namespace {

struct CellWeights {
    std::size_t base = 0;
    int dim = 0;
    std::size_t stride[8];
    double w[8]; // weight of the upper node per axis
};

CellWeights locate(const Grid& g, const Vec& s, const Vec& x) {
    CellWeights cw;
    cw.dim = g.dim();
    std::size_t stride = 1;
    std::vector<std::size_t> strides(cw.dim);
    for (int a = cw.dim - 1; a >= 0; --a) {
        strides[a] = stride;
        stride *= g.axes[a].size();
    }
    std::size_t base = 0;
    for (int a = 0; a < cw.dim; ++a) {
        const Vec& ax = g.axes[a];
        const double u = a < g.n ? std::log(s[a]) : x[a - g.n];
        const double h = ax[1] - ax[0];
        const double pad = 1e-9 * (std::abs(ax[0]) + std::abs(ax[ax.size() - 1]) + 1.0);
        if (u < ax[0] - pad || u > ax[ax.size() - 1] + pad)
            throw numerical_error("surface: query outside grid hull");
        int i = static_cast<int>(std::floor((u - ax[0]) / h));
        i = std::max(0, std::min<int>(i, static_cast<int>(ax.size()) - 2));
        cw.stride[a] = strides[a];
        cw.w[a] = std::min(1.0, std::max(0.0, (u - ax[i]) / h));
        base += static_cast<std::size_t>(i) * strides[a];
    }
    cw.base = base;
    return cw;
}

double interp(const CellWeights& cw, const std::vector<double>& field) {
    double acc = 0.0;
    const int corners = 1 << cw.dim;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t idx = cw.base;
        for (int a = 0; a < cw.dim; ++a) {
            if (c & (1 << a)) {
                w *= cw.w[a];
                idx += cw.stride[a];
            } else {
                w *= 1.0 - cw.w[a];
            }
        }
        acc += w * field[idx];
    }
    return acc;
}

std::pair<std::pair<int, int>, double> bracket_time(const Vec& times, double t) {
    const int S = static_cast<int>(times.size());
    if (t <= times[0]) return {{0, 0}, 0.0};
    if (t >= times[S - 1]) return {{S - 1, S - 1}, 0.0};
    int lo = 0;
    while (lo + 1 < S && times[lo + 1] <= t) ++lo;
    const int hi = std::min(lo + 1, S - 1);
    const double w = times[hi] > times[lo] ? (t - times[lo]) / (times[hi] - times[lo]) : 0.0;
    return {{lo, hi}, w};
}

} // namespace

double PriceSurface::value_at(double t, const Vec& s, const Vec& x) const {
    const CellWeights cw = locate(grid, s, x);
    const auto [pair, w] = bracket_time(slice_times, t);
    const double lo = interp(cw, values[pair.first]);
    if (pair.first == pair.second) return lo;
    return (1.0 - w) * lo + w * interp(cw, values[pair.second]);
}

Vec PriceSurface::gradient_at(double t, const Vec& s, const Vec& x) const {
    const CellWeights cw = locate(grid, s, x);
    const auto [pair, w] = bracket_time(slice_times, t);
    Vec out(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) {
        const double lo = interp(cw, gradients[pair.first][a]);
        out[a] = pair.first == pair.second
                     ? lo
                     : (1.0 - w) * lo + w * interp(cw, gradients[pair.second][a]);
    }
    return out;
}

double PriceSurface::price() const { return value_at(0.0, anchor_s, anchor_x); }

void PriceSurface::write_csv(std::ostream& os) const {
    for (int a = 0; a < grid.n; ++a) os << 's' << (a + 1) << ',';
    for (int a = 0; a < grid.d; ++a) os << 'x' << (a + 1) << ',';
    os << "value";
    for (int a = 0; a < grid.n; ++a) os << ",dv_ds" << (a + 1);
    for (int a = 0; a < grid.d; ++a) os << ",dv_dx" << (a + 1);
    os << '\n';
    const int dim = grid.dim();
    std::vector<int> idx(dim, 0);
    const std::vector<double>& v0 = values[0];
    for (std::size_t flat = 0; flat < v0.size(); ++flat) {
        for (int a = 0; a < dim; ++a) {
            const double u = grid.axes[a][idx[a]];
            os << format_full(a < grid.n ? std::exp(u) : u) << ',';
        }
        os << format_full(v0[flat]);
        for (int a = 0; a < dim; ++a) os << ',' << format_full(gradients[0][a][flat]);
        os << '\n';
        for (int a = dim - 1; a >= 0; --a) {
            if (++idx[a] < static_cast<int>(grid.axes[a].size())) break;
            idx[a] = 0;
        }
    }
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_vec(std::ostream& os, const std::vector<double>& v) {
    put_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}
void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
bool get_u64(std::istream& is, std::uint64_t& v) { return bool(is.read(reinterpret_cast<char*>(&v), 8)); }
bool get_f64(std::istream& is, double& v) { return bool(is.read(reinterpret_cast<char*>(&v), 8)); }
bool get_vec(std::istream& is, std::vector<double>& v) {
    std::uint64_t n;
    if (!get_u64(is, n) || n > (1ULL << 33)) return false;
    v.resize(n);
    return bool(is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8)));
}
bool get_str(std::istream& is, std::string& s) {
    std::uint64_t n;
    if (!get_u64(is, n) || n > (1ULL << 24)) return false;
    s.resize(n);
    return bool(is.read(s.data(), static_cast<std::streamsize>(n)));
}

constexpr std::uint64_t kMagic = 0x5549505355524631ULL; // "UIPSURF1"

} // namespace

void PriceSurface::save_binary(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw validation_error("surface: cannot open cache file for writing");
    put_u64(os, kMagic);
    put_u64(os, key);
    put_u64(os, static_cast<std::uint64_t>(grid.n));
    put_u64(os, static_cast<std::uint64_t>(grid.d));
    put_f64(os, gamma);
    put_u64(os, static_cast<std::uint64_t>(side + 1));
    put_f64(os, m_trunc);
    put_str(os, payoff_name);
    put_str(os, model_id);
    put_u64(os, grid.axes.size());
    for (const auto& ax : grid.axes)
        put_vec(os, std::vector<double>(ax.data(), ax.data() + ax.size()));
    put_vec(os, std::vector<double>(slice_times.data(), slice_times.data() + slice_times.size()));
    put_vec(os, std::vector<double>(anchor_s.data(), anchor_s.data() + anchor_s.size()));
    put_vec(os, std::vector<double>(anchor_x.data(), anchor_x.data() + anchor_x.size()));
    put_u64(os, values.size());
    for (const auto& v : values) put_vec(os, v);
    for (const auto& slice : gradients) {
        put_u64(os, slice.size());
        for (const auto& gax : slice) put_vec(os, gax);
    }
}

std::optional<PriceSurface> PriceSurface::load_binary(const std::string& path,
                                                      std::uint64_t expected_key) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    std::uint64_t magic, key, n, d, sidep1, naxes, nslices;
    double gamma, mtr;
    if (!get_u64(is, magic) || magic != kMagic) return std::nullopt;
    if (!get_u64(is, key) || key != expected_key) return std::nullopt;
    PriceSurface ps;
    ps.key = key;
    if (!get_u64(is, n) || !get_u64(is, d) || !get_f64(is, gamma) || !get_u64(is, sidep1) ||
        !get_f64(is, mtr))
        return std::nullopt;
    ps.grid.n = static_cast<int>(n);
    ps.grid.d = static_cast<int>(d);
    ps.gamma = gamma;
    ps.side = static_cast<int>(sidep1) - 1;
    ps.m_trunc = mtr;
    if (!get_str(is, ps.payoff_name) || !get_str(is, ps.model_id)) return std::nullopt;
    if (!get_u64(is, naxes)) return std::nullopt;
    for (std::uint64_t a = 0; a < naxes; ++a) {
        std::vector<double> ax;
        if (!get_vec(is, ax)) return std::nullopt;
        ps.grid.axes.push_back(Eigen::Map<const Vec>(ax.data(), ax.size()));
    }
    std::vector<double> tmp;
    if (!get_vec(is, tmp)) return std::nullopt;
    ps.slice_times = Eigen::Map<const Vec>(tmp.data(), tmp.size());
    if (!get_vec(is, tmp)) return std::nullopt;
    ps.anchor_s = Eigen::Map<const Vec>(tmp.data(), tmp.size());
    if (!get_vec(is, tmp)) return std::nullopt;
    ps.anchor_x = Eigen::Map<const Vec>(tmp.data(), tmp.size());
    if (!get_u64(is, nslices)) return std::nullopt;
    ps.values.resize(nslices);
    for (auto& v : ps.values)
        if (!get_vec(is, v)) return std::nullopt;
    ps.gradients.resize(nslices);
    for (auto& slice : ps.gradients) {
        std::uint64_t ng;
        if (!get_u64(is, ng)) return std::nullopt;
        slice.resize(ng);
        for (auto& gax : slice)
            if (!get_vec(is, gax)) return std::nullopt;
    }
    ps.grid.time_steps = 1;
    return ps;
}

std::uint64_t surface_cache_key(const MarketModel& m, const std::string& payoff_name,
                                double gamma, int side, const Grid& g) {
    std::uint64_t h = fnv1a(m.describe());
    h = fnv1a(payoff_name, h);
    h = fnv1a(&gamma, sizeof gamma, h);
    h = fnv1a(&side, sizeof side, h);
    h = fnv1a(&g.time_steps, sizeof g.time_steps, h);
    for (const auto& ax : g.axes) h = fnv1a(ax.data(), ax.size() * sizeof(double), h);
    return h;
}

} // namespace uip
