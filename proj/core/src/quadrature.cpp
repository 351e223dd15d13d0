#include "uip/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <mutex>

namespace uip {
namespace {

// Nodes/weights from the symmetric tridiagonal Jacobi matrix.
QuadRule golub_welsch(const Vec& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        J(i, i + 1) = offdiag[i];
        J(i + 1, i) = offdiag[i];
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(J);
    QuadRule r;
    r.nodes = es.eigenvalues();
    r.weights = Vec(n);
    for (int i = 0; i < n; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        r.weights[i] = mu0 * v0 * v0;
    }
    return r;
}

std::map<int, QuadRule>& cache(int which) {
    static std::map<int, QuadRule> hermite, legendre;
    return which == 0 ? hermite : legendre;
}
std::mutex cache_mutex;

} // namespace

const QuadRule& gauss_hermite(int n) {
    if (n < 1) throw validation_error("gauss_hermite: n must be positive");
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto& c = cache(0);
    auto it = c.find(n);
    if (it == c.end()) {
        Vec off(n - 1);
        for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(k / 2.0);
        it = c.emplace(n, golub_welsch(off, std::sqrt(M_PI))).first;
    }
    return it->second;
}

const QuadRule& gauss_legendre(int n) {
    if (n < 1) throw validation_error("gauss_legendre: n must be positive");
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto& c = cache(1);
    auto it = c.find(n);
    if (it == c.end()) {
        Vec off(n - 1);
        for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
        it = c.emplace(n, golub_welsch(off, 2.0)).first;
    }
    return it->second;
}

double gauss_expectation(const std::function<double(double)>& h, double mean, double sd, int n) {
    const QuadRule& r = gauss_hermite(n);
    const double c = std::sqrt(2.0) * sd;
    double acc = 0.0;
    for (int i = 0; i < r.nodes.size(); ++i) acc += r.weights[i] * h(mean + c * r.nodes[i]);
    return acc / std::sqrt(M_PI);
}

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels < 2 || panels % 2 != 0) throw validation_error("simpson: panels must be even and >= 2");
    const double h = (b - a) / panels;
    double acc = f(a) + f(b);
    for (int i = 1; i < panels; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double trapezoid(const Vec& t, const Vec& v) {
    if (t.size() != v.size() || t.size() < 2) throw validation_error("trapezoid: mismatched nodes");
    double acc = 0.0;
    for (int i = 0; i + 1 < t.size(); ++i) acc += 0.5 * (v[i] + v[i + 1]) * (t[i + 1] - t[i]);
    return acc;
}

std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) { return fnv1a(s.data(), s.size(), seed); }

} // namespace uip
