#include "uip/market_model.hpp"

#include "uip/quadrature.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace uip {
namespace {

// Symmetric PSD square root with negative eigenvalues clamped to zero;
// robust where Cholesky fails (exactly singular residual covariances).
Mat psd_sqrt(const Mat& a) {
    if (a.size() == 0) return a;
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    Vec ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal();
}

void append(std::ostringstream& os, const char* tag, const Mat& m) {
    os << tag << ':';
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) os << format_full(m(i, j)) << ',';
    os << ';';
}

} // namespace

std::string MarketModel::describe() const {
    std::ostringstream os;
    os << "model{n:" << n() << ";d:" << d() << ';';
    append(os, "mu", mu);
    append(os, "sigma", sigma);
    append(os, "alpha", alpha);
    append(os, "beta", beta);
    append(os, "b0", b ? Vec(b(0.0)) : b0);
    os << "tdep:" << (b ? 1 : 0) << ';';
    os << "T:" << format_full(T) << ';';
    append(os, "s0", s0);
    append(os, "x0", x0);
    os << '}';
    return os.str();
}

void validate(const MarketModel& m) {
    const int n = m.n(), d = m.d();
    if (n + d < 1) throw validation_error("model: needs at least one asset or factor");
    if (m.sigma.rows() != n || m.sigma.cols() != n)
        throw validation_error("model: sigma must be n x n");
    if (m.s0.size() != n) throw validation_error("model: s0 must have length n");
    if (m.beta.rows() != d || m.beta.cols() != d)
        throw validation_error("model: beta must be d x d");
    if (m.x0.size() != d) throw validation_error("model: x0 must have length d");
    if (m.b0.size() != 0 && m.b0.size() != d)
        throw validation_error("model: b0 must have length d");
    if (m.b && m.b(0.0).size() != d)
        throw validation_error("model: b(t) must have length d");
    if (!(m.T > 0.0)) throw validation_error("model: horizon T must be positive");
    for (int i = 0; i < n; ++i)
        if (!(m.s0[i] > 0.0)) throw validation_error("model: initial prices must be positive");
    for (int i = 0; i < d; ++i)
        if (m.alpha[i] < 0.0) throw validation_error("model: mean-reversion rates must be nonnegative");
    if (n > 0) {
        Eigen::JacobiSVD<Mat> svd(m.sigma);
        const double smin = svd.singularValues().minCoeff();
        const double smax = svd.singularValues().maxCoeff();
        if (!(smin > 0.0) || smax / smin > 1e10)
            throw validation_error("model: sigma is singular or too ill-conditioned");
    }
}

Vec market_price_of_risk(const MarketModel& m) {
    if (m.n() == 0) return Vec(0);
    return m.sigma.partialPivLu().solve(m.mu);
}

double decay_integral(double a, double h) {
    const double y = a * h;
    if (std::abs(y) < 1e-12) return h * (1.0 - 0.5 * y);
    return -std::expm1(-y) / a;
}

GaussianLaw ou_conditional_moments(const MarketModel& m, double t, const Vec& x, double dt) {
    const int d = m.d();
    if (x.size() != d) throw validation_error("ou_conditional_moments: state size mismatch");
    if (dt < 0.0) throw validation_error("ou_conditional_moments: negative horizon");
    GaussianLaw law;
    law.mean = Vec(d);
    law.cov = Mat(d, d);
    const Mat bb = m.beta * m.beta.transpose();
    for (int i = 0; i < d; ++i) {
        double drift;
        if (m.b) {
            const int ci = i;
            drift = simpson(
                [&](double u) { return std::exp(-m.alpha[ci] * (dt - u)) * m.b(t + u)[ci]; }, 0.0,
                dt, 512);
        } else {
            const double bi = m.b0.size() == d ? m.b0[i] : 0.0;
            drift = bi * decay_integral(m.alpha[i], dt);
        }
        law.mean[i] = x[i] * std::exp(-m.alpha[i] * dt) + drift;
        for (int j = 0; j < d; ++j)
            law.cov(i, j) = bb(i, j) * decay_integral(m.alpha[i] + m.alpha[j], dt);
    }
    return law;
}

GaussianLaw traded_log_law(const MarketModel& m, const Vec& s, double dt, Measure measure) {
    const int n = m.n();
    if (s.size() != n) throw validation_error("traded_log_law: state size mismatch");
    GaussianLaw law;
    const Mat ss = m.sigma * m.sigma.transpose();
    law.mean = Vec(n);
    for (int i = 0; i < n; ++i) {
        const double drift = measure == Measure::Physical ? m.mu[i] : 0.0;
        law.mean[i] = std::log(s[i]) + (drift - 0.5 * ss(i, i)) * dt;
    }
    law.cov = ss * dt;
    return law;
}

OuStep ou_step(const MarketModel& m, double t, double h) {
    const int d = m.d();
    OuStep st;
    st.decay = Vec(d);
    st.mean_b = Vec(d);
    st.cross = Mat(d, d);
    const Mat bb = m.beta * m.beta.transpose();
    Mat v(d, d);
    for (int i = 0; i < d; ++i) {
        st.decay[i] = std::exp(-m.alpha[i] * h);
        if (m.b) {
            const int ci = i;
            st.mean_b[i] = simpson(
                [&](double u) { return std::exp(-m.alpha[ci] * (h - u)) * m.b(t + u)[ci]; }, 0.0, h,
                32);
        } else {
            st.mean_b[i] = (m.b0.size() == d ? m.b0[i] : 0.0) * decay_integral(m.alpha[i], h);
        }
        for (int j = 0; j < d; ++j) {
            st.cross(i, j) = decay_integral(m.alpha[i], h) * m.beta(i, j);
            v(i, j) = bb(i, j) * decay_integral(m.alpha[i] + m.alpha[j], h);
        }
    }
    st.full_l = psd_sqrt(v);
    if (h > 0.0) {
        Mat resid = v - st.cross * st.cross.transpose() / h;
        st.resid_l = psd_sqrt(resid);
    } else {
        st.resid_l = Mat::Zero(d, d);
    }
    return st;
}

} // namespace uip
