#pragma once

#include "uip/common.hpp"

#include <functional>
#include <vector>

namespace uip {

struct QuadRule {
    Vec nodes;
    Vec weights;
};

/// Gauss-Hermite rule for int exp(-u^2) h(u) du (Golub-Welsch).
const QuadRule& gauss_hermite(int n);

/// Gauss-Legendre rule on [-1, 1].
const QuadRule& gauss_legendre(int n);

/// E[h(Z)] for Z ~ N(mean, sd^2) by Gauss-Hermite with n nodes.
double gauss_expectation(const std::function<double(double)>& h, double mean, double sd, int n = 64);

/// Composite Simpson on [a, b] with an even number of panels.
double simpson(const std::function<double(double)>& f, double a, double b, int panels = 512);

/// Trapezoid over explicit nodes/values.
double trapezoid(const Vec& t, const Vec& v);

} // namespace uip
