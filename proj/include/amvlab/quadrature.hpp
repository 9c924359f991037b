#pragma once

#include <boost/math/special_functions/legendre.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace amv::quad {

struct Rule {
    std::vector<double> nodes;   // on [-1, 1], ascending
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1]; cached per n.
inline const Rule& gauss_legendre(int n)
{
    require(n >= 1, "gauss_legendre: need at least one node");
    static std::mutex mutex;
    static std::map<int, Rule> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;

    const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
    Rule rule;
    auto weight = [n](double x) {
        const double dp = boost::math::legendre_p_prime(n, x);
        return 2.0 / ((1.0 - x * x) * dp * dp);
    };
    for (auto it = zeros.rbegin(); it != zeros.rend(); ++it) {
        if (*it == 0.0) continue;
        rule.nodes.push_back(-*it);
        rule.weights.push_back(weight(*it));
    }
    if (n % 2 == 1) {
        rule.nodes.push_back(0.0);
        rule.weights.push_back(weight(0.0));
    }
    for (const double z : zeros) {
        if (z == 0.0) continue;
        rule.nodes.push_back(z);
        rule.weights.push_back(weight(z));
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

/// Gauss-Legendre on [a, b].
template <class F>
double integrate(F&& f, double a, double b, int n)
{
    const Rule& rule = gauss_legendre(n);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return sum * half;
}

/// Gauss-Legendre after the map x = a + (b - a)(1 - cos t)/2, t in [0, pi].
/// Square-root behaviour at either endpoint becomes smooth in t.
template <class F>
double integrate_clustered(F&& f, double a, double b, int n)
{
    if (b <= a) return 0.0;
    const double len = b - a;
    return integrate(
        [&](double t) { return f(a + 0.5 * len * (1.0 - std::cos(t))) * 0.5 * len * std::sin(t); }, 0.0,
        std::numbers::pi, n);
}

/// Integral of f over the Euclidean ball |y - c| < radius in R^dim, by recursive slicing
/// y_k = rho * sin(theta) with Gauss-Legendre in theta. Each slice radius rho * cos(theta)
/// is smooth in theta, so polynomial integrands are integrated exactly once n is large enough.
/// f receives a pointer to dim coordinates (absolute, not relative to c).
template <class F>
double integrate_ball(int dim, const double* center, double radius, int n, F&& f)
{
    std::vector<double> y(static_cast<std::size_t>(dim));
    const Rule& rule = gauss_legendre(n);
    auto rec = [&](auto&& self, int k, double rho) -> double {
        if (k == dim) return f(static_cast<const double*>(y.data()));
        double sum = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double theta = 0.5 * std::numbers::pi * rule.nodes[i];
            const double c = std::cos(theta);
            y[k] = center[k] + rho * std::sin(theta);
            sum += rule.weights[i] * rho * c * self(self, k + 1, rho * c);
        }
        return sum * 0.5 * std::numbers::pi;
    };
    if (dim == 0) return f(static_cast<const double*>(y.data()));
    return rec(rec, 0, radius);
}

} // namespace amv::quad
