#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "errors.hpp"

namespace amv {

/// Least-squares extrapolation of value(r) ~ a + b r^p as r -> 0.
struct LimitFit {
    double limit = 0.0;
    double limit_std_error = 0.0;
    std::optional<double> rate;   ///< empty when the values are constant to within noise
    double coefficient = 0.0;     ///< b
    std::size_t window = 0;       ///< number of smallest radii used
};

namespace detail {

inline LimitFit fit_with_rate(std::span<const double> r, std::span<const double> v, std::span<const double> se,
                              std::optional<double> p)
{
    const std::size_t n = r.size();
    LimitFit f;
    f.window = n;
    f.rate = p;
    bool weighted = true;
    for (const double s : se) weighted &= s > 0.0;
    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = weighted ? 1.0 / (se[i] * se[i]) : 1.0;

    Eigen::RowVectorXd coef;   // limit = coef . v
    if (!p) {
        coef = w.transpose() / w.sum();
    } else {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 2);
        for (std::size_t i = 0; i < n; ++i) {
            X(static_cast<Eigen::Index>(i), 0) = 1.0;
            X(static_cast<Eigen::Index>(i), 1) = std::pow(r[i], *p);
        }
        const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
        const Eigen::MatrixXd G = XtW * X;
        const Eigen::MatrixXd C = G.ldlt().solve(XtW);
        coef = C.row(0);
        Eigen::VectorXd vv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) vv[static_cast<Eigen::Index>(i)] = v[i];
        f.coefficient = C.row(1).dot(vv);
    }
    double a = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = coef[static_cast<Eigen::Index>(i)];
        a += c * v[i];
        var += c * c * se[i] * se[i];
    }
    f.limit = a;
    f.limit_std_error = std::sqrt(var);
    return f;
}

} // namespace detail

/// Rate p from the log-log slope of successive differences |v_i - v_{i+1}| against r_i,
/// restricted to differences that stand clear of the error bars. Empty if fewer than
/// two such differences remain.
inline std::optional<double> fit_rate(std::span<const double> r, std::span<const double> v,
                                      std::span<const double> se)
{
    double scale = 0.0;
    for (const double x : v) scale = std::max(scale, std::abs(x));
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
        const double d = std::abs(v[i] - v[i + 1]);
        const double noise = 3.0 * std::hypot(se[i], se[i + 1]);
        if (d <= noise || d <= 1e-11 * scale || d == 0.0) continue;
        lx.push_back(std::log(r[i]));
        ly.push_back(std::log(d));
    }
    if (lx.size() < 2) return std::nullopt;
    const auto m = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double den = m * sxx - sx * sx;
    if (den <= 0.0) return std::nullopt;
    const double p = (m * sxy - sx * sy) / den;
    return std::clamp(p, 0.05, 8.0);
}

/// Fit over the `window` smallest radii (all when window is 0). Radii must be strictly decreasing.
inline LimitFit fit_limit(std::span<const double> radii, std::span<const double> values,
                          std::span<const double> std_errors, std::size_t window = 0)
{
    require(radii.size() == values.size() && values.size() == std_errors.size(), "fit_limit: length mismatch");
    require(!radii.empty(), "fit_limit: no data");
    for (std::size_t i = 0; i + 1 < radii.size(); ++i)
        require(radii[i] > radii[i + 1], "fit_limit: radii must be strictly decreasing");
    const std::size_t n = radii.size();
    const std::size_t w = window == 0 ? n : std::min(window, n);
    const std::size_t off = n - w;
    const auto r = radii.subspan(off), v = values.subspan(off), se = std_errors.subspan(off);
    std::optional<double> p = fit_rate(r, v, se);
    if (p && w < 3) p.reset();
    return detail::fit_with_rate(r, v, se, p);
}

/// Same model refitted on the smaller half of the window with the rate held fixed.
inline LimitFit refit_smaller_half(std::span<const double> radii, std::span<const double> values,
                                   std::span<const double> std_errors, const LimitFit& full)
{
    const std::size_t n = radii.size();
    const std::size_t need = full.rate ? 3 : 2;
    const std::size_t w = std::min(n, std::max(need, (full.window + 1) / 2));
    const std::size_t off = n - w;
    return detail::fit_with_rate(radii.subspan(off), values.subspan(off), std_errors.subspan(off), full.rate);
}

} // namespace amv
