#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"

namespace amv {

/// Real value per point of a finite space, indexed by point order.
using ScalarField = std::vector<double>;

/// Strictly positive length scale.
class Radius {
public:
    explicit Radius(double r) : r_(r)
    {
        require(std::isfinite(r) && r > 0.0, "radius must be positive and finite, got " + std::to_string(r));
    }
    double value() const noexcept { return r_; }
    operator double() const noexcept { return r_; }

private:
    double r_;
};

/// Anything the operators can run on: finitely many points with masses and a way to
/// enumerate the open ball {y : d(x, y) < r} in ascending index order.
template <class S>
concept MetricMeasureSpace = requires(const S& s, std::size_t i, double r, std::vector<std::pair<std::size_t, double>>& out) {
    { s.size() } -> std::convertible_to<std::size_t>;
    { s.mass(i) } -> std::convertible_to<double>;
    s.ball_members(i, r, out);
};

/// Finite point set with a dense symmetric distance matrix and positive point masses.
/// The triangle inequality is not checked; nothing below depends on it.
class FiniteMMSpace {
public:
    FiniteMMSpace() = default;

    /// dist is row-major n x n.
    FiniteMMSpace(std::vector<double> dist, std::vector<double> mass, std::vector<std::string> labels = {})
        : n_(mass.size()), dist_(std::move(dist)), mass_(std::move(mass)), labels_(std::move(labels))
    {
        require(dist_.size() == n_ * n_, "distance matrix size does not match point count");
        if (labels_.empty())
            for (std::size_t i = 0; i < n_; ++i) labels_.push_back(std::to_string(i));
        require(labels_.size() == n_, "label count does not match point count");
        for (std::size_t i = 0; i < n_; ++i) {
            require(std::isfinite(mass_[i]) && mass_[i] > 0.0, "point masses must be positive");
            require(dist_[i * n_ + i] == 0.0, "distance matrix must have a zero diagonal");
            for (std::size_t j = 0; j < i; ++j) {
                const double d = dist_[i * n_ + j];
                require(std::isfinite(d) && d >= 0.0, "distances must be finite and nonnegative");
                require(d == dist_[j * n_ + i], "distance matrix must be symmetric");
            }
        }
    }

    /// Points on a line at the given coordinates.
    static FiniteMMSpace on_line(std::span<const double> coords, std::vector<double> mass)
    {
        const std::size_t n = coords.size();
        std::vector<double> d(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(coords[i] - coords[j]);
        return FiniteMMSpace(std::move(d), std::move(mass));
    }

    std::size_t size() const noexcept { return n_; }
    double mass(std::size_t i) const { return mass_[i]; }
    double distance(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
    const std::vector<double>& masses() const noexcept { return mass_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    std::size_t index_of(const std::string& label) const
    {
        for (std::size_t i = 0; i < n_; ++i)
            if (labels_[i] == label) return i;
        throw InputError("unknown point id '" + label + "'");
    }

    void ball_members(std::size_t x, double r, std::vector<std::pair<std::size_t, double>>& out) const
    {
        out.clear();
        for (std::size_t y = 0; y < n_; ++y) {
            const double d = dist_[x * n_ + y];
            if (d < r) out.emplace_back(y, d);
        }
    }

    /// Copy with one point mass replaced (fault injection in the identity runner).
    FiniteMMSpace with_mass(std::size_t i, double m) const
    {
        FiniteMMSpace copy = *this;
        require(m > 0.0, "mass must be positive");
        copy.mass_.at(i) = m;
        return copy;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> dist_;
    std::vector<double> mass_;
    std::vector<std::string> labels_;
};

/// Text format:
///   points <n>
///   [labels <l_0> ... <l_{n-1}>]
///   distances
///   <row 1: d(1,0)>
///   <row 2: d(2,0) d(2,1)>
///   ...
///   masses
///   <m_0> ... <m_{n-1}>
/// Lines starting with '#' are comments; all separators are whitespace.
inline void write_space(std::ostream& os, const FiniteMMSpace& s)
{
    const auto old = os.precision(17);
    os << "points " << s.size() << "\nlabels";
    for (const auto& l : s.labels()) os << ' ' << l;
    os << "\ndistances\n";
    for (std::size_t i = 1; i < s.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) os << (j ? " " : "") << s.distance(i, j);
        os << '\n';
    }
    os << "masses\n";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s.mass(i);
    os << '\n';
    os.precision(old);
}

inline FiniteMMSpace read_space(std::istream& is)
{
    std::stringstream clean;
    for (std::string line; std::getline(is, line);) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first != std::string::npos && line[first] == '#') continue;
        clean << line << '\n';
    }
    std::string tok;
    require(static_cast<bool>(clean >> tok) && tok == "points", "space file: expected 'points'");
    long long n = -1;
    require(static_cast<bool>(clean >> n) && n >= 0, "space file: bad point count");
    const auto N = static_cast<std::size_t>(n);
    require(static_cast<bool>(clean >> tok), "space file: truncated");
    std::vector<std::string> labels;
    if (tok == "labels") {
        labels.resize(N);
        for (auto& l : labels) require(static_cast<bool>(clean >> l), "space file: missing label");
        require(static_cast<bool>(clean >> tok), "space file: truncated");
    }
    require(tok == "distances", "space file: expected 'distances'");
    std::vector<double> d(N * N, 0.0);
    for (std::size_t i = 1; i < N; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v;
            require(static_cast<bool>(clean >> v), "space file: missing distance entry");
            d[i * N + j] = d[j * N + i] = v;
        }
    require(static_cast<bool>(clean >> tok) && tok == "masses", "space file: expected 'masses'");
    std::vector<double> m(N);
    for (auto& v : m) require(static_cast<bool>(clean >> v), "space file: missing mass entry");
    return FiniteMMSpace(std::move(d), std::move(m), std::move(labels));
}

/// One decimal per line.
inline void write_field(std::ostream& os, std::span<const double> u)
{
    const auto old = os.precision(17);
    for (const double v : u) os << v << '\n';
    os.precision(old);
}

inline ScalarField read_field(std::istream& is)
{
    ScalarField u;
    for (std::string line; std::getline(is, line);) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::size_t used = 0;
        const double v = std::stod(line.substr(first), &used);
        require(std::isfinite(v), "field file: non-finite value");
        u.push_back(v);
    }
    return u;
}

/// Open balls B_r(x) for every point of a space at one radius, in CSR form with
/// ascending member indices. All operators below read from a table so that the
/// neighbour search runs once per (space, r).
class BallTable {
public:
    template <MetricMeasureSpace S>
    BallTable(const S& space, Radius r) : r_(r.value()), n_(space.size())
    {
        std::vector<std::vector<std::pair<std::size_t, double>>> rows(n_);
        parallel_for(n_, [&](std::size_t x) {
            space.ball_members(x, r_, rows[x]);
            bool has_self = false;
            for (const auto& [y, d] : rows[x]) has_self |= (y == x);
            if (!has_self) throw InputError("ball_members must contain the center");
        });
        offsets_.assign(n_ + 1, 0);
        for (std::size_t x = 0; x < n_; ++x) offsets_[x + 1] = offsets_[x] + rows[x].size();
        members_.resize(offsets_[n_]);
        dists_.resize(offsets_[n_]);
        masses_.resize(n_);
        point_mass_.resize(n_);
        for (std::size_t x = 0; x < n_; ++x) {
            point_mass_[x] = space.mass(x);
            std::size_t k = offsets_[x];
            for (const auto& [y, d] : rows[x]) {
                members_[k] = y;
                dists_[k] = d;
                ++k;
            }
        }
        for (std::size_t x = 0; x < n_; ++x) {
            double m = 0.0;
            for (std::size_t k = offsets_[x]; k < offsets_[x + 1]; ++k) m += point_mass_[members_[k]];
            masses_[x] = m;
        }
    }

    /// Same neighbourhoods, with ball masses taken from an ambient space the table's
    /// points sit inside (balls near the edge of a domain keep their full mass).
    BallTable with_ball_masses(std::vector<double> m) const
    {
        require(m.size() == n_, "with_ball_masses: one mass per point");
        for (std::size_t x = 0; x < n_; ++x)
            require(m[x] >= masses_[x] * (1.0 - 1e-12), "with_ball_masses: ambient mass below member mass");
        BallTable t = *this;
        t.masses_ = std::move(m);
        return t;
    }

    double radius() const noexcept { return r_; }
    std::size_t size() const noexcept { return n_; }
    double point_mass(std::size_t i) const { return point_mass_[i]; }
    /// mu(B_r(x)).
    double ball_mass(std::size_t x) const { return masses_[x]; }
    std::span<const std::size_t> members(std::size_t x) const
    {
        return {members_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
    }
    std::span<const double> member_distances(std::size_t x) const
    {
        return {dists_.data() + offsets_[x], offsets_[x + 1] - offsets_[x]};
    }

private:
    double r_;
    std::size_t n_;
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> members_;
    std::vector<double> dists_;
    std::vector<double> masses_;
    std::vector<double> point_mass_;
};

struct Ball {
    std::vector<std::size_t> members;
    double mass = 0.0;
};

/// B_r(x) = {y : d(x, y) < r} and its measure.
template <MetricMeasureSpace S>
Ball ball(const S& space, std::size_t x, Radius r)
{
    require(x < space.size(), "unknown point index " + std::to_string(x));
    std::vector<std::pair<std::size_t, double>> tmp;
    space.ball_members(x, r.value(), tmp);
    Ball b;
    for (const auto& [y, d] : tmp) {
        b.members.push_back(y);
        b.mass += space.mass(y);
    }
    return b;
}

/// Pairs {x, y}, x < y, with d(x, y) within rel * r of r. Balls are open, so these
/// points sit exactly on the sphere and open/closed conventions would disagree.
inline std::vector<std::pair<std::size_t, std::size_t>> radius_collisions(const FiniteMMSpace& s, Radius r,
                                                                          double rel = 1e-12)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const double tol = rel * r.value();
    for (std::size_t x = 0; x < s.size(); ++x)
        for (std::size_t y = x + 1; y < s.size(); ++y)
            if (std::abs(s.distance(x, y) - r.value()) <= tol) out.emplace_back(x, y);
    return out;
}

namespace detail {
inline void check_field(const BallTable& t, std::span<const double> u, const char* name)
{
    require(u.size() == t.size(), std::string(name) + ": field length does not match point count");
}
} // namespace detail

/// A_r u(x): mean of u over B_r(x).
inline ScalarField average(const BallTable& t, std::span<const double> u)
{
    detail::check_field(t, u, "average");
    ScalarField out(t.size());
    for (std::size_t x = 0; x < t.size(); ++x) {
        double s = 0.0;
        for (const std::size_t y : t.members(x)) s += u[y] * t.point_mass(y);
        out[x] = s / t.ball_mass(x);
    }
    return out;
}

/// A_r* u(x) = sum over y in B_r(x) of u(y) m(y) / mu(B_r(y)).
inline ScalarField adjoint_average(const BallTable& t, std::span<const double> u)
{
    detail::check_field(t, u, "adjoint_average");
    ScalarField out(t.size());
    for (std::size_t x = 0; x < t.size(); ++x) {
        double s = 0.0;
        for (const std::size_t y : t.members(x)) s += u[y] * t.point_mass(y) / t.ball_mass(y);
        out[x] = s;
    }
    return out;
}

/// a_r = A_r* 1.
inline ScalarField adjoint_weight(const BallTable& t)
{
    return adjoint_average(t, ScalarField(t.size(), 1.0));
}

/// Delta_r u = (A_r u - u) / r^2.
inline ScalarField r_laplacian(const BallTable& t, std::span<const double> u)
{
    ScalarField a = average(t, u);
    const double r2 = t.radius() * t.radius();
    for (std::size_t x = 0; x < a.size(); ++x) a[x] = (a[x] - u[x]) / r2;
    return a;
}

/// Delta_r* u = (A_r* u - u) / r^2.
inline ScalarField adjoint_r_laplacian(const BallTable& t, std::span<const double> u)
{
    ScalarField a = adjoint_average(t, u);
    const double r2 = t.radius() * t.radius();
    for (std::size_t x = 0; x < a.size(); ++x) a[x] = (a[x] - u[x]) / r2;
    return a;
}

/// Symmetric mean value kernel k_r(x, y) for y in B_r(x); zero otherwise.
inline double mean_value_kernel(const BallTable& t, std::size_t x, std::size_t y)
{
    for (const std::size_t z : t.members(x))
        if (z == y) return 0.5 * (1.0 / t.ball_mass(x) + 1.0 / t.ball_mass(y));
    return 0.0;
}

/// Symmetrized r-laplacian: sum over B_r(x) of k_r(x, y) (u(y) - u(x)) m(y) / r^2.
inline ScalarField sym_r_laplacian(const BallTable& t, std::span<const double> u)
{
    detail::check_field(t, u, "sym_r_laplacian");
    ScalarField out(t.size());
    const double r2 = t.radius() * t.radius();
    for (std::size_t x = 0; x < t.size(); ++x) {
        const double inv_x = 1.0 / t.ball_mass(x);
        double s = 0.0;
        for (const std::size_t y : t.members(x))
            s += 0.5 * (inv_x + 1.0 / t.ball_mass(y)) * (u[y] - u[x]) * t.point_mass(y);
        out[x] = s / r2;
    }
    return out;
}

/// delta_r(x, y) = 1 - mu(B_r(x)) / mu(B_r(y)).
inline double delta_r(const BallTable& t, std::size_t x, std::size_t y)
{
    require(x < t.size() && y < t.size(), "delta_r: unknown point index");
    return 1.0 - t.ball_mass(x) / t.ball_mass(y);
}

/// e_r(u, v)(x) = 1/2 mean over B_r(x) of (u(y) - u(x))(v(y) - v(x)) / r^2.
inline ScalarField energy_density(const BallTable& t, std::span<const double> u, std::span<const double> v)
{
    detail::check_field(t, u, "energy_density");
    detail::check_field(t, v, "energy_density");
    ScalarField out(t.size());
    const double r2 = t.radius() * t.radius();
    for (std::size_t x = 0; x < t.size(); ++x) {
        double s = 0.0;
        for (const std::size_t y : t.members(x)) s += (u[y] - u[x]) * (v[y] - v[x]) * t.point_mass(y);
        out[x] = 0.5 * s / (t.ball_mass(x) * r2);
    }
    return out;
}

/// Sum of f * g * mass in index order.
inline double integrate(const BallTable& t, std::span<const double> f, std::span<const double> g)
{
    detail::check_field(t, f, "integrate");
    detail::check_field(t, g, "integrate");
    double s = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) s += f[x] * g[x] * t.point_mass(x);
    return s;
}

/// E_r(u, v) = integral of e_r(u, v).
inline double total_energy(const BallTable& t, std::span<const double> u, std::span<const double> v)
{
    const ScalarField e = energy_density(t, u, v);
    double s = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) s += e[x] * t.point_mass(x);
    return s;
}

/// Integral of phi * Delta_r u.
inline double weak_pairing(const BallTable& t, std::span<const double> phi, std::span<const double> u)
{
    return integrate(t, phi, r_laplacian(t, u));
}

/// Integral of phi * (Delta_r - sym Delta_r) u, evaluated through the delta_r form:
/// 1/2 sum_x phi(x) m(x) mean_{B_r(x)} (delta_r(x, y)/r) ((u(y) - u(x))/r).
inline double sym_defect_pairing(const BallTable& t, std::span<const double> phi, std::span<const double> u)
{
    detail::check_field(t, phi, "sym_defect_pairing");
    detail::check_field(t, u, "sym_defect_pairing");
    const double r2 = t.radius() * t.radius();
    double total = 0.0;
    for (std::size_t x = 0; x < t.size(); ++x) {
        if (phi[x] == 0.0) continue;
        double s = 0.0;
        for (const std::size_t y : t.members(x))
            s += (1.0 - t.ball_mass(x) / t.ball_mass(y)) * (u[y] - u[x]) * t.point_mass(y);
        total += phi[x] * t.point_mass(x) * 0.5 * s / (t.ball_mass(x) * r2);
    }
    return total;
}

// Convenience overloads on a space, building the ball table on the fly.
template <MetricMeasureSpace S>
ScalarField average(const S& s, std::span<const double> u, Radius r) { return average(BallTable(s, r), u); }
template <MetricMeasureSpace S>
ScalarField adjoint_average(const S& s, std::span<const double> u, Radius r) { return adjoint_average(BallTable(s, r), u); }
template <MetricMeasureSpace S>
ScalarField r_laplacian(const S& s, std::span<const double> u, Radius r) { return r_laplacian(BallTable(s, r), u); }
template <MetricMeasureSpace S>
ScalarField adjoint_r_laplacian(const S& s, std::span<const double> u, Radius r) { return adjoint_r_laplacian(BallTable(s, r), u); }
template <MetricMeasureSpace S>
ScalarField sym_r_laplacian(const S& s, std::span<const double> u, Radius r) { return sym_r_laplacian(BallTable(s, r), u); }
template <MetricMeasureSpace S>
double delta_r(const S& s, std::size_t x, std::size_t y, Radius r) { return delta_r(BallTable(s, r), x, y); }
template <MetricMeasureSpace S>
ScalarField energy_density(const S& s, std::span<const double> u, std::span<const double> v, Radius r) { return energy_density(BallTable(s, r), u, v); }
template <MetricMeasureSpace S>
double total_energy(const S& s, std::span<const double> u, std::span<const double> v, Radius r) { return total_energy(BallTable(s, r), u, v); }
template <MetricMeasureSpace S>
double weak_pairing(const S& s, std::span<const double> phi, std::span<const double> u, Radius r) { return weak_pairing(BallTable(s, r), phi, u); }

} // namespace amv
