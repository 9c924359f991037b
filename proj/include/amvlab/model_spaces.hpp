#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "carnot.hpp"
#include "errors.hpp"
#include "quadrature.hpp"

namespace amv {

/// Volume of the unit ball in R^N, valid for real N >= 0.
inline double unit_ball_volume(double N) { return std::pow(std::numbers::pi, N / 2.0) / std::tgamma(N / 2.0 + 1.0); }

/// Point of a flat cone in polar coordinates; rho = 0 is the apex for every angle.
struct ConePoint {
    double rho = 0.0;
    double angle = 0.0;
};

/// Geodesic distance on the flat cone of total angle theta_c in (0, 2 pi].
inline double cone_distance(double theta_c, ConePoint p, ConePoint q)
{
    require(theta_c > 0.0 && theta_c <= 2.0 * std::numbers::pi + 1e-15, "cone angle must lie in (0, 2pi]");
    require(p.rho >= 0.0 && q.rho >= 0.0, "cone points need rho >= 0");
    const double raw = std::fmod(std::abs(p.angle - q.angle), theta_c);
    const double delta = std::min(raw, theta_c - raw);
    if (delta > std::numbers::pi) return p.rho + q.rho;
    const double d2 = p.rho * p.rho + q.rho * q.rho - 2.0 * p.rho * q.rho * std::cos(delta);
    return std::sqrt(std::max(0.0, d2));
}

enum class VolumeMethod { exact, quadrature, monte_carlo };

inline const char* to_string(VolumeMethod m)
{
    switch (m) {
    case VolumeMethod::exact: return "exact";
    case VolumeMethod::quadrature: return "quadrature";
    case VolumeMethod::monte_carlo: return "monte_carlo";
    }
    return "?";
}

struct Volume {
    double value;
    VolumeMethod method;
};

/// Continuum model space. Points use native coordinates:
///   euclidean(n), half_space(n): Cartesian, half-space = {x_n >= 0};
///   flat_cone: (rho, angle);  carnot: flat (z1, z2).
class ModelSpace {
public:
    enum class Kind { euclidean, half_space, flat_cone, carnot };

    static ModelSpace euclidean(int n)
    {
        require(n >= 1, "euclidean: dimension must be positive");
        ModelSpace s(Kind::euclidean);
        s.n_ = n;
        return s;
    }
    static ModelSpace half_space(int n)
    {
        require(n >= 1, "half_space: dimension must be positive");
        ModelSpace s(Kind::half_space);
        s.n_ = n;
        return s;
    }
    static ModelSpace flat_cone(double theta_c)
    {
        require(theta_c > 0.0 && theta_c <= 2.0 * std::numbers::pi + 1e-15, "flat_cone: angle must lie in (0, 2pi]");
        ModelSpace s(Kind::flat_cone);
        s.n_ = 2;
        s.theta_ = std::min(theta_c, 2.0 * std::numbers::pi);
        return s;
    }
    static ModelSpace carnot(CarnotStep2 g, Gauge gauge)
    {
        ModelSpace s(Kind::carnot);
        s.n_ = g.dim();
        s.group_ = std::make_shared<const CarnotStep2>(std::move(g));
        s.gauge_ = std::make_shared<const Gauge>(std::move(gauge));
        return s;
    }

    Kind kind() const noexcept { return kind_; }
    /// Number of native coordinates.
    int coord_dim() const noexcept { return n_; }
    /// Topological dimension (also the Hausdorff dimension for the Riemannian kinds).
    int topological_dim() const noexcept { return n_; }
    double cone_angle() const
    {
        require(kind_ == Kind::flat_cone, "cone_angle: not a cone");
        return theta_;
    }
    const CarnotStep2& group() const
    {
        require(kind_ == Kind::carnot, "group: not a Carnot space");
        return *group_;
    }
    const Gauge& gauge() const
    {
        require(kind_ == Kind::carnot, "gauge: not a Carnot space");
        return *gauge_;
    }

    void check_point(const Eigen::VectorXd& x) const
    {
        require(x.size() == n_, "point has " + std::to_string(x.size()) + " coordinates, space expects " + std::to_string(n_));
        require(x.allFinite(), "point coordinates must be finite");
        if (kind_ == Kind::half_space) require(x[n_ - 1] >= 0.0, "point lies outside the half-space");
        if (kind_ == Kind::flat_cone) require(x[0] >= 0.0, "cone point needs rho >= 0");
    }

    double distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const
    {
        switch (kind_) {
        case Kind::euclidean:
        case Kind::half_space: return (x - y).norm();
        case Kind::flat_cone: return cone_distance(theta_, {x[0], x[1]}, {y[0], y[1]});
        case Kind::carnot: {
            const int v1 = group_->v1();
            return gauge_distance(*group_, *gauge_, GPoint::from_flat(x, v1), GPoint::from_flat(y, v1));
        }
        }
        return 0.0;
    }

    std::string spec() const
    {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
        case Kind::euclidean: os << "euclidean:" << n_; break;
        case Kind::half_space: os << "half:" << n_; break;
        case Kind::flat_cone: os << "cone:" << theta_; break;
        case Kind::carnot: os << "carnot:v1=" << group_->v1() << ",v2=" << group_->v2() << ':' << gauge_->name(); break;
        }
        return os.str();
    }

private:
    explicit ModelSpace(Kind k) : kind_(k) {}

    Kind kind_;
    int n_ = 0;
    double theta_ = 2.0 * std::numbers::pi;
    std::shared_ptr<const CarnotStep2> group_;
    std::shared_ptr<const Gauge> gauge_;
};

/// Parses "3", "pi", "2pi", "pi/2", "3pi/2", "1.5pi", "0.75".
inline double parse_angle(const std::string& s)
{
    const auto p = s.find("pi");
    try {
        if (p == std::string::npos) return std::stod(s);
        double num = 1.0;
        if (p > 0) num = std::stod(s.substr(0, p));
        double den = 1.0;
        const std::string rest = s.substr(p + 2);
        if (!rest.empty()) {
            require(rest[0] == '/', "bad angle '" + s + "'");
            den = std::stod(rest.substr(1));
        }
        return num * std::numbers::pi / den;
    } catch (const std::logic_error&) {
        throw InputError("bad angle '" + s + "'");
    }
}

namespace detail {
inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline int parse_int(const std::string& s, const std::string& what)
{
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw InputError("");
        return v;
    } catch (const std::exception&) {
        throw InputError("bad " + what + " '" + s + "'");
    }
}
} // namespace detail

/// Carnot presets: "heisenbergN" / "heisenberg:N" / "hN" (H^N), "heisenberg" (H^1), or "@path" (text file).
inline CarnotStep2 parse_carnot_preset(std::string s)
{
    if (const auto c = s.find(':'); c != std::string::npos && s[0] != '@') s.erase(c, 1);
    if (!s.empty() && s[0] == '@') {
        std::ifstream in(s.substr(1));
        require(static_cast<bool>(in), "cannot open carnot file '" + s.substr(1) + "'");
        return read_carnot(in);
    }
    for (const std::string prefix : {"heisenberg", "h"}) {
        if (s.rfind(prefix, 0) == 0) {
            const std::string rest = s.substr(prefix.size());
            return CarnotStep2::heisenberg(rest.empty() ? 1 : detail::parse_int(rest, "heisenberg index"));
        }
    }
    throw InputError("unknown carnot preset '" + s + "'");
}

/// "koranyi" or "scaled_koranyi:<beta>" / "scaled:<beta>" / "folland" (beta = 16).
inline Gauge parse_gauge(const std::vector<std::string>& parts)
{
    require(!parts.empty(), "missing gauge");
    if (parts[0] == "koranyi") return Gauge::koranyi();
    if (parts[0] == "folland") return Gauge::scaled_koranyi(16.0);
    if (parts[0] == "scaled_koranyi" || parts[0] == "scaled") {
        require(parts.size() >= 2, "scaled gauge needs beta");
        return Gauge::scaled_koranyi(std::stod(parts[1]));
    }
    throw InputError("unknown gauge '" + parts[0] + "'");
}

/// `euclidean:n`, `half:n`, `cone:theta`, `carnot:preset:gauge[:beta]`.
inline ModelSpace parse_model_space(const std::string& spec)
{
    const auto parts = detail::split(spec, ':');
    require(parts.size() >= 2, "bad space spec '" + spec + "'");
    const std::string& kind = parts[0];
    if (kind == "euclidean") return ModelSpace::euclidean(detail::parse_int(parts[1], "dimension"));
    if (kind == "half") return ModelSpace::half_space(detail::parse_int(parts[1], "dimension"));
    if (kind == "cone") return ModelSpace::flat_cone(parse_angle(parts[1]));
    if (kind == "carnot") {
        require(parts.size() >= 3, "carnot spec needs preset and gauge");
        // "heisenberg:N" spans two fields.
        std::size_t g = 2;
        std::string preset = parts[1];
        if (parts.size() >= 4 && !parts[2].empty() && parts[2].find_first_not_of("0123456789") == std::string::npos) {
            preset += ":" + parts[2];
            g = 3;
        }
        return ModelSpace::carnot(parse_carnot_preset(preset), parse_gauge({parts.begin() + static_cast<std::ptrdiff_t>(g), parts.end()}));
    }
    throw InputError("unknown space kind '" + kind + "'");
}

namespace detail {

/// Angular measure of {angle : d((rho, 0), (rho', angle)) < r} on the cone.
inline double cone_angular_measure(double theta_c, double rho, double rho2, double r)
{
    if (rho + rho2 < r) return theta_c;
    if (rho == 0.0 || rho2 == 0.0) return (rho + rho2 < r) ? theta_c : 0.0;
    const double c = (rho * rho + rho2 * rho2 - r * r) / (2.0 * rho * rho2);
    const double delta = c >= 1.0 ? 0.0 : (c <= -1.0 ? std::numbers::pi : std::acos(c));
    return 2.0 * std::min(delta, 0.5 * theta_c);
}

/// Sorted breakpoints in rho' of the cone ball integrand on [0, rho + r].
inline std::vector<double> cone_breakpoints(double theta_c, double rho, double r)
{
    std::vector<double> b{0.0, rho + r, std::abs(rho - r)};
    const double half = 0.5 * theta_c;
    if (half < std::numbers::pi) {
        const double disc = r * r - rho * rho * std::sin(half) * std::sin(half);
        if (disc >= 0.0) {
            const double c = rho * std::cos(half);
            b.push_back(c - std::sqrt(disc));
            b.push_back(c + std::sqrt(disc));
        }
    }
    std::vector<double> out;
    for (const double v : b)
        if (v >= 0.0 && v <= rho + r) out.push_back(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double a, double c) { return std::abs(a - c) < 1e-15; }), out.end());
    return out;
}

inline double cone_ball_area(double theta_c, double rho, double r, int n)
{
    if (rho == 0.0) return 0.5 * theta_c * r * r;
    if (r <= rho * std::sin(0.5 * std::min(theta_c, std::numbers::pi))) return std::numbers::pi * r * r;
    const auto br = cone_breakpoints(theta_c, rho, r);
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
        area += quad::integrate_clustered(
            [&](double t) { return t * cone_angular_measure(theta_c, rho, t, r); }, br[i], br[i + 1], n);
    return area;
}

/// Volume of B_r(x) in the half-space {x_n >= 0} when x_n = h.
inline double half_ball_volume(int n, double h, double r, int nodes)
{
    if (h >= r) return unit_ball_volume(n) * std::pow(r, n);
    const double theta0 = std::asin(-h / r);
    const double w = unit_ball_volume(n - 1);
    return quad::integrate([&](double th) { return w * std::pow(r * std::cos(th), n - 1) * r * std::cos(th); }, theta0,
                           0.5 * std::numbers::pi, nodes);
}

template <class F>
double converged(F&& f, int n, const std::string& what)
{
    const double a = f(n);
    const double b = f(2 * n);
    if (std::abs(a - b) > 1e-10 * std::max(1.0, std::abs(b)))
        throw NumericError(what + ": quadrature did not converge (n=" + std::to_string(n) + ": " + std::to_string(a) +
                           ", n=" + std::to_string(2 * n) + ": " + std::to_string(b) + ")");
    return b;
}

} // namespace detail

/// Volume of the unit gauge ball of a Carnot group by nested ball quadrature; cached.
inline double carnot_unit_ball_volume(const CarnotStep2& g, const Gauge& gauge, int nodes = 24)
{
    require(gauge.has_closed_form(), "carnot_unit_ball_volume: plug-in gauges need Monte Carlo");
    static std::mutex mutex;
    static std::map<std::tuple<int, int, double, int>, double> cache;
    const auto key = std::make_tuple(g.v1(), g.v2(), gauge.beta(), nodes);
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(std::max(g.v1(), g.v2()));
    auto vol = [&](int n) {
        return quad::integrate_ball(g.v1(), zero.data(), 1.0, n, [&](const double* z1) {
            double s2 = 0;
            for (int i = 0; i < g.v1(); ++i) s2 += z1[i] * z1[i];
            const double R2 = gauge.z2_section_radius(1.0, std::sqrt(s2));
            return unit_ball_volume(g.v2()) * std::pow(R2, g.v2());
        });
    };
    const double v = detail::converged(vol, nodes, "carnot unit ball volume");
    std::lock_guard lock(mutex);
    cache[key] = v;
    return v;
}

/// mu(B_r(x)).
inline Volume ball_volume(const ModelSpace& s, const Eigen::VectorXd& x, double r, int nodes = 48)
{
    require(r > 0.0, "ball_volume: radius must be positive");
    s.check_point(x);
    switch (s.kind()) {
    case ModelSpace::Kind::euclidean: return {unit_ball_volume(s.coord_dim()) * std::pow(r, s.coord_dim()), VolumeMethod::exact};
    case ModelSpace::Kind::half_space: {
        const int n = s.coord_dim();
        const double h = x[n - 1];
        if (h >= r) return {unit_ball_volume(n) * std::pow(r, n), VolumeMethod::exact};
        return {detail::converged([&](int k) { return detail::half_ball_volume(n, h, r, k); }, nodes, "half-space ball"),
                VolumeMethod::quadrature};
    }
    case ModelSpace::Kind::flat_cone: {
        if (x[0] == 0.0) return {0.5 * s.cone_angle() * r * r, VolumeMethod::exact};
        return {detail::converged([&](int k) { return detail::cone_ball_area(s.cone_angle(), x[0], r, k); }, nodes,
                                  "cone ball"),
                VolumeMethod::quadrature};
    }
    case ModelSpace::Kind::carnot:
        return {carnot_unit_ball_volume(s.group(), s.gauge()) * std::pow(r, s.group().homogeneous_dim()),
                VolumeMethod::quadrature};
    }
    return {0.0, VolumeMethod::exact};
}

/// theta_r(x) = vol(B_r(x)) / (omega_N r^N) with N the topological dimension.
/// Not offered on Carnot spaces, where the normalization is ambiguous.
inline double theta_r(const ModelSpace& s, const Eigen::VectorXd& x, double r)
{
    require(s.kind() != ModelSpace::Kind::carnot, "theta_r is not defined for carnot spaces");
    if (s.kind() == ModelSpace::Kind::euclidean) {
        require(r > 0.0, "theta_r: radius must be positive");
        return 1.0;
    }
    const int N = s.topological_dim();
    return ball_volume(s, x, r).value / (unit_ball_volume(N) * std::pow(r, N));
}

/// Region over which mm-boundary mass is integrated.
struct Region {
    enum class Kind { ball, boundary_strip };
    Kind kind = Kind::ball;
    Eigen::VectorXd center;    ///< ball: native coordinates
    double radius = 1.0;       ///< ball
    double lo = 0.0, hi = 1.0; ///< boundary_strip: x_1 in [lo, hi], all heights (half_space(2))

    static Region ball(Eigen::VectorXd c, double R) { return {Kind::ball, std::move(c), R, 0, 0}; }
    static Region strip(double a, double b) { return {Kind::boundary_strip, {}, 0, a, b}; }
};

/// |mu_r|(U) = integral over U of |1 - theta_r(x)| / r.
inline double mm_boundary_mass(const ModelSpace& s, const Region& U, double r, int nodes = 48)
{
    require(r > 0.0, "mm_boundary_mass: radius must be positive");
    switch (s.kind()) {
    case ModelSpace::Kind::euclidean: return 0.0;
    case ModelSpace::Kind::carnot: throw InputError("mm_boundary_mass is not defined for carnot spaces");
    case ModelSpace::Kind::half_space: {
        const int n = s.coord_dim();
        std::function<double(double)> section;   // (n-1)-measure of U at height h
        std::vector<double> br{0.0, r};
        if (U.kind == Region::Kind::boundary_strip) {
            require(n == 2, "boundary strips are only defined for half:2");
            require(U.hi > U.lo, "boundary strip needs lo < hi");
            section = [&](double) { return U.hi - U.lo; };
        } else {
            require(U.center.size() == n, "region center has the wrong dimension");
            const double c = U.center[n - 1], R = U.radius;
            section = [&, c, R](double h) {
                const double d = R * R - (h - c) * (h - c);
                return d > 0.0 ? unit_ball_volume(n - 1) * std::pow(d, 0.5 * (n - 1)) : 0.0;
            };
            for (const double b : {c - R, c + R})
                if (b > 0.0 && b < r) br.push_back(b);
        }
        std::sort(br.begin(), br.end());
        const double omega = unit_ball_volume(n) * std::pow(r, n);
        auto mass = [&](int k) {
            double total = 0.0;
            for (std::size_t i = 0; i + 1 < br.size(); ++i)
                total += quad::integrate_clustered(
                    [&](double h) {
                        const double th = detail::half_ball_volume(n, h, r, k) / omega;
                        return std::abs(1.0 - th) / r * section(h);
                    },
                    br[i], br[i + 1], k);
            return total;
        };
        return detail::converged(mass, nodes, "half-space mm-boundary mass");
    }
    case ModelSpace::Kind::flat_cone: {
        require(U.kind == Region::Kind::ball && U.center.size() == 2 && U.center[0] == 0.0,
                "cone mm-boundary regions must be balls centred at the apex");
        const double theta_c = s.cone_angle();
        const double R = U.radius;
        std::vector<double> br{0.0, R};
        for (double b : {r, r / std::sin(0.5 * std::min(theta_c, std::numbers::pi))})
            if (b < R) br.push_back(b);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        auto mass = [&](int k) {
            double total = 0.0;
            for (std::size_t i = 0; i + 1 < br.size(); ++i)
                total += quad::integrate_clustered(
                    [&](double rho) {
                        const double th = detail::cone_ball_area(theta_c, rho, r, k) / (std::numbers::pi * r * r);
                        return std::abs(1.0 - th) / r * theta_c * rho;
                    },
                    br[i], br[i + 1], k);
            return total;
        };
        return detail::converged(mass, nodes, "cone mm-boundary mass");
    }
    }
    return 0.0;
}

/// s_{K,N}(t): sin / linear / sinh profile of the (K, N) model space.
inline double s_KN(double K, double N, double t)
{
    if (K == 0.0 || N == 1.0) return t;
    const double k = std::sqrt(std::abs(K) / (N - 1.0));
    return K > 0.0 ? std::sin(k * t) / k : std::sinh(k * t) / k;
}

/// v_{K,N}(r) = N omega_N integral_0^r s_{K,N}(t)^(N-1) dt.
/// Integer N uses the reduction formula for integrals of sin^m / sinh^m; other N use quadrature.
inline double v_KN(double K, double N, double r)
{
    require(N >= 1.0, "v_KN: N must be at least 1");
    require(r >= 0.0, "v_KN: r must be nonnegative");
    if (K > 0.0 && N > 1.0) require(r < std::numbers::pi * std::sqrt((N - 1.0) / K), "v_KN: r outside the domain for K > 0");
    const double omega = unit_ball_volume(N);
    if (K == 0.0 || N == 1.0) return omega * std::pow(r, N);
    const double k = std::sqrt(std::abs(K) / (N - 1.0));
    if (N == std::floor(N) && N <= 64) {
        // I_m = integral_0^r f(kt)^m dt with f = sin or sinh:
        //   sin:  I_m = -f^{m-1} cos /(m k) + (m-1)/m I_{m-2}
        //   sinh: I_m =  f^{m-1} cosh/(m k) - (m-1)/m I_{m-2}
        const int m = static_cast<int>(N) - 1;
        const bool pos = K > 0.0;
        const double x = k * r;
        const double f = pos ? std::sin(x) : std::sinh(x);
        const double g = pos ? std::cos(x) : std::cosh(x);
        double i_prev = r;                                       // I_0
        double i_cur = pos ? (1.0 - g) / k : (g - 1.0) / k;      // I_1
        if (m == 0) i_cur = i_prev;
        for (int j = 2; j <= m; ++j) {
            const double next = pos ? -std::pow(f, j - 1) * g / (j * k) + (j - 1.0) / j * i_prev
                                    : std::pow(f, j - 1) * g / (j * k) - (j - 1.0) / j * i_prev;
            i_prev = i_cur;
            i_cur = next;
        }
        return N * omega * i_cur / std::pow(k, m);
    }
    return N * omega * quad::integrate([&](double t) { return std::pow(s_KN(K, N, t), N - 1.0); }, 0.0, r, 64);
}

/// vol(B_r(x)) / v_{K,N}(r), nonincreasing in r on RCD(K, N) spaces.
inline double bishop_gromov_ratio(const ModelSpace& s, const Eigen::VectorXd& x, double r, double K = 0.0,
                                  std::optional<double> N = std::nullopt)
{
    return ball_volume(s, x, r).value / v_KN(K, N.value_or(s.topological_dim()), r);
}

} // namespace amv
