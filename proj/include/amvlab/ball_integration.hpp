#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "model_spaces.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "random.hpp"

namespace amv {

/// A single (x, r) integral estimate. std_error is 0 exactly for deterministic quadrature.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t count = 0;     ///< samples or quadrature nodes
    std::string method;          ///< "mc" or "grid"
    double acceptance = 1.0;     ///< rejection acceptance rate (mc only)
};

inline void to_json(nlohmann::json& j, const Estimate& e)
{
    j = nlohmann::json{{"value", e.value}, {"std_error", e.std_error}, {"method", e.method}, {"count", e.count}};
    if (e.method == "mc") j["acceptance"] = e.acceptance;
}

inline void from_json(const nlohmann::json& j, Estimate& e)
{
    e.value = j.at("value").get<double>();
    e.std_error = j.at("std_error").get<double>();
    e.method = j.at("method").get<std::string>();
    e.count = j.value("count", std::uint64_t{0});
    e.acceptance = j.value("acceptance", 1.0);
}

struct MonteCarlo {
    std::uint64_t samples = 100000;
    SeedSpec seed{};
};

struct Grid {
    int nodes = 24;   ///< Gauss nodes per dimension
};

using Scheme = std::variant<MonteCarlo, Grid>;

/// "mc:<n>:<seed>" or "grid:<nodes>".
inline Scheme parse_scheme(const std::string& s)
{
    const auto parts = detail::split(s, ':');
    try {
        if (parts.size() == 3 && parts[0] == "mc") {
            MonteCarlo mc;
            mc.samples = std::stoull(parts[1]);
            mc.seed.seed = std::stoull(parts[2]);
            require(mc.samples >= 1, "mc scheme needs at least one sample");
            return mc;
        }
        if (parts.size() == 2 && parts[0] == "grid") {
            Grid g{detail::parse_int(parts[1], "grid resolution")};
            require(g.nodes >= 1, "grid resolution must be positive");
            return g;
        }
    } catch (const std::logic_error&) {
    }
    throw InputError("bad scheme '" + s + "' (expected mc:n:seed or grid:res)");
}

inline std::string scheme_string(const Scheme& s)
{
    std::ostringstream os;
    if (const auto* mc = std::get_if<MonteCarlo>(&s)) os << "mc:" << mc->samples << ':' << mc->seed.seed;
    else os << "grid:" << std::get<Grid>(s).nodes;
    return os.str();
}

/// Callable on native coordinates of a model space.
using PointFunction = std::function<double(const Eigen::VectorXd&)>;

namespace detail {

constexpr std::uint64_t kChunk = 1u << 15;
constexpr double kMinAcceptance = 1e-3;

/// Draws one proposal for B_r(x); returns true if accepted. `out` receives native coordinates.
class BallSampler {
public:
    BallSampler(const ModelSpace& s, const Eigen::VectorXd& x, double r) : s_(s), x_(x), r_(r)
    {
        s.check_point(x);
        require(r > 0.0, "sample_ball: radius must be positive");
        local_.resize(s.coord_dim());
        if (s.kind() == ModelSpace::Kind::flat_cone) {
            const double rho = x[0];
            rho_lo_ = std::max(0.0, rho - r);
            rho_hi_ = rho + r;
            half_width_ = 0.5 * s.cone_angle();
            if (rho > r) half_width_ = std::min(half_width_, std::asin(r / rho));
        }
        if (s.kind() == ModelSpace::Kind::carnot) {
            gx_ = GPoint::from_flat(x, s.group().v1());
            z2_box_ = s.gauge().z2_bound(r);
        }
    }

    bool propose(CounterRng& rng, Eigen::VectorXd& out)
    {
        const int n = s_.coord_dim();
        switch (s_.kind()) {
        case ModelSpace::Kind::euclidean:
        case ModelSpace::Kind::half_space: {
            double d2 = 0.0;
            for (int i = 0; i < n; ++i) {
                double lo = -r_;
                if (s_.kind() == ModelSpace::Kind::half_space && i == n - 1) lo = std::max(-r_, -x_[i]);
                local_[i] = rng.uniform(lo, r_);
                d2 += local_[i] * local_[i];
            }
            out = x_ + local_;
            if (s_.kind() == ModelSpace::Kind::half_space) out[n - 1] = std::max(out[n - 1], 0.0);
            return d2 < r_ * r_;
        }
        case ModelSpace::Kind::flat_cone: {
            const double u = rng.uniform();
            const double rho = std::sqrt(rho_lo_ * rho_lo_ + u * (rho_hi_ * rho_hi_ - rho_lo_ * rho_lo_));
            const double off = rng.uniform(-half_width_, half_width_);
            double ang = std::fmod(x_[1] + off, s_.cone_angle());
            if (ang < 0.0) ang += s_.cone_angle();
            out.resize(2);
            out << rho, ang;
            return s_.distance(x_, out) < r_;
        }
        case ModelSpace::Kind::carnot: {
            const CarnotStep2& g = s_.group();
            // z1 uniform in the v1-ball, z2 uniform in the box |z2_k| <= bound
            GPoint z{Eigen::VectorXd(g.v1()), Eigen::VectorXd(g.v2())};
            double norm2 = 0.0;
            for (int i = 0; i < g.v1(); ++i) {
                z.z1[i] = rng.normal();
                norm2 += z.z1[i] * z.z1[i];
            }
            const double rad = r_ * std::pow(rng.uniform(), 1.0 / g.v1());
            z.z1 *= rad / std::sqrt(norm2);
            for (int k = 0; k < g.v2(); ++k) z.z2[k] = rng.uniform(-z2_box_, z2_box_);
            if (!(s_.gauge().value(z) < r_)) return false;
            out = g.multiply(gx_, z).flat();
            return true;
        }
        }
        return false;
    }

private:
    const ModelSpace& s_;
    Eigen::VectorXd x_;
    double r_;
    Eigen::VectorXd local_;
    double rho_lo_ = 0, rho_hi_ = 0, half_width_ = 0;
    GPoint gx_;
    double z2_box_ = 0;
};

struct ChunkSums {
    std::uint64_t accepted = 0;
    std::uint64_t proposed = 0;
    Eigen::VectorXd sum;
    Eigen::VectorXd sumsq;
};

/// Monte Carlo means of the m-vector valued f(y) - f0 over B_r(x), chunked by substream.
template <class F>
std::vector<Estimate> mc_means(const ModelSpace& s, const Eigen::VectorXd& x, double r, const MonteCarlo& mc, int m,
                               F&& f)
{
    const std::uint64_t chunks = (mc.samples + kChunk - 1) / kChunk;
    std::vector<ChunkSums> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const std::uint64_t quota = std::min<std::uint64_t>(kChunk, mc.samples - c * kChunk);
        CounterRng rng(mc.seed, c);
        BallSampler sampler(s, x, r);
        ChunkSums& p = parts[c];
        p.sum = Eigen::VectorXd::Zero(m);
        p.sumsq = Eigen::VectorXd::Zero(m);
        Eigen::VectorXd y, val(m);
        while (p.accepted < quota) {
            ++p.proposed;
            if (p.proposed > 4096 && static_cast<double>(p.accepted) < kMinAcceptance * static_cast<double>(p.proposed))
                throw NumericError("sample_ball: acceptance rate below 1e-3; check the gauge envelope");
            if (!sampler.propose(rng, y)) continue;
            f(y, val);
            p.sum += val;
            p.sumsq += val.cwiseProduct(val);
            ++p.accepted;
        }
    });
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sumsq = Eigen::VectorXd::Zero(m);
    std::uint64_t acc = 0, prop = 0;
    for (const auto& p : parts) {
        sum += p.sum;
        sumsq += p.sumsq;
        acc += p.accepted;
        prop += p.proposed;
    }
    std::vector<Estimate> out(static_cast<std::size_t>(m));
    const double n = static_cast<double>(acc);
    for (int k = 0; k < m; ++k) {
        const double mean = sum[k] / n;
        const double var = n > 1 ? std::max(0.0, (sumsq[k] - n * mean * mean) / (n - 1.0)) : 0.0;
        out[k] = {mean, std::sqrt(var / n), acc, "mc", static_cast<double>(acc) / static_cast<double>(prop)};
    }
    return out;
}

/// Quadrature of the m-vector valued f over B_r(x) divided by the quadrature of 1.
template <class F>
std::vector<Estimate> grid_means(const ModelSpace& s, const Eigen::VectorXd& x, double r, const Grid& grid, int m, F&& f)
{
    s.check_point(x);
    require(r > 0.0, "radius must be positive");
    const int nodes = grid.nodes;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m), val(m), y(s.coord_dim());
    double vol = 0.0;
    std::uint64_t count = 0;
    auto add = [&](double w) {
        f(y, val);
        acc += w * val;
        vol += w;
        ++count;
    };
    const quad::Rule& rule = quad::gauss_legendre(nodes);

    switch (s.kind()) {
    case ModelSpace::Kind::euclidean: {
        // same slicing as quad::integrate_ball, carrying the node weight down the recursion
        const int n = s.coord_dim();
        std::vector<double> c(x.data(), x.data() + n);
        std::vector<double> yy(static_cast<std::size_t>(n));
        auto rec = [&](auto&& self, int k, double rho, double w) -> void {
            if (k == n) {
                for (int i = 0; i < n; ++i) y[i] = yy[static_cast<std::size_t>(i)];
                add(w);
                return;
            }
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double th = 0.5 * std::numbers::pi * rule.nodes[i];
                const double ct = std::cos(th);
                yy[static_cast<std::size_t>(k)] = c[static_cast<std::size_t>(k)] + rho * std::sin(th);
                self(self, k + 1, rho * ct, w * rule.weights[i] * 0.5 * std::numbers::pi * rho * ct);
            }
        };
        rec(rec, 0, r, 1.0);
        break;
    }
    case ModelSpace::Kind::half_space: {
        const int n = s.coord_dim();
        const double h = x[n - 1];
        const double th0 = h >= r ? -0.5 * std::numbers::pi : std::asin(-h / r);
        const double half = 0.5 * (0.5 * std::numbers::pi - th0), mid = 0.5 * (0.5 * std::numbers::pi + th0);
        std::vector<double> yy(static_cast<std::size_t>(n));
        auto rec = [&](auto&& self, int k, double rho, double w) -> void {
            if (k == n - 1) {
                for (int i = 0; i < n; ++i) y[i] = yy[static_cast<std::size_t>(i)];
                y[n - 1] = std::max(0.0, y[n - 1]);
                add(w);
                return;
            }
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double th = 0.5 * std::numbers::pi * rule.nodes[i];
                const double ct = std::cos(th);
                yy[static_cast<std::size_t>(k)] = x[k] + rho * std::sin(th);
                self(self, k + 1, rho * ct, w * rule.weights[i] * 0.5 * std::numbers::pi * rho * ct);
            }
        };
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double th = mid + half * rule.nodes[i];
            yy[static_cast<std::size_t>(n - 1)] = h + r * std::sin(th);
            rec(rec, 0, r * std::cos(th), rule.weights[i] * half * r * std::cos(th));
        }
        break;
    }
    case ModelSpace::Kind::flat_cone: {
        const double theta_c = s.cone_angle();
        const double rho = x[0];
        if (rho == 0.0) {
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double t = 0.5 * r * (1.0 + rule.nodes[i]);
                for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
                    y << t, 0.5 * theta_c * (1.0 + rule.nodes[j]);
                    add(rule.weights[i] * 0.5 * r * t * rule.weights[j] * 0.5 * theta_c);
                }
            }
            break;
        }
        const auto br = detail::cone_breakpoints(theta_c, rho, r);
        for (std::size_t p = 0; p + 1 < br.size(); ++p) {
            const double a = br[p], len = br[p + 1] - br[p];
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double t = 0.5 * std::numbers::pi * (1.0 + rule.nodes[i]);
                const double rho2 = a + 0.5 * len * (1.0 - std::cos(t));
                const double jac = 0.5 * len * std::sin(t) * 0.5 * std::numbers::pi * rule.weights[i];
                const double meas = detail::cone_angular_measure(theta_c, rho, rho2, r);
                if (meas <= 0.0 || jac == 0.0) continue;
                for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
                    double ang = std::fmod(x[1] + 0.5 * meas * rule.nodes[j], theta_c);
                    if (ang < 0.0) ang += theta_c;
                    y << rho2, ang;
                    add(jac * rho2 * rule.weights[j] * 0.5 * meas);
                }
            }
        }
        break;
    }
    case ModelSpace::Kind::carnot: {
        const CarnotStep2& g = s.group();
        const Gauge& gauge = s.gauge();
        require(gauge.has_closed_form(), "grid scheme needs a closed-form gauge; use mc for plug-ins");
        const int v1 = g.v1(), v2 = g.v2();
        const GPoint gx = GPoint::from_flat(x, v1);
        GPoint z{Eigen::VectorXd(v1), Eigen::VectorXd(v2)};
        auto rec2 = [&](auto&& self, int k, double rho, double w) -> void {
            if (k == v2) {
                y = g.multiply(gx, z).flat();
                add(w);
                return;
            }
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double th = 0.5 * std::numbers::pi * rule.nodes[i];
                const double ct = std::cos(th);
                z.z2[k] = rho * std::sin(th);
                self(self, k + 1, rho * ct, w * rule.weights[i] * 0.5 * std::numbers::pi * rho * ct);
            }
        };
        auto rec1 = [&](auto&& self, int k, double rho, double w) -> void {
            if (k == v1) {
                rec2(rec2, 0, gauge.z2_section_radius(r, z.z1.norm()), w);
                return;
            }
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                const double th = 0.5 * std::numbers::pi * rule.nodes[i];
                const double ct = std::cos(th);
                z.z1[k] = rho * std::sin(th);
                self(self, k + 1, rho * ct, w * rule.weights[i] * 0.5 * std::numbers::pi * rho * ct);
            }
        };
        rec1(rec1, 0, r, 1.0);
        break;
    }
    }
    std::vector<Estimate> out(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) out[k] = {acc[k] / vol, 0.0, count, "grid", 1.0};
    return out;
}

template <class F>
std::vector<Estimate> ball_means(const ModelSpace& s, const Eigen::VectorXd& x, double r, const Scheme& scheme, int m,
                                 F&& f)
{
    if (const auto* mc = std::get_if<MonteCarlo>(&scheme)) return mc_means(s, x, r, *mc, m, f);
    return grid_means(s, x, r, std::get<Grid>(scheme), m, f);
}

} // namespace detail

/// n points uniform on B_r(x) w.r.t. the space's measure; acceptance rate written to `acceptance`.
inline std::vector<Eigen::VectorXd> sample_ball(const ModelSpace& s, const Eigen::VectorXd& x, double r, std::uint64_t n,
                                                SeedSpec seed, double* acceptance = nullptr)
{
    require(n >= 1, "sample_ball: need at least one sample");
    const std::uint64_t chunks = (n + detail::kChunk - 1) / detail::kChunk;
    std::vector<std::vector<Eigen::VectorXd>> parts(chunks);
    std::vector<std::uint64_t> proposed(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        const std::uint64_t quota = std::min<std::uint64_t>(detail::kChunk, n - c * detail::kChunk);
        CounterRng rng(seed, c);
        detail::BallSampler sampler(s, x, r);
        Eigen::VectorXd y;
        while (parts[c].size() < quota) {
            ++proposed[c];
            if (proposed[c] > 4096 &&
                static_cast<double>(parts[c].size()) < detail::kMinAcceptance * static_cast<double>(proposed[c]))
                throw NumericError("sample_ball: acceptance rate below 1e-3; check the gauge envelope");
            if (sampler.propose(rng, y)) parts[c].push_back(y);
        }
    });
    std::vector<Eigen::VectorXd> out;
    out.reserve(n);
    std::uint64_t prop = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        prop += proposed[c];
        for (auto& p : parts[c]) out.push_back(std::move(p));
    }
    if (acceptance) *acceptance = static_cast<double>(n) / static_cast<double>(prop);
    return out;
}

/// Mean over B_r(x) of u(y) - u(x). Constant fields give exactly 0 under either scheme.
inline Estimate mean_deviation_over_ball(const ModelSpace& s, const PointFunction& u, const Eigen::VectorXd& x, double r,
                                         const Scheme& scheme)
{
    const double u0 = u(x);
    return detail::ball_means(s, x, r, scheme, 1,
                              [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) { out[0] = u(y) - u0; })[0];
}

/// Mean of u over B_r(x).
inline Estimate mean_over_ball(const ModelSpace& s, const PointFunction& u, const Eigen::VectorXd& x, double r,
                               const Scheme& scheme)
{
    Estimate e = mean_deviation_over_ball(s, u, x, r, scheme);
    e.value += u(x);
    return e;
}

/// Continuum r-laplacian (mean over B_r(x) of u - u(x)) / r^2.
inline Estimate continuum_r_laplacian(const ModelSpace& s, const PointFunction& u, const Eigen::VectorXd& x, double r,
                                      const Scheme& scheme)
{
    Estimate e = mean_deviation_over_ball(s, u, x, r, scheme);
    e.value /= r * r;
    e.std_error /= r * r;
    return e;
}

/// C = (1 / (2 v1)) mean over the unit gauge ball of ||z1||^2.
inline Estimate carnot_constant_C(const CarnotStep2& g, const Gauge& gauge, const Scheme& scheme)
{
    const ModelSpace s = ModelSpace::carnot(g, gauge);
    const int v1 = g.v1();
    Estimate e = detail::ball_means(s, Eigen::VectorXd::Zero(g.dim()), 1.0, scheme, 1,
                                    [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
                                        out[0] = y.head(v1).squaredNorm();
                                    })[0];
    e.value /= 2.0 * v1;
    e.std_error /= 2.0 * v1;
    return e;
}

/// C from B_r instead of B_1, rescaling the second moment by r^2.
inline Estimate carnot_constant_C_at_radius(const CarnotStep2& g, const Gauge& gauge, double r, const Scheme& scheme)
{
    const ModelSpace s = ModelSpace::carnot(g, gauge);
    const int v1 = g.v1();
    Estimate e = detail::ball_means(s, Eigen::VectorXd::Zero(g.dim()), r, scheme, 1,
                                    [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
                                        out[0] = y.head(v1).squaredNorm();
                                    })[0];
    e.value /= 2.0 * v1 * r * r;
    e.std_error /= 2.0 * v1 * r * r;
    return e;
}

/// Both schemes, required to agree within max(3 sigma, 1e-3 relative). Returns {mc, grid}.
inline std::pair<Estimate, Estimate> carnot_constant_C_checked(const CarnotStep2& g, const Gauge& gauge,
                                                               const MonteCarlo& mc, const Grid& grid)
{
    const Estimate a = carnot_constant_C(g, gauge, mc);
    const Estimate b = carnot_constant_C(g, gauge, grid);
    const double tol = std::max(3.0 * a.std_error, 1e-3 * std::abs(b.value));
    if (std::abs(a.value - b.value) > tol) {
        std::ostringstream os;
        os.precision(10);
        os << "carnot constant: mc " << a.value << " +- " << a.std_error << " disagrees with grid " << b.value;
        throw NumericError(os.str());
    }
    return {a, b};
}

/// Mean over the unit gauge ball of <a, z1>^2 for each unit direction a in V1.
inline std::vector<Estimate> isotropy_check(const CarnotStep2& g, const Gauge& gauge,
                                            const std::vector<Eigen::VectorXd>& directions, const Scheme& scheme)
{
    for (const auto& a : directions) {
        require(a.size() == g.v1(), "isotropy_check: direction dimension must equal v1");
        require(std::abs(a.norm() - 1.0) < 1e-12, "isotropy_check: directions must be unit vectors");
    }
    const ModelSpace s = ModelSpace::carnot(g, gauge);
    const int m = static_cast<int>(directions.size());
    Eigen::MatrixXd A(m, g.v1());
    for (int i = 0; i < m; ++i) A.row(i) = directions[static_cast<std::size_t>(i)].transpose();
    return detail::ball_means(s, Eigen::VectorXd::Zero(g.dim()), 1.0, scheme, m,
                              [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
                                  out = (A * y.head(g.v1())).array().square().matrix();
                              });
}

} // namespace amv
