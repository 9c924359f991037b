#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ball_integration.hpp"
#include "carnot_calculus.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "model_spaces.hpp"

// Text specs for fields, points, radii and test functions shared by the command line
// tool and the acceptance suite.

namespace amv::catalog {

inline double parse_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos == s.size() && std::isfinite(v)) return v;
    } catch (const std::logic_error&) {
    }
    throw InputError("bad " + what + " '" + s + "'");
}

/// "a,b,c" -> vector.
inline std::vector<double> parse_list(const std::string& s, const std::string& what)
{
    std::vector<double> out;
    for (const auto& p : detail::split(s, ',')) out.push_back(parse_double(p, what));
    return out;
}

inline Eigen::VectorXd parse_point(const std::string& s)
{
    const auto v = parse_list(s, "point coordinate");
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// "r1,r2,..." (strictly decreasing) or "geom:r0[:count]" for r0 2^-k, k < count (default 8).
inline std::vector<double> parse_radii(const std::string& s)
{
    if (s.rfind("geom:", 0) == 0) {
        const auto parts = detail::split(s, ':');
        require(parts.size() == 2 || parts.size() == 3, "bad radii spec '" + s + "'");
        const double r0 = parse_double(parts[1], "radius");
        const int count = parts.size() == 3 ? detail::parse_int(parts[2], "radius count") : 8;
        std::vector<double> r;
        require(r0 > 0.0 && count >= 1, "bad radii spec '" + s + "'");
        for (int k = 0; k < count; ++k) r.push_back(std::ldexp(r0, -k));
        return r;
    }
    auto r = parse_list(s, "radius");
    require(!r.empty(), "empty radii list");
    for (std::size_t i = 0; i < r.size(); ++i) {
        require(r[i] > 0.0, "radii must be positive");
        if (i) require(r[i] < r[i - 1], "radii must be strictly decreasing");
    }
    return r;
}

/// Field names (coordinates 1-based):
///   const:c  coord:i | xi  sq:i | sqi  normsq  harm3  affine:a1,a2,..[:c]
///   dist_boundary (half-spaces: last coordinate)  folland[:pole z...]  gaugepow:p[:beta]
inline AnalyticField parse_field(const std::string& spec, const ModelSpace& s)
{
    const int d = s.coord_dim();
    const auto parts = detail::split(spec, ':');
    const std::string& name = parts[0];
    auto index = [&](const std::string& t) {
        const int i = detail::parse_int(t, "coordinate index");
        require(i >= 1 && i <= d, "coordinate index out of range in '" + spec + "'");
        return i - 1;
    };
    const bool carnot = s.kind() == ModelSpace::Kind::carnot;
    if (name == "const" && parts.size() == 2) return fields::constant(d, parse_double(parts[1], "constant"));
    if (name == "coord" && parts.size() == 2) return fields::coordinate(d, index(parts[1]));
    if (name == "sq" && parts.size() == 2) return fields::coordinate_squared(d, index(parts[1]));
    if (parts.size() == 1 && name.size() > 1 && name[0] == 'x') return fields::coordinate(d, index(name.substr(1)));
    if (parts.size() == 1 && name.size() > 2 && name.rfind("sq", 0) == 0) return fields::coordinate_squared(d, index(name.substr(2)));
    if (name == "normsq" && parts.size() == 1) return fields::norm_squared(d, carnot ? s.group().v1() : d);
    if (name == "harm3" && parts.size() == 1) return fields::harmonic_cubic(d);
    if (name == "dist_boundary" && parts.size() == 1) {
        require(s.kind() == ModelSpace::Kind::half_space, "dist_boundary needs a half-space");
        return fields::coordinate(d, d - 1);
    }
    if (name == "affine" && (parts.size() == 2 || parts.size() == 3)) {
        const auto a = parse_list(parts[1], "affine coefficient");
        const double c = parts.size() == 3 ? parse_double(parts[2], "affine constant") : 0.0;
        return fields::affine(d, Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size())), c);
    }
    if (name == "folland" && carnot && parts.size() <= 2) {
        GPoint pole = s.group().identity();
        if (parts.size() == 2) {
            const Eigen::VectorXd z = parse_point(parts[1]);
            require(z.size() == d, "folland pole has the wrong dimension");
            pole = GPoint::from_flat(z, s.group().v1());
        }
        return fields::folland_kernel(s.group(), pole);
    }
    if (name == "gaugepow" && carnot && (parts.size() == 2 || parts.size() == 3)) {
        const double beta = parts.size() == 3 ? parse_double(parts[2], "beta") : s.gauge().beta();
        return fields::gauge_power(s.group(), beta, parse_double(parts[1], "power"));
    }
    throw InputError("unknown field '" + spec + "' for space " + s.spec());
}

/// Second-order prediction for lim Delta_r u(x): Delta u / (2(n+2)) in Euclidean charts,
/// C * sub-Laplacian on Carnot groups (C from the grid scheme).
inline double predicted_limit(const ModelSpace& s, const AnalyticField& u, const Eigen::VectorXd& x)
{
    switch (s.kind()) {
    case ModelSpace::Kind::euclidean:
    case ModelSpace::Kind::half_space: {
        const int n = s.coord_dim();
        if (s.kind() == ModelSpace::Kind::half_space)
            require(x[n - 1] > 0.0, "no second-order prediction on the boundary of a half-space");
        return u.hessian(x).trace() / (2.0 * (n + 2));
    }
    case ModelSpace::Kind::carnot: {
        const double C = carnot_constant_C(s.group(), s.gauge(), Grid{24}).value;
        return C * sub_laplacian(s.group(), u, GPoint::from_flat(x, s.group().v1()));
    }
    case ModelSpace::Kind::flat_cone: break;
    }
    throw InputError("no second-order prediction on " + s.spec() + "; pass a reference explicitly");
}

/// Lipschitz test function on planar cloud coordinates.
struct TestFunction {
    std::string name;
    PointFunction f;
    double support;   ///< radius of a disc around the origin containing the support
};

/// "bump:R" = (1 - |x|/R)_+,  "plateau:R1:R2" = 1 on |x| <= R1, linear to 0 at R2,  "zero".
inline TestFunction parse_test_function(const std::string& spec)
{
    const auto parts = detail::split(spec, ':');
    if (parts[0] == "zero" && parts.size() == 1) return {spec, [](const Eigen::VectorXd&) { return 0.0; }, 1.0};
    if (parts[0] == "bump" && parts.size() == 2) {
        const double R = parse_double(parts[1], "bump radius");
        require(R > 0.0, "bump radius must be positive");
        return {spec, [R](const Eigen::VectorXd& p) { return std::max(0.0, 1.0 - p.norm() / R); }, R};
    }
    if (parts[0] == "plateau" && parts.size() == 3) {
        const double a = parse_double(parts[1], "plateau radius"), b = parse_double(parts[2], "plateau radius");
        require(0.0 < a && a < b, "plateau needs 0 < R1 < R2");
        return {spec,
                [a, b](const Eigen::VectorXd& p) {
                    const double d = p.norm();
                    return d <= a ? 1.0 : (d >= b ? 0.0 : (b - d) / (b - a));
                },
                b};
    }
    throw InputError("unknown test function '" + spec + "'");
}

/// "unit" (half:2 -> boundary segment [0,1]; otherwise the unit ball at the origin/apex),
/// "strip:a:b", or "ball:c1,c2,..:R".
inline Region parse_region(const std::string& spec, const ModelSpace& s)
{
    const auto parts = detail::split(spec, ':');
    if (parts[0] == "unit" && parts.size() == 1) {
        if (s.kind() == ModelSpace::Kind::half_space && s.coord_dim() == 2) return Region::strip(0.0, 1.0);
        return Region::ball(Eigen::VectorXd::Zero(s.coord_dim()), 1.0);
    }
    if (parts[0] == "strip" && parts.size() == 3)
        return Region::strip(parse_double(parts[1], "strip end"), parse_double(parts[2], "strip end"));
    if (parts[0] == "ball" && parts.size() == 3) {
        const Eigen::VectorXd c = parse_point(parts[1]);
        require(c.size() == s.coord_dim(), "region centre has the wrong dimension");
        return Region::ball(c, parse_double(parts[2], "region radius"));
    }
    throw InputError("unknown region '" + spec + "'");
}

/// Limit of the mm-boundary mass: 0 away from a codimension-one boundary, 2/(3 pi) per unit
/// length of boundary inside the region for half:2.
inline double mm_boundary_reference(const ModelSpace& s, const Region& U)
{
    if (s.kind() != ModelSpace::Kind::half_space) return 0.0;
    require(s.coord_dim() == 2, "reference boundary density is only tabulated for half:2");
    const double kappa = 2.0 / (3.0 * std::numbers::pi);
    if (U.kind == Region::Kind::boundary_strip) return kappa * (U.hi - U.lo);
    const double c = U.center[1], R = U.radius;
    return c < R ? kappa * 2.0 * std::sqrt(R * R - c * c) : 0.0;
}

} // namespace amv::catalog
