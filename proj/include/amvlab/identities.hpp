#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmspace.hpp"
#include "random.hpp"

namespace amv {

/// Random finite space: n points, symmetric distances in [0, 2], masses in [0.1, 10].
inline FiniteMMSpace random_space(CounterRng& rng, std::size_t n)
{
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) d[i * n + j] = d[j * n + i] = rng.uniform(0.0, 2.0);
    std::vector<double> m(n);
    for (auto& v : m) v = rng.uniform(0.1, 10.0);
    return FiniteMMSpace(std::move(d), std::move(m));
}

inline ScalarField random_field(CounterRng& rng, std::size_t n)
{
    ScalarField u(n);
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    return u;
}

/// Worst relative residual per identity, over all instances checked.
struct IdentitySummary {
    std::size_t instances = 0;
    std::map<std::string, double> worst;
    std::optional<FiniteMMSpace> offending;   ///< first instance above tolerance
    std::optional<double> offending_radius;
    std::optional<std::size_t> offending_instance;   ///< replay with CounterRng({seed, 0}, instance)

    double max_residual() const
    {
        double m = 0.0;
        for (const auto& [k, v] : worst) m = std::max(m, v);
        return m;
    }
};

namespace detail {
inline double rel(double lhs, double rhs, double scale)
{
    const double diff = std::abs(lhs - rhs);
    return diff == 0.0 ? 0.0 : diff / std::max(scale, std::numeric_limits<double>::min());
}
} // namespace detail

/// Residuals of every exact identity of the operator family on one instance.
/// The second side of each identity is evaluated on `check`, which equals `space`
/// unless a fault is being injected.
inline std::map<std::string, double> identity_residuals(const FiniteMMSpace& space, const FiniteMMSpace& check,
                                                        std::span<const double> u, std::span<const double> v,
                                                        double r, double r_larger)
{
    using detail::rel;
    const BallTable t(space, Radius(r));
    const BallTable tc(check, Radius(r));
    const std::size_t n = space.size();
    std::map<std::string, double> res;

    const ScalarField lap_u = r_laplacian(t, u);
    const ScalarField lap_v = r_laplacian(t, v);
    const ScalarField adj_v = adjoint_r_laplacian(tc, v);
    const ScalarField adj_u = adjoint_r_laplacian(tc, u);
    const ScalarField adj_one = adjoint_r_laplacian(tc, ScalarField(n, 1.0));
    const ScalarField sym_u = sym_r_laplacian(t, u);
    const ScalarField sym_v = sym_r_laplacian(tc, v);
    const ScalarField e_uv = energy_density(tc, u, v);
    const double r2 = r * r;

    {   // Green: sum v Delta_r u m = sum u Delta_r* v m
        double lhs = 0, rhs = 0, scale = 0;
        for (std::size_t x = 0; x < n; ++x) {
            lhs += v[x] * lap_u[x] * space.mass(x);
            rhs += u[x] * adj_v[x] * check.mass(x);
            scale += (std::abs(v[x] * lap_u[x]) + std::abs(u[x] * adj_v[x]) + 2.0 * std::abs(u[x] * v[x]) / r2) *
                     space.mass(x);
        }
        res["green"] = rel(lhs, rhs, scale);
    }
    {   // sym Delta_r u = 1/2 (Delta_r u + Delta_r* u - u Delta_r* 1), pointwise
        double worst = 0;
        for (std::size_t x = 0; x < n; ++x) {
            const double rhs = 0.5 * (lap_u[x] + adj_u[x] - u[x] * adj_one[x]);
            const double scale = std::abs(sym_u[x]) + 0.5 * (std::abs(lap_u[x]) + std::abs(adj_u[x]) + std::abs(u[x] * adj_one[x])) +
                                 std::abs(u[x]) / r2;
            worst = std::max(worst, rel(sym_u[x], rhs, scale));
        }
        res["symmetrization"] = worst;
    }
    {   // Delta_r(uv) = u Delta_r v + 2 e_r(u,v) + v Delta_r u
        ScalarField uv(n);
        for (std::size_t x = 0; x < n; ++x) uv[x] = u[x] * v[x];
        const ScalarField lap_uv = r_laplacian(t, uv);
        const ScalarField lap_v_c = r_laplacian(tc, v);
        const ScalarField lap_u_c = r_laplacian(tc, u);
        double worst = 0;
        for (std::size_t x = 0; x < n; ++x) {
            const double a = u[x] * lap_v_c[x], b = 2.0 * e_uv[x], c = v[x] * lap_u_c[x];
            const double scale = std::abs(lap_uv[x]) + std::abs(a) + std::abs(b) + std::abs(c) +
                                 2.0 * std::abs(u[x] * v[x]) / r2;
            worst = std::max(worst, rel(lap_uv[x], a + b + c, scale));
        }
        res["product_rule"] = worst;
    }
    {   // (a): sum v sym Delta_r u m = -E_r(u, v)
        double lhs = 0, scale = 0;
        for (std::size_t x = 0; x < n; ++x) {
            lhs += v[x] * sym_u[x] * space.mass(x);
            scale += std::abs(v[x] * sym_u[x] * space.mass(x)) + std::abs(e_uv[x] * check.mass(x));
        }
        res["energy_pairing"] = rel(lhs, -total_energy(tc, u, v), scale);
    }
    {   // self-adjointness of the symmetrized laplacian
        double lhs = 0, rhs = 0, scale = 0;
        for (std::size_t x = 0; x < n; ++x) {
            lhs += v[x] * sym_u[x] * space.mass(x);
            rhs += u[x] * sym_v[x] * check.mass(x);
            scale += std::abs(v[x] * sym_u[x] * space.mass(x)) + std::abs(u[x] * sym_v[x] * check.mass(x));
        }
        res["sym_self_adjoint"] = rel(lhs, rhs, scale);
    }
    {   // (b): sum v (Delta_r - sym Delta_r) u m = delta_r form
        double lhs = 0, scale = 0;
        for (std::size_t x = 0; x < n; ++x) {
            const double term = v[x] * (lap_u[x] - sym_u[x]) * space.mass(x);
            lhs += term;
            scale += (std::abs(v[x] * lap_u[x]) + std::abs(v[x] * sym_u[x]) + std::abs(v[x] * u[x]) / r2) * space.mass(x);
        }
        res["defect_pairing"] = rel(lhs, sym_defect_pairing(tc, v, u), scale);
    }
    {   // k_r symmetric, supported on d < r
        double worst = 0;
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y) {
                const double kxy = mean_value_kernel(t, x, y);
                const double kyx = mean_value_kernel(tc, y, x);
                if (space.distance(x, y) >= r && kxy != 0.0) worst = std::max(worst, 1.0);
                worst = std::max(worst, rel(kxy, kyx, std::abs(kxy) + std::abs(kyx)));
            }
        res["kernel_symmetry"] = worst;
    }
    {   // constants: Delta_r c = sym Delta_r c = 0, Delta_r* c = c Delta_r* 1
        const double c = 1.0 + std::abs(u[0]);
        const ScalarField cf(n, c);
        const ScalarField l1 = r_laplacian(t, cf), l2 = sym_r_laplacian(t, cf), l3 = adjoint_r_laplacian(t, cf);
        double worst = 0;
        for (std::size_t x = 0; x < n; ++x) {
            const double scale = c / r2;
            worst = std::max({worst, rel(l1[x], 0.0, scale), rel(l2[x], 0.0, scale),
                              rel(l3[x], c * adj_one[x], scale + std::abs(l3[x]))});
        }
        res["constants"] = worst;
    }
    {   // r -> mu(B_r(x)) nondecreasing
        const BallTable big(space, Radius(r_larger));
        double worst = 0;
        for (std::size_t x = 0; x < n; ++x)
            if (big.ball_mass(x) < t.ball_mass(x)) worst = std::max(worst, 1.0);
        res["ball_monotone"] = worst;
    }
    return res;
}

/// Runs `count` random instances with n in [2, size_max]. With fault_inject, one point
/// mass is perturbed on the re-evaluation side.
inline IdentitySummary run_identity_suite(std::size_t count, std::size_t size_max, std::uint64_t seed,
                                          bool fault_inject = false, double tolerance = 1e-12)
{
    require(size_max >= 2 || count == 0, "identities: size_max must be at least 2");
    IdentitySummary summary;
    std::vector<std::map<std::string, double>> per(count);
    std::vector<FiniteMMSpace> spaces(count);
    std::vector<double> radii(count);
    parallel_for(count, [&](std::size_t k) {
        CounterRng rng(SeedSpec{seed, 0}, k);
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(size_max - 1));
        FiniteMMSpace s = random_space(rng, std::min(n, size_max));
        const ScalarField u = random_field(rng, s.size());
        const ScalarField v = random_field(rng, s.size());
        const double r = rng.uniform(0.05, 2.5);
        const double r_big = r + rng.uniform(0.0, 1.0);
        const FiniteMMSpace check = fault_inject ? s.with_mass(0, s.mass(0) * 1.5) : s;
        per[k] = identity_residuals(s, check, u, v, r, r_big);
        spaces[k] = std::move(s);
        radii[k] = r;
    });
    summary.instances = count;
    for (std::size_t k = 0; k < count; ++k) {
        double inst_max = 0;
        for (const auto& [name, val] : per[k]) {
            auto [it, inserted] = summary.worst.emplace(name, val);
            if (!inserted) it->second = std::max(it->second, val);
            inst_max = std::max(inst_max, val);
        }
        if (inst_max >= tolerance && !summary.offending) {
            summary.offending = spaces[k];
            summary.offending_radius = radii[k];
            summary.offending_instance = k;
        }
    }
    return summary;
}

/// {"instances", "max_residual", "worst": {...}, "offending": {"instance", "radius", "space"}}
inline nlohmann::json to_json_summary(const IdentitySummary& s)
{
    nlohmann::json j{{"instances", s.instances}, {"max_residual", s.max_residual()}, {"worst", s.worst}};
    if (s.offending) {
        std::ostringstream os;
        write_space(os, *s.offending);
        j["offending"] = {{"instance", *s.offending_instance}, {"radius", *s.offending_radius}, {"space", os.str()}};
    }
    return j;
}

} // namespace amv
