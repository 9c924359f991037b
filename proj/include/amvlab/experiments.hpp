#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ball_integration.hpp"
#include "carnot.hpp"
#include "cloud.hpp"
#include "errors.hpp"
#include "fields.hpp"
#include "fit.hpp"
#include "mmspace.hpp"
#include "model_spaces.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace amv {

enum class Verdict { pass, fail, inconclusive, unchecked };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    case Verdict::unchecked: return "unchecked";
    }
    return "?";
}

inline Verdict parse_verdict(const std::string& s)
{
    if (s == "pass") return Verdict::pass;
    if (s == "fail") return Verdict::fail;
    if (s == "inconclusive") return Verdict::inconclusive;
    if (s == "unchecked") return Verdict::unchecked;
    throw InputError("unknown verdict '" + s + "'");
}

/// Declared tolerance: absolute + relative_to_max * max |value|.
struct Tolerance {
    double absolute = 1e-3;
    double relative_to_max = 0.0;

    double resolve(std::span<const double> values) const
    {
        double m = 0.0;
        for (const double v : values) m = std::max(m, std::abs(v));
        return absolute + relative_to_max * m;
    }
};

struct SweepOptions {
    std::optional<double> reference;
    Tolerance tolerance{};
    std::size_t fit_window = 0;   ///< smallest radii used by the fit; 0 = all
};

struct ExperimentReport {
    std::string experiment;
    std::vector<double> radii;
    std::vector<double> values;
    std::vector<double> std_errors;
    double fitted_limit = 0.0;
    double limit_std_error = 0.0;
    std::optional<double> fitted_rate;
    double half_window_limit = 0.0;
    std::optional<double> reference;
    Tolerance tolerance_spec{};
    double tolerance = 0.0;
    std::size_t fit_window = 0;
    Verdict verdict = Verdict::unchecked;
    std::string reason;
    nlohmann::json metadata = nlohmann::json::object();
    nlohmann::json checks = nlohmann::json::object();   ///< named boolean side conditions
    nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

struct Judgement {
    LimitFit fit;
    LimitFit half;
    double tolerance;
    Verdict verdict;
    std::string reason;
};

inline Judgement judge(const ExperimentReport& rep)
{
    Judgement j;
    j.fit = fit_limit(rep.radii, rep.values, rep.std_errors, rep.fit_window);
    j.half = refit_smaller_half(rep.radii, rep.values, rep.std_errors, j.fit);
    j.tolerance = rep.tolerance_spec.resolve(rep.values);
    if (!rep.reference) {
        j.verdict = Verdict::unchecked;
        j.reason = "no reference";
    } else if (j.fit.limit_std_error > j.tolerance) {
        j.verdict = Verdict::inconclusive;
        j.reason = "limit standard error exceeds tolerance";
    } else if (std::abs(j.half.limit - j.fit.limit) > j.tolerance) {
        j.verdict = Verdict::inconclusive;
        j.reason = "refit on the smaller half of the radii moves the limit beyond tolerance";
    } else if (std::abs(j.fit.limit - *rep.reference) <= j.tolerance) {
        j.verdict = Verdict::pass;
        j.reason = "limit within tolerance of reference";
    } else {
        j.verdict = Verdict::fail;
        j.reason = "limit differs from reference by more than tolerance";
    }
    return j;
}

} // namespace detail

/// Fits the limit and sets the verdict from radii/values/std_errors and the options.
inline void finalize(ExperimentReport& rep, const SweepOptions& opt)
{
    rep.reference = opt.reference;
    rep.tolerance_spec = opt.tolerance;
    rep.fit_window = opt.fit_window;
    const detail::Judgement j = detail::judge(rep);
    rep.fitted_limit = j.fit.limit;
    rep.limit_std_error = j.fit.limit_std_error;
    rep.fitted_rate = j.fit.rate;
    rep.half_window_limit = j.half.limit;
    rep.tolerance = j.tolerance;
    rep.verdict = j.verdict;
    rep.reason = j.reason;
}

/// Recomputes fit and verdict from the stored values; true iff everything matches bit for bit.
inline bool recheck(const ExperimentReport& rep)
{
    const detail::Judgement j = detail::judge(rep);
    return j.fit.limit == rep.fitted_limit && j.fit.limit_std_error == rep.limit_std_error &&
           j.fit.rate == rep.fitted_rate && j.half.limit == rep.half_window_limit && j.tolerance == rep.tolerance &&
           j.verdict == rep.verdict;
}

inline void to_json(nlohmann::json& j, const ExperimentReport& r)
{
    j = nlohmann::json{{"experiment", r.experiment},
                       {"radii", r.radii},
                       {"values", r.values},
                       {"std_errors", r.std_errors},
                       {"fitted_limit", r.fitted_limit},
                       {"limit_std_error", r.limit_std_error},
                       {"fitted_rate", r.fitted_rate ? nlohmann::json(*r.fitted_rate) : nlohmann::json(nullptr)},
                       {"half_window_limit", r.half_window_limit},
                       {"reference", r.reference ? nlohmann::json(*r.reference) : nlohmann::json(nullptr)},
                       {"tolerance", {{"absolute", r.tolerance_spec.absolute},
                                      {"relative_to_max", r.tolerance_spec.relative_to_max},
                                      {"resolved", r.tolerance}}},
                       {"fit_window", r.fit_window},
                       {"verdict", to_string(r.verdict)},
                       {"reason", r.reason},
                       {"metadata", r.metadata},
                       {"checks", r.checks},
                       {"extra", r.extra}};
}

inline void from_json(const nlohmann::json& j, ExperimentReport& r)
{
    r.experiment = j.at("experiment").get<std::string>();
    r.radii = j.at("radii").get<std::vector<double>>();
    r.values = j.at("values").get<std::vector<double>>();
    r.std_errors = j.at("std_errors").get<std::vector<double>>();
    r.fitted_limit = j.at("fitted_limit").get<double>();
    r.limit_std_error = j.at("limit_std_error").get<double>();
    r.fitted_rate = j.at("fitted_rate").is_null() ? std::nullopt : std::optional<double>(j["fitted_rate"].get<double>());
    r.half_window_limit = j.at("half_window_limit").get<double>();
    r.reference = j.at("reference").is_null() ? std::nullopt : std::optional<double>(j["reference"].get<double>());
    const auto& t = j.at("tolerance");
    r.tolerance_spec = {t.at("absolute").get<double>(), t.at("relative_to_max").get<double>()};
    r.tolerance = t.at("resolved").get<double>();
    r.fit_window = j.at("fit_window").get<std::size_t>();
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    r.reason = j.at("reason").get<std::string>();
    r.metadata = j.value("metadata", nlohmann::json::object());
    r.checks = j.value("checks", nlohmann::json::object());
    r.extra = j.value("extra", nlohmann::json::object());
}

/// CSV rows "radius,value,std_error" with a header line.
inline void write_csv(std::ostream& os, const ExperimentReport& r)
{
    os << "radius,value,std_error\n";
    os.precision(17);
    for (std::size_t i = 0; i < r.radii.size(); ++i)
        os << r.radii[i] << ',' << r.values[i] << ',' << r.std_errors[i] << '\n';
}

/// r0 * 2^-k for k = 0 .. count-1.
inline std::vector<double> default_radii(double r0, int count = 8)
{
    require(r0 > 0.0 && count >= 1, "default_radii: r0 and count must be positive");
    std::vector<double> r;
    for (int k = 0; k < count; ++k) r.push_back(std::ldexp(r0, -k));
    return r;
}

namespace detail {

inline void check_radii(std::span<const double> radii)
{
    require(!radii.empty(), "sweep needs at least one radius");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        require(radii[i] > 0.0 && std::isfinite(radii[i]), "radii must be positive");
        if (i > 0) require(radii[i] < radii[i - 1], "radii must be strictly decreasing");
    }
}

inline nlohmann::json point_json(const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); }

} // namespace detail

/// Values (mean over B_r(x) of u - u(x)) / r^2 for each radius.
inline ExperimentReport amv_sweep(const ModelSpace& s, const AnalyticField& u, const Eigen::VectorXd& x,
                                  std::span<const double> radii, const Scheme& scheme, const SweepOptions& opt = {})
{
    detail::check_radii(radii);
    s.check_point(x);
    ExperimentReport rep;
    rep.experiment = "amv-sweep";
    rep.radii.assign(radii.begin(), radii.end());
    for (const double r : radii) {
        const Estimate e = continuum_r_laplacian(s, u, x, r, scheme);
        rep.values.push_back(e.value);
        rep.std_errors.push_back(e.std_error);
    }
    rep.metadata = {{"space", s.spec()}, {"field", u.name()}, {"point", detail::point_json(x)},
                    {"scheme", scheme_string(scheme)}};
    if (const auto* mc = std::get_if<MonteCarlo>(&scheme)) rep.metadata["seed"] = mc->seed.seed;
    finalize(rep, opt);
    return rep;
}

/// Values sup over the grid of |Delta_r u|; the check "monotone" asks that the sup does
/// not grow as r shrinks beyond three combined standard errors.
inline ExperimentReport strong_amv_scan(const ModelSpace& s, const AnalyticField& u,
                                        const std::vector<Eigen::VectorXd>& grid, std::span<const double> radii,
                                        const Scheme& scheme, const SweepOptions& opt = {})
{
    detail::check_radii(radii);
    require(!grid.empty(), "strong_amv_scan: empty point grid");
    for (const auto& p : grid) s.check_point(p);
    const std::size_t nr = radii.size(), np = grid.size();
    std::vector<Estimate> est(nr * np);
    parallel_for(nr * np, [&](std::size_t k) {
        est[k] = continuum_r_laplacian(s, u, grid[k % np], radii[k / np], scheme);
    });
    ExperimentReport rep;
    rep.experiment = "strong-scan";
    rep.radii.assign(radii.begin(), radii.end());
    std::vector<std::size_t> argmax;
    for (std::size_t i = 0; i < nr; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < np; ++k)
            if (std::abs(est[i * np + k].value) > std::abs(est[i * np + best].value)) best = k;
        rep.values.push_back(std::abs(est[i * np + best].value));
        rep.std_errors.push_back(est[i * np + best].std_error);
        argmax.push_back(best);
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < nr; ++i)
        monotone &= rep.values[i + 1] <= rep.values[i] + 3.0 * std::hypot(rep.std_errors[i], rep.std_errors[i + 1]) +
                                             1e-12 * rep.values[i];
    rep.checks["monotone"] = monotone;
    rep.extra["argmax_point"] = argmax;
    rep.metadata = {{"space", s.spec()}, {"field", u.name()}, {"grid_points", np}, {"scheme", scheme_string(scheme)}};
    if (const auto* mc = std::get_if<MonteCarlo>(&scheme)) rep.metadata["seed"] = mc->seed.seed;
    finalize(rep, opt);
    return rep;
}

/// `count` points with gauge in [lo, hi] on a Carnot group: radial levels evenly spaced, random
/// directions from a seeded Gaussian, rescaled by dilation.
inline std::vector<Eigen::VectorXd> gauge_annulus_grid(const CarnotStep2& g, const Gauge& gauge, double lo, double hi,
                                                       std::size_t count, SeedSpec seed = {1, 0})
{
    require(0.0 < lo && lo <= hi, "gauge_annulus_grid: need 0 < lo <= hi");
    require(count >= 1, "gauge_annulus_grid: count must be positive");
    std::vector<Eigen::VectorXd> out;
    CounterRng rng(seed);
    const std::size_t levels = std::min<std::size_t>(count, 5);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t lev = k % levels;
        const double target = levels == 1 ? lo : lo + (hi - lo) * static_cast<double>(lev) / (levels - 1);
        GPoint p = g.identity();
        double rho = 0.0;
        while (!(rho > 1e-6)) {
            for (int i = 0; i < g.v1(); ++i) p.z1[i] = rng.normal();
            for (int i = 0; i < g.v2(); ++i) p.z2[i] = rng.normal();
            rho = gauge.value(p);
        }
        out.push_back(g.dilate(target / rho, p).flat());
    }
    return out;
}

// ---- point-cloud sweeps ----------------------------------------------------------------

using CloudFactory = std::function<PointCloud(double r)>;

namespace detail {

struct Pairings {
    double plain = 0.0;    ///< integral of phi Delta_r u
    double defect = 0.0;   ///< integral of phi (Delta_r - sym Delta_r) u
};

/// Both pairings, visiting only balls centred in supp phi and their members.
template <MetricMeasureSpace S>
Pairings local_pairings(const S& s, double r, std::span<const double> phi, std::span<const double> u)
{
    const std::size_t n = s.size();
    require(phi.size() == n && u.size() == n, "pairing: field length must match the space");
    std::vector<std::size_t> supp;
    for (std::size_t i = 0; i < n; ++i)
        if (phi[i] != 0.0) supp.push_back(i);
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(supp.size());
    parallel_for(supp.size(), [&](std::size_t k) { s.ball_members(supp[k], r, rows[k]); });
    std::vector<char> needed(n, 0);
    for (const auto& row : rows)
        for (const auto& [y, d] : row) needed[y] = 1;
    std::vector<std::size_t> need;
    for (std::size_t i = 0; i < n; ++i)
        if (needed[i]) need.push_back(i);
    std::vector<double> mu(n, 0.0);
    parallel_for(need.size(), [&](std::size_t k) {
        std::vector<std::pair<std::size_t, double>> row;
        s.ball_members(need[k], r, row);
        double m = 0.0;
        for (const auto& [y, d] : row) m += s.mass(y);
        mu[need[k]] = m;
    });
    std::vector<Pairings> part(supp.size());
    const double r2 = r * r;
    parallel_for(supp.size(), [&](std::size_t k) {
        const std::size_t x = supp[k];
        double plain = 0.0, defect = 0.0;
        for (const auto& [y, d] : rows[k]) {
            const double du = (u[y] - u[x]) * s.mass(y);
            plain += du;
            defect += du * (1.0 / mu[x] - 1.0 / mu[y]);
        }
        const double w = phi[x] * s.mass(x) / r2;
        part[k] = {w * plain / mu[x], 0.5 * w * defect};
    });
    Pairings total;
    for (const auto& p : part) {
        total.plain += p.plain;
        total.defect += p.defect;
    }
    return total;
}

inline void check_clearance(std::span<const double> clearance, std::span<const double> phi, double need,
                            const char* who)
{
    if (clearance.empty()) return;
    require(clearance.size() == phi.size(), "clearance length must match the space");
    for (std::size_t i = 0; i < phi.size(); ++i)
        if (phi[i] != 0.0 && clearance[i] < need)
            throw InputError(std::string(who) + ": test function support comes within " + std::to_string(clearance[i]) +
                             " of the artificial boundary; at least " + std::to_string(need) + " is required");
}

enum class PairingKind { weak, defect };

template <MetricMeasureSpace S>
ExperimentReport fixed_space_sweep(PairingKind kind, const S& s, std::span<const double> clearance,
                                   std::span<const double> u, std::span<const double> phi,
                                   std::span<const double> radii, const SweepOptions& opt)
{
    check_radii(radii);
    const double factor = kind == PairingKind::weak ? 1.0 : 2.0;
    const char* who = kind == PairingKind::weak ? "weak-sweep" : "sym-vs-plain";
    check_clearance(clearance, phi, factor * radii[0], who);
    ExperimentReport rep;
    rep.experiment = who;
    rep.radii.assign(radii.begin(), radii.end());
    for (const double r : radii) {
        const Pairings p = local_pairings(s, r, phi, u);
        rep.values.push_back(kind == PairingKind::weak ? p.plain : p.defect);
        rep.std_errors.push_back(0.0);
    }
    rep.metadata = {{"points", s.size()}};
    finalize(rep, opt);
    return rep;
}

inline ExperimentReport cloud_sweep(PairingKind kind, const CloudFactory& make, const PointFunction& u,
                                    const PointFunction& phi, std::span<const double> radii, const SweepOptions& opt)
{
    check_radii(radii);
    const double factor = kind == PairingKind::weak ? 1.0 : 2.0;
    const char* who = kind == PairingKind::weak ? "weak-sweep" : "sym-vs-plain";
    ExperimentReport rep;
    rep.experiment = who;
    rep.radii.assign(radii.begin(), radii.end());
    std::vector<std::size_t> sizes;
    for (const double r : radii) {
        const PointCloud c = make(r);
        std::vector<double> uu(c.size()), ph(c.size()), cl(c.size());
        parallel_for(c.size(), [&](std::size_t i) {
            const Eigen::VectorXd p = c.coords(i);
            uu[i] = u(p);
            ph[i] = phi(p);
            cl[i] = c.clearance(i);
        });
        check_clearance(cl, ph, factor * r, who);
        const Pairings p = local_pairings(c, r, ph, uu);
        rep.values.push_back(kind == PairingKind::weak ? p.plain : p.defect);
        rep.std_errors.push_back(0.0);
        sizes.push_back(c.size());
    }
    rep.extra["cloud_points"] = sizes;
    finalize(rep, opt);
    return rep;
}

} // namespace detail

/// Values: integral of phi Delta_r u on a fixed finite space. `clearance` (empty = none)
/// gives each point's distance to the artificial boundary of the discretization.
template <MetricMeasureSpace S>
ExperimentReport weak_amv_sweep(const S& s, std::span<const double> clearance, std::span<const double> u,
                                std::span<const double> phi, std::span<const double> radii,
                                const SweepOptions& opt = {})
{
    return detail::fixed_space_sweep(detail::PairingKind::weak, s, clearance, u, phi, radii, opt);
}

/// Values: integral of phi (Delta_r - sym Delta_r) u on a fixed finite space.
template <MetricMeasureSpace S>
ExperimentReport sym_vs_plain_sweep(const S& s, std::span<const double> clearance, std::span<const double> u,
                                    std::span<const double> phi, std::span<const double> radii,
                                    const SweepOptions& opt = {})
{
    return detail::fixed_space_sweep(detail::PairingKind::defect, s, clearance, u, phi, radii, opt);
}

/// Weak pairing with a cloud rebuilt for each radius (joint refinement).
inline ExperimentReport weak_amv_sweep(const CloudFactory& make, const PointFunction& u, const PointFunction& phi,
                                       std::span<const double> radii, const SweepOptions& opt = {})
{
    return detail::cloud_sweep(detail::PairingKind::weak, make, u, phi, radii, opt);
}

inline ExperimentReport sym_vs_plain_sweep(const CloudFactory& make, const PointFunction& u,
                                           const PointFunction& phi, std::span<const double> radii,
                                           const SweepOptions& opt = {})
{
    return detail::cloud_sweep(detail::PairingKind::defect, make, u, phi, radii, opt);
}

/// Cloud factory for a planar model space, sized so that a test function supported in the
/// disc of radius `support` around the origin keeps `clearance_factor * r_max` from the
/// artificial boundary. Spacing is r / points_per_radius.
inline CloudFactory refining_cloud(const ModelSpace& s, double support, double r_max, double clearance_factor,
                                   double points_per_radius = 4.7)
{
    require(support > 0.0 && r_max > 0.0 && points_per_radius > 1.0, "refining_cloud: bad parameters");
    const double L = support + clearance_factor * r_max + 0.05 * support;
    switch (s.kind()) {
    case ModelSpace::Kind::euclidean:
        require(s.coord_dim() == 2, "point clouds are planar: use euclidean:2");
        return [=](double r) { return clouds::euclidean_square(-L, L, r / points_per_radius); };
    case ModelSpace::Kind::half_space:
        require(s.coord_dim() == 2, "point clouds are planar: use half:2");
        return [=](double r) { return clouds::half_plane(-L, L, L, r / points_per_radius); };
    case ModelSpace::Kind::flat_cone: {
        const double k = 2.0 * std::numbers::pi / s.cone_angle();
        const int ki = static_cast<int>(std::lround(k));
        require(std::abs(k - ki) < 1e-9, "cone clouds need an angle 2pi/k");
        return [=](double r) { return clouds::cone(ki, L, r / points_per_radius); };
    }
    case ModelSpace::Kind::carnot: break;
    }
    throw InputError("refining_cloud: no point cloud for " + s.spec());
}

/// Values: mm-boundary mass of the region at each radius.
inline ExperimentReport mm_boundary_sweep(const ModelSpace& s, const Region& region, std::span<const double> radii,
                                          const SweepOptions& opt = {})
{
    detail::check_radii(radii);
    ExperimentReport rep;
    rep.experiment = "mm-boundary";
    rep.radii.assign(radii.begin(), radii.end());
    rep.values.resize(radii.size());
    rep.std_errors.assign(radii.size(), 0.0);
    parallel_for(radii.size(), [&](std::size_t i) { rep.values[i] = mm_boundary_mass(s, region, radii[i]); });
    rep.metadata = {{"space", s.spec()}};
    if (region.kind == Region::Kind::ball)
        rep.metadata["region"] = {{"ball_center", detail::point_json(region.center)}, {"radius", region.radius}};
    else
        rep.metadata["region"] = {{"strip", {region.lo, region.hi}}};
    finalize(rep, opt);
    return rep;
}

} // namespace amv
