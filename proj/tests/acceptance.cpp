// Acceptance harness: one PASS/FAIL line per criterion.
// Criteria 1-9 run at --threads N and again at --threads 1 (plus a repeat at N);
// criterion 10 compares the serialized results bitwise.

#include <amvlab/carnot_calculus.hpp>
#include <amvlab/dirichlet.hpp>
#include <amvlab/experiments.hpp>
#include <amvlab/identities.hpp>
#include <amvlab/parallel.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

using namespace amv;
using nlohmann::json;
using std::numbers::pi;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
    json report = json::object();
};

struct Criterion {
    int id;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Eigen::VectorXd vec(std::initializer_list<double> a)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    Eigen::Index i = 0;
    for (double x : a) v[i++] = x;
    return v;
}

PointFunction bump(double R)
{
    return [R](const Eigen::VectorXd& p) { return std::max(0.0, 1.0 - p.norm() / R); };
}

PointFunction plateau(double a, double b)
{
    return [a, b](const Eigen::VectorXd& p) {
        const double d = p.norm();
        return d <= a ? 1.0 : (d >= b ? 0.0 : (b - d) / (b - a));
    };
}

GPoint random_point(const CarnotStep2& g, CounterRng& rng, double lo, double hi)
{
    GPoint p = g.identity();
    for (int i = 0; i < g.v1(); ++i) p.z1[i] = rng.uniform(lo, hi);
    for (int k = 0; k < g.v2(); ++k) p.z2[k] = rng.uniform(lo, hi);
    return p;
}

double max_abs_diff(const GPoint& a, const GPoint& b) { return (a.flat() - b.flat()).cwiseAbs().maxCoeff(); }

Outcome identity_suite()
{
    const auto s = run_identity_suite(200, 40, 2024);
    Outcome o;
    o.ok = s.instances == 200 && s.max_residual() < 1e-12;
    o.detail = "200 spaces, max relative residual " + fmt("%.2e", s.max_residual());
    o.report = to_json_summary(s);
    return o;
}

Outcome euclidean_constant()
{
    Outcome o;
    o.report = json::array();
    double worst_grid = 0.0, worst_sigma = 0.0;
    for (const int n : {2, 3}) {
        const auto s = ModelSpace::euclidean(n);
        const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, 0.3, -0.2);
        const std::vector<std::pair<AnalyticField, double>> cases{
            {fields::norm_squared(n, n), 2.0 * n / (2.0 * (n + 2))},
            {fields::coordinate_squared(n, 0), 2.0 / (2.0 * (n + 2))},
        };
        for (std::size_t c = 0; c < cases.size(); ++c) {
            const auto& [u, want] = cases[c];
            const auto radii = default_radii(0.5, 5);
            const auto grid = amv_sweep(s, u, x, radii, Grid{16});
            const auto mc = amv_sweep(s, u, x, radii, MonteCarlo{200000, {static_cast<std::uint64_t>(100 + 10 * n + c), 0}});
            for (std::size_t i = 0; i < radii.size(); ++i) {
                worst_grid = std::max(worst_grid, std::abs(grid.values[i] - want) / want);
                worst_sigma = std::max(worst_sigma, std::abs(mc.values[i] - want) / mc.std_errors[i]);
            }
            o.report.push_back(grid);
            o.report.push_back(mc);
        }
    }
    o.ok = worst_grid < 1e-6 && worst_sigma <= 3.0;
    o.detail = "grid relative error " + fmt("%.2e", worst_grid) + ", MC worst deviation " + fmt("%.2f", worst_sigma) +
               " standard errors";
    return o;
}

Outcome carnot_constant()
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto gauge = Gauge::koranyi();
    const double C = 1.0 / (3.0 * pi);
    const auto [mc, grid] = carnot_constant_C_checked(g, gauge, MonteCarlo{10000000, {31, 0}}, Grid{24});
    const double err_mc = std::abs(mc.value - C) / C, err_grid = std::abs(grid.value - C) / C;
    const bool consistent = std::abs(mc.value - grid.value) <= 4.0 * mc.std_error;

    const auto s = ModelSpace::carnot(g, gauge);
    const auto sweep = amv_sweep(s, fields::norm_squared(3, 2), Eigen::VectorXd::Zero(3), default_radii(1.0, 6), Grid{24});
    double worst = 0.0;
    for (const double v : sweep.values) worst = std::max(worst, std::abs(v - 4 * C) / (4 * C));

    Outcome o;
    o.ok = err_mc < 1e-3 && err_grid < 1e-3 && consistent && worst < 1e-3;
    o.detail = "C mc " + fmt("%.7f", mc.value) + " grid " + fmt("%.7f", grid.value) + " vs 1/(3pi) " + fmt("%.7f", C) +
               ", sweep worst relative error " + fmt("%.2e", worst);
    o.report = {{"mc", mc}, {"grid", grid}, {"sweep", sweep}};
    return o;
}

Outcome strong_scan()
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto gauge = Gauge::koranyi();
    const auto s = ModelSpace::carnot(g, gauge);
    const auto grid = gauge_annulus_grid(g, gauge, 1.0, 2.0, 50);
    SweepOptions opt;
    opt.reference = 0.0;
    opt.tolerance = {0.0, 5e-3};
    const auto radii = default_radii(0.4, 8);
    const auto pos = strong_amv_scan(s, fields::folland_kernel(g), grid, radii, Grid{24}, opt);
    const auto neg = strong_amv_scan(s, fields::norm_squared(3, 2), grid, radii, Grid{24}, opt);
    const bool monotone = pos.checks["monotone"].get<bool>();

    Outcome o;
    o.ok = monotone && pos.verdict == Verdict::pass && neg.verdict == Verdict::fail;
    o.detail = std::string("folland ") + to_string(pos.verdict) + " (limit " + fmt("%.2e", pos.fitted_limit) + ", tolerance " +
               fmt("%.2e", pos.tolerance) + (monotone ? ", monotone" : ", not monotone") + "), normsq control " +
               to_string(neg.verdict) + " (limit " + fmt("%.5f", neg.fitted_limit) + ")";
    o.report = {{"folland", pos}, {"control", neg}};
    return o;
}

Outcome sym_vs_plain()
{
    SweepOptions zero;
    zero.reference = 0.0;
    zero.tolerance = {1e-3, 0.0};

    const PointFunction smooth = [](const Eigen::VectorXd& p) { return p[0] * p[0] + std::sin(p[1]); };
    const auto flat = sym_vs_plain_sweep(refining_cloud(ModelSpace::euclidean(2), 0.5, 0.2, 2.0), smooth, bump(0.5),
                                         default_radii(0.2, 3), zero);
    const PointFunction radial = [](const Eigen::VectorXd& p) { return p.squaredNorm(); };
    const auto cone = sym_vs_plain_sweep(refining_cloud(ModelSpace::flat_cone(pi), 0.5, 0.2, 2.0), radial, bump(0.5),
                                         default_radii(0.2, 4), zero);
    const PointFunction height = [](const Eigen::VectorXd& p) { return p[1]; };
    const auto half = sym_vs_plain_sweep(refining_cloud(ModelSpace::half_space(2), 1.25, 0.1, 2.0), height,
                                         plateau(1.0, 1.25), default_radii(0.1, 3));

    Outcome o;
    o.ok = flat.verdict == Verdict::pass && std::abs(flat.fitted_limit) < flat.tolerance && cone.verdict == Verdict::pass &&
           std::abs(cone.fitted_limit) < cone.tolerance && std::abs(half.fitted_limit) > 0.05;
    o.detail = "euclidean " + fmt("%.2e", flat.fitted_limit) + ", cone(pi) " + fmt("%.2e", cone.fitted_limit) +
               " (tolerance " + fmt("%.0e", cone.tolerance) + "), half-plane " + fmt("%.5f", half.fitted_limit);
    o.report = {{"euclidean", flat}, {"cone", cone}, {"half", half}};
    return o;
}

Outcome mm_boundary()
{
    const double kappa = 2.0 / (3.0 * pi);
    SweepOptions zero;
    zero.reference = 0.0;
    const auto flat = mm_boundary_sweep(ModelSpace::euclidean(2), Region::ball(vec({0, 0}), 1.0), default_radii(0.1, 4), zero);
    SweepOptions half_opt;
    half_opt.reference = kappa;
    half_opt.tolerance = {0.02 * kappa, 0.0};
    const auto half = mm_boundary_sweep(ModelSpace::half_space(2), Region::strip(0, 1), default_radii(0.1, 4), half_opt);
    const auto cone = mm_boundary_sweep(ModelSpace::flat_cone(pi), Region::ball(vec({0, 0}), 1.0), default_radii(0.1, 5), zero);

    double flat_worst = 0.0;
    for (const double v : flat.values) flat_worst = std::max(flat_worst, std::abs(v));
    const double rate = cone.fitted_rate.value_or(0.0);

    Outcome o;
    o.ok = flat_worst <= 1e-12 && half.verdict == Verdict::pass && std::abs(half.fitted_limit - kappa) <= 0.02 * kappa &&
           cone.fitted_rate.has_value() && std::abs(rate - 1.0) <= 0.2;
    o.detail = "euclidean max " + fmt("%.1e", flat_worst) + ", half-plane " + fmt("%.6f", half.fitted_limit) + " vs " +
               fmt("%.6f", kappa) + ", cone rate " + fmt("%.3f", rate);
    o.report = {{"euclidean", flat}, {"half", half}, {"cone", cone}};
    return o;
}

Outcome dirichlet_stationarity()
{
    Outcome o;
    o.report = json::array();
    double worst_res = 0.0;
    bool max_principle = true, minimizer = true;
    for (std::uint64_t inst = 0; inst < 50; ++inst) {
        CounterRng rng(SeedSpec{707, 0}, inst);
        const std::size_t n = 30;
        const auto s = random_space(rng, n);
        std::vector<bool> mask(n);
        ScalarField g(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            mask[i] = i % 3 == 0;
            if (mask[i]) g[i] = rng.uniform(-1, 1);
        }
        const auto part = BoundaryPartition::from_mask(mask, g);
        const BallTable t(s, Radius(1.0));
        SolveInfo info;
        const auto u = solve(t, part, &info);

        double gmin = 1e300, gmax = -1e300;
        for (const auto b : part.boundary) {
            gmin = std::min(gmin, g[b]);
            gmax = std::max(gmax, g[b]);
        }
        const auto lap = sym_r_laplacian(t, u);
        for (const auto i : part.interior) {
            worst_res = std::max(worst_res, std::abs(lap[i]) / info.scale);
            if (u[i] < gmin || u[i] > gmax) max_principle = false;
        }
        const double e0 = total_energy(t, u, u);
        for (int k = 0; k < 100; ++k) {
            ScalarField v = u;
            const double eps = std::pow(10.0, rng.uniform(-3, 0));
            for (const auto i : part.interior) v[i] += eps * rng.uniform(-1, 1);
            if (!(total_energy(t, v, v) > e0)) minimizer = false;
        }
        o.report.push_back({{"u", u}, {"energy", e0}, {"method", info.method}, {"residual", info.residual}});
    }
    o.ok = worst_res <= 1e-10 && max_principle && minimizer;
    o.detail = "50 instances, worst residual/scale " + fmt("%.2e", worst_res) +
               (max_principle ? ", maximum principle holds" : ", maximum principle violated") +
               (minimizer ? ", all perturbations raise E" : ", a perturbation did not raise E");
    return o;
}

Outcome isotropy()
{
    const auto g = CarnotStep2::heisenberg(1);
    CounterRng rng(SeedSpec{808, 0}, 0);
    std::vector<Eigen::VectorXd> dirs;
    for (int k = 0; k < 20; ++k) {
        const double a = rng.uniform(0, 2 * pi);
        dirs.push_back(vec({std::cos(a), std::sin(a)}));
    }
    const auto est = isotropy_check(g, Gauge::koranyi(), dirs, MonteCarlo{10000000, {809, 0}});
    const double want = 2.0 / (3.0 * pi);
    double lo = 1e300, hi = -1e300, worst = 0.0;
    for (const auto& e : est) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
        worst = std::max(worst, std::abs(e.value - want) / want);
    }
    Outcome o;
    o.ok = est.size() == 20 && hi / lo <= 1.01 && worst < 0.01;
    o.detail = "max/min " + fmt("%.5f", hi / lo) + ", worst relative error " + fmt("%.2e", worst);
    o.report = est;
    return o;
}

Outcome group_properties()
{
    struct Case {
        CarnotStep2 g;
        Gauge gauge;
    };
    const std::vector<Case> cases{{CarnotStep2::heisenberg(1), Gauge::koranyi()},
                                  {CarnotStep2::heisenberg(2), Gauge::scaled_koranyi(16)}};
    double alg = 0.0, diff = 0.0;
    bool pseudonorm = true, triangle = true;
    const int per_case = 5000;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& [g, gauge] = cases[c];
        const auto u = fields::gauge_power(g, c == 0 ? 1.0 : 16.0, 3.0);
        CounterRng rng(SeedSpec{909, 0}, c);
        for (int k = 0; k < per_case; ++k) {
            const GPoint x = random_point(g, rng, -2, 2), y = random_point(g, rng, -2, 2), z = random_point(g, rng, -2, 2);
            const double scale = 1.0 + x.flat().squaredNorm() + y.flat().squaredNorm() + z.flat().squaredNorm();
            alg = std::max(alg, max_abs_diff(g.multiply(g.multiply(x, y), z), g.multiply(x, g.multiply(y, z))) / scale);
            alg = std::max(alg, max_abs_diff(g.multiply(x, g.inverse(x)), g.identity()) / scale);
            alg = std::max(alg, max_abs_diff(g.multiply(g.inverse(x), x), g.identity()) / scale);

            const double t = rng.uniform(0.1, 3.0);
            const double nx = gauge.value(x);
            if (!(nx > 0.0) || gauge.value(g.identity()) != 0.0) pseudonorm = false;
            alg = std::max(alg, std::abs(gauge.value(g.inverse(x)) - nx) / nx);
            alg = std::max(alg, std::abs(gauge.value(g.dilate(t, x)) - t * nx) / (t * nx));

            const double dxy = gauge_distance(g, gauge, x, y);
            alg = std::max(alg, std::abs(gauge_distance(g, gauge, y, x) - dxy) / dxy);
            alg = std::max(alg, std::abs(gauge_distance(g, gauge, g.multiply(z, x), g.multiply(z, y)) - dxy) / dxy);
            if (c == 0 && dxy > (gauge_distance(g, gauge, x, z) + gauge_distance(g, gauge, z, y)) * (1 + 1e-12)) triangle = false;

            // X_j (u o L_z)(x) by central differences along the flow, against X_j u at z x.
            const auto uz = u.left_translated(g, z);
            const GPoint w = random_point(g, rng, 0.5, 1.5);
            for (int j = 0; j < g.v1(); ++j) {
                const double h = 1e-5;
                GPoint e = g.identity();
                e.z1[j] = h;
                GPoint em = g.identity();
                em.z1[j] = -h;
                const double fd = (uz.value(g.multiply(w, e)) - uz.value(g.multiply(w, em))) / (2 * h);
                const double exact = left_field(g, j, u, g.multiply(z, w));
                diff = std::max(diff, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
            }
        }
    }
    Outcome o;
    o.ok = alg <= 1e-12 && diff <= 1e-5 && pseudonorm && triangle;
    o.detail = "10000 instances, algebraic " + fmt("%.2e", alg) + ", differential " + fmt("%.2e", diff) +
               (pseudonorm ? "" : ", pseudonorm positivity violated") + (triangle ? "" : ", koranyi triangle violated");
    o.report = {{"algebraic", alg}, {"differential", diff}};
    return o;
}

struct RunResult {
    std::vector<Outcome> outcomes;
    std::vector<double> seconds;
};

RunResult run_all(const std::vector<Criterion>& crit, unsigned threads)
{
    set_thread_count(threads);
    RunResult r;
    for (const auto& c : crit) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        r.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        r.outcomes.push_back(std::move(o));
    }
    return r;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"amvlab acceptance criteria"};
    unsigned threads = 4;
    bool skip_determinism = false;
    app.add_option("--threads", threads, "worker threads for the primary run");
    app.add_flag("--skip-determinism", skip_determinism, "run criteria 1-9 once and skip criterion 10");
    CLI11_PARSE(app, argc, argv);
    threads = std::max(1u, threads);

    const std::vector<Criterion> crit{
        {1, 30, identity_suite},  {2, 60, euclidean_constant},   {3, 300, carnot_constant},
        {4, 600, strong_scan},    {5, 300, sym_vs_plain},        {6, 120, mm_boundary},
        {7, 120, dirichlet_stationarity}, {8, 300, isotropy},    {9, 60, group_properties},
    };

    const auto primary = run_all(crit, threads);
    bool all = true;
    for (std::size_t i = 0; i < crit.size(); ++i) {
        const auto& o = primary.outcomes[i];
        const bool in_time = primary.seconds[i] <= crit[i].budget_s;
        const bool ok = o.ok && in_time;
        all = all && ok;
        std::printf("criterion %d: %s (%s; %.1f s of %.0f s budget%s)\n", crit[i].id, ok ? "PASS" : "FAIL", o.detail.c_str(),
                    primary.seconds[i], crit[i].budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }

    if (skip_determinism) {
        std::printf("criterion 10: FAIL (skipped by request)\n");
        return 1;
    }
    const auto repeat = run_all(crit, threads);
    const auto serial = run_all(crit, 1);
    std::vector<int> differ;
    for (std::size_t i = 0; i < crit.size(); ++i) {
        const auto a = primary.outcomes[i].report.dump();
        if (a != repeat.outcomes[i].report.dump() || a != serial.outcomes[i].report.dump() ||
            primary.outcomes[i].ok != serial.outcomes[i].ok)
            differ.push_back(crit[i].id);
    }
    std::string which;
    for (const int d : differ) which += (which.empty() ? "" : ",") + std::to_string(d);
    const bool det = differ.empty();
    all = all && det;
    std::printf("criterion 10: %s (%s across two runs at %u threads and one at 1 thread)\n", det ? "PASS" : "FAIL",
                det ? "reports bitwise identical" : ("reports differ for criteria " + which).c_str(), threads);
    return all ? 0 : 1;
}
