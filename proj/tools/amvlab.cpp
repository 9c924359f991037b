// amvlab command line: runs one experiment per invocation and writes a JSON report
// (plus CSV rows for sweeps) to --out.

#include <CLI11.hpp>
#include <json.hpp>

#include <amvlab/catalog.hpp>
#include <amvlab/dirichlet.hpp>
#include <amvlab/experiments.hpp>
#include <amvlab/identities.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
    std::string command;
    std::string space;
    std::string field;
    std::string phi = "bump:0.5";
    std::string point;
    std::string region = "unit";
    std::string radii;
    std::string scheme = "grid:24";
    std::string grid = "annulus:1:2:50";
    std::string gauge = "koranyi";
    std::string out = "amvlab_report.json";
    std::string u_file, phi_file, mask_file, levels;
    std::uint64_t seed = 1;
    double tolerance = -1.0;       // < 0: command default
    double tolerance_rel = -1.0;
    std::optional<double> reference;
    bool no_reference = false;
    unsigned threads = 1;
    bool fault_inject = false;
    std::size_t count = 200, size_max = 40, directions = 20;
    double points_per_radius = 4.7;
    double radius = 1.0;
    double R = 1.0;

    json to_json() const
    {
        json j{{"command", command}, {"seed", seed}, {"out", out}};
        auto put = [&](const char* k, const std::string& v) {
            if (!v.empty()) j[k] = v;
        };
        put("space", space);
        put("field", field);
        put("point", point);
        put("radii", radii);
        put("scheme", scheme);
        if (tolerance >= 0) j["tolerance"] = tolerance;
        if (tolerance_rel >= 0) j["tolerance_rel"] = tolerance_rel;
        if (reference) j["reference"] = *reference;
        return j;
    }
};

/// Writes <out> (JSON) and, for sweep reports, <out stem>.csv next to it.
void write_report(const RunConfig& cfg, const json& j, const amv::ExperimentReport* rep)
{
    const fs::path out(cfg.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    {
        std::ofstream os(out);
        if (!os) throw amv::InputError("cannot write " + cfg.out);
        os << j.dump(2) << '\n';
    }
    if (rep) {
        fs::path csv = out;
        csv.replace_extension(".csv");
        std::ofstream os(csv);
        amv::write_csv(os, *rep);
    }
}

amv::SweepOptions options(const RunConfig& cfg, std::optional<double> default_ref, amv::Tolerance default_tol)
{
    amv::SweepOptions o;
    o.reference = cfg.reference ? cfg.reference : default_ref;
    if (cfg.no_reference) o.reference.reset();
    o.tolerance = default_tol;
    if (cfg.tolerance >= 0) o.tolerance.absolute = cfg.tolerance;
    if (cfg.tolerance_rel >= 0) o.tolerance.relative_to_max = cfg.tolerance_rel;
    return o;
}

int finish(const RunConfig& cfg, amv::ExperimentReport rep)
{
    rep.metadata["config"] = cfg.to_json();
    write_report(cfg, json(rep), &rep);
    std::ostringstream line;
    line.precision(10);
    line << cfg.command << ": " << amv::to_string(rep.verdict) << " (limit " << rep.fitted_limit;
    if (rep.reference) line << ", reference " << *rep.reference << ", tolerance " << rep.tolerance;
    line << ")";
    std::cout << line.str() << '\n' << "report: " << cfg.out << '\n';
    return rep.verdict == amv::Verdict::fail || rep.verdict == amv::Verdict::inconclusive ? 1 : 0;
}

std::vector<double> radii_or(const RunConfig& cfg, const std::string& fallback)
{
    return amv::catalog::parse_radii(cfg.radii.empty() ? fallback : cfg.radii);
}

amv::ScalarField read_field_file(const std::string& path)
{
    std::ifstream in(path);
    amv::require(static_cast<bool>(in), "cannot open field file '" + path + "'");
    return amv::read_field(in);
}

amv::FiniteMMSpace read_space_file(const std::string& path)
{
    std::ifstream in(path);
    amv::require(static_cast<bool>(in), "cannot open space file '" + path + "'");
    return amv::read_space(in);
}

int run_identities(const RunConfig& cfg)
{
    const auto s = amv::run_identity_suite(cfg.count, cfg.size_max, cfg.seed, cfg.fault_inject);
    const double tol = cfg.tolerance >= 0 ? cfg.tolerance : 1e-12;
    const bool ok = s.max_residual() < tol;
    json j = amv::to_json_summary(s);
    j["tolerance"] = tol;
    j["verdict"] = ok ? "pass" : "fail";
    j["config"] = cfg.to_json();
    j["config"]["count"] = cfg.count;
    j["config"]["size_max"] = cfg.size_max;
    j["config"]["fault_inject"] = cfg.fault_inject;
    write_report(cfg, j, nullptr);
    std::ostringstream line;
    line.precision(4);
    line << "identities: " << (ok ? "pass" : "fail") << " (" << s.instances << " instances, max residual "
         << s.max_residual() << ")";
    std::cout << line.str() << '\n' << "report: " << cfg.out << '\n';
    return ok ? 0 : 1;
}

int run_amv_sweep(const RunConfig& cfg)
{
    const auto s = amv::parse_model_space(cfg.space);
    const auto u = amv::catalog::parse_field(cfg.field, s);
    const Eigen::VectorXd x = cfg.point.empty() ? Eigen::VectorXd::Zero(s.coord_dim()) : amv::catalog::parse_point(cfg.point);
    std::optional<double> ref;
    if (!cfg.reference && !cfg.no_reference) ref = amv::catalog::predicted_limit(s, u, x);
    const auto rep = amv::amv_sweep(s, u, x, radii_or(cfg, "geom:0.5"), amv::parse_scheme(cfg.scheme),
                                    options(cfg, ref, {1e-3, 0.0}));
    return finish(cfg, rep);
}

std::vector<Eigen::VectorXd> parse_grid(const RunConfig& cfg, const amv::ModelSpace& s)
{
    const auto parts = amv::detail::split(cfg.grid, ':');
    if (parts[0] == "annulus" && parts.size() == 4) {
        amv::require(s.kind() == amv::ModelSpace::Kind::carnot, "annulus grids need a carnot space");
        return amv::gauge_annulus_grid(s.group(), s.gauge(), amv::catalog::parse_double(parts[1], "annulus radius"),
                                       amv::catalog::parse_double(parts[2], "annulus radius"),
                                       static_cast<std::size_t>(amv::detail::parse_int(parts[3], "grid count")),
                                       {cfg.seed, 1});
    }
    if (parts[0] == "box" && parts.size() == 4) {
        const double lo = amv::catalog::parse_double(parts[1], "box end"), hi = amv::catalog::parse_double(parts[2], "box end");
        const int k = amv::detail::parse_int(parts[3], "grid count");
        amv::require(k >= 1 && hi > lo && s.coord_dim() == 2, "box grids are k x k planar grids with lo < hi");
        std::vector<Eigen::VectorXd> g;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                g.push_back(Eigen::Vector2d(lo + (hi - lo) * (i + 0.5) / k, lo + (hi - lo) * (j + 0.5) / k));
        return g;
    }
    throw amv::InputError("unknown grid '" + cfg.grid + "' (annulus:lo:hi:n or box:lo:hi:k)");
}

int run_strong_scan(const RunConfig& cfg)
{
    const auto s = amv::parse_model_space(cfg.space);
    const auto u = amv::catalog::parse_field(cfg.field, s);
    const auto grid = parse_grid(cfg, s);
    const auto rep = amv::strong_amv_scan(s, u, grid, radii_or(cfg, "geom:0.4"), amv::parse_scheme(cfg.scheme),
                                          options(cfg, 0.0, {0.0, 5e-3}));
    return finish(cfg, rep);
}

int run_pairing_sweep(const RunConfig& cfg, bool weak)
{
    if (cfg.space.rfind("file:", 0) == 0) {
        amv::require(!cfg.u_file.empty() && !cfg.phi_file.empty(), "file spaces need --u-file and --phi-file");
        const auto sp = read_space_file(cfg.space.substr(5));
        const auto u = read_field_file(cfg.u_file), phi = read_field_file(cfg.phi_file);
        amv::require(!cfg.radii.empty(), "file spaces need explicit --radii");
        const auto radii = amv::catalog::parse_radii(cfg.radii);
        const auto opt = options(cfg, 0.0, {1e-3, 0.0});
        auto rep = weak ? amv::weak_amv_sweep(sp, {}, u, phi, radii, opt) : amv::sym_vs_plain_sweep(sp, {}, u, phi, radii, opt);
        return finish(cfg, rep);
    }
    const auto s = amv::parse_model_space(cfg.space);
    const auto u = amv::catalog::parse_field(cfg.field, s);
    const auto phi = amv::catalog::parse_test_function(cfg.phi);
    const auto radii = radii_or(cfg, "geom:0.2:5");
    const auto make = amv::refining_cloud(s, phi.support, radii.front(), weak ? 1.0 : 2.0, cfg.points_per_radius);
    std::optional<double> ref = 0.0;
    if (!weak && s.kind() == amv::ModelSpace::Kind::half_space) ref.reset();
    const auto opt = options(cfg, ref, {1e-3, 0.0});
    const amv::PointFunction uf = [&u](const Eigen::VectorXd& p) { return u(p); };
    auto rep = weak ? amv::weak_amv_sweep(make, uf, phi.f, radii, opt) : amv::sym_vs_plain_sweep(make, uf, phi.f, radii, opt);
    rep.metadata["space"] = s.spec();
    rep.metadata["field"] = u.name();
    rep.metadata["phi"] = phi.name;
    rep.metadata["points_per_radius"] = cfg.points_per_radius;
    return finish(cfg, rep);
}

int run_mm_boundary(const RunConfig& cfg)
{
    const auto s = amv::parse_model_space(cfg.space);
    const auto region = amv::catalog::parse_region(cfg.region, s);
    const double ref = amv::catalog::mm_boundary_reference(s, region);
    const amv::Tolerance tol = ref > 0.0 ? amv::Tolerance{0.02 * ref, 0.0} : amv::Tolerance{1e-3, 0.0};
    const auto rep = amv::mm_boundary_sweep(s, region, radii_or(cfg, "geom:0.1"), options(cfg, ref, tol));
    return finish(cfg, rep);
}

int run_carnot_constant(const RunConfig& cfg)
{
    const auto g = amv::parse_carnot_preset(cfg.space);
    const auto gauge = amv::parse_gauge(amv::detail::split(cfg.gauge, ':'));
    const auto scheme = amv::parse_scheme(cfg.scheme);
    const amv::Estimate e = amv::carnot_constant_C(g, gauge, scheme);
    json j{{"C", e}, {"group_dim", g.dim()}, {"gauge", gauge.name()}, {"config", cfg.to_json()}};
    std::string verdict = "unchecked";
    double tol = 0;
    if (cfg.reference) {
        tol = cfg.tolerance >= 0 ? cfg.tolerance : std::max(1e-3 * std::abs(*cfg.reference), 3.0 * e.std_error);
        verdict = std::abs(e.value - *cfg.reference) <= tol ? "pass" : "fail";
        j["reference"] = *cfg.reference;
        j["tolerance"] = tol;
    }
    j["verdict"] = verdict;
    write_report(cfg, j, nullptr);
    std::ostringstream line;
    line.precision(10);
    line << "carnot-constant: " << verdict << " (C " << e.value << " +- " << e.std_error << ")";
    std::cout << line.str() << '\n' << "report: " << cfg.out << '\n';
    return verdict == "fail" ? 1 : 0;
}

int run_isotropy(const RunConfig& cfg)
{
    const auto g = amv::parse_carnot_preset(cfg.space);
    const auto gauge = amv::parse_gauge(amv::detail::split(cfg.gauge, ':'));
    amv::CounterRng rng({cfg.seed, 7});
    std::vector<Eigen::VectorXd> dirs;
    for (std::size_t k = 0; k < cfg.directions; ++k) {
        Eigen::VectorXd a(g.v1());
        for (int i = 0; i < g.v1(); ++i) a[i] = rng.normal();
        dirs.push_back(a / a.norm());
    }
    const auto est = amv::isotropy_check(g, gauge, dirs, amv::parse_scheme(cfg.scheme));
    double lo = est.front().value, hi = lo;
    for (const auto& e : est) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
    }
    const double tol = cfg.tolerance >= 0 ? cfg.tolerance : 0.01;
    const bool ok = hi / lo <= 1.0 + tol;
    json j{{"estimates", est}, {"max_over_min", hi / lo}, {"tolerance", tol}, {"verdict", ok ? "pass" : "fail"},
           {"config", cfg.to_json()}};
    write_report(cfg, j, nullptr);
    std::ostringstream line;
    line.precision(8);
    line << "isotropy: " << (ok ? "pass" : "fail") << " (max/min " << hi / lo << ")";
    std::cout << line.str() << '\n' << "report: " << cfg.out << '\n';
    return ok ? 0 : 1;
}

int run_dirichlet(const RunConfig& cfg)
{
    amv::require(!cfg.mask_file.empty(), "dirichlet needs --mask");
    const auto sp = read_space_file(cfg.space);
    std::ifstream mi(cfg.mask_file);
    amv::require(static_cast<bool>(mi), "cannot open mask file '" + cfg.mask_file + "'");
    const auto part = amv::read_boundary_mask(mi);
    amv::SolveInfo info;
    const auto u = amv::solve(sp, part, amv::Radius(cfg.radius), &info);
    fs::path field_path(cfg.out);
    field_path.replace_extension(".field");
    {
        if (field_path.has_parent_path()) fs::create_directories(field_path.parent_path());
        std::ofstream os(field_path);
        amv::write_field(os, u);
    }
    const amv::BallTable t(sp, amv::Radius(cfg.radius));
    json j{{"method", info.method}, {"iterations", info.iterations}, {"residual", info.residual},
           {"scale", info.scale}, {"energy", amv::total_energy(t, u, u)}, {"solution", u},
           {"solution_file", field_path.string()}, {"config", cfg.to_json()}, {"verdict", "pass"}};
    j["config"]["mask"] = cfg.mask_file;
    j["config"]["radius"] = cfg.radius;
    const auto hits = amv::radius_collisions(sp, amv::Radius(cfg.radius));
    j["radius_collisions"] = hits.size();
    if (!hits.empty())
        std::cerr << "amvlab dirichlet: " << hits.size() << " pair(s) at distance exactly r (first " << hits.front().first
                  << "," << hits.front().second << "); open balls exclude them\n";
    write_report(cfg, j, nullptr);
    std::ostringstream line;
    line.precision(4);
    line << "dirichlet: pass (residual " << info.residual << ", " << info.method << ")";
    std::cout << line.str() << '\n' << "report: " << cfg.out << '\n';
    return 0;
}

int run_bpz_demo(const RunConfig& cfg)
{
    const auto g = amv::parse_carnot_preset(cfg.space);
    const auto gauge = amv::parse_gauge(amv::detail::split(cfg.gauge, ':'));
    const auto s = amv::ModelSpace::carnot(g, gauge);
    const auto u = amv::catalog::parse_field(cfg.field.empty() ? "affine:0.3,-0.7:0.2" : cfg.field, s);
    std::vector<amv::BpzLevel> levels;
    for (const auto& lv : amv::detail::split(cfg.levels.empty() ? "4:0.55,6:0.37,8:0.275" : cfg.levels, ',')) {
        const auto p = amv::detail::split(lv, ':');
        amv::require(p.size() == 2, "levels are resolution:r pairs");
        levels.push_back({amv::detail::parse_int(p[0], "resolution"), amv::catalog::parse_double(p[1], "radius")});
    }
    const auto rep = amv::bpz_demo(g, gauge, u, cfg.R, levels, options(cfg, 0.0, {1e-3, 0.0}));
    return finish(cfg, rep);
}

int run_recheck(const std::string& path)
{
    std::ifstream in(path);
    amv::require(static_cast<bool>(in), "cannot open report '" + path + "'");
    const auto rep = json::parse(in).get<amv::ExperimentReport>();
    const bool ok = amv::recheck(rep);
    std::cout << "recheck: " << (ok ? "consistent" : "inconsistent") << " (" << amv::to_string(rep.verdict) << ")\n"
              << "report: " << path << '\n';
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"amvlab: finite-scale Laplacians on metric measure spaces"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string report_path;

    auto common = [&](CLI::App* sc) {
        sc->add_option("--out", cfg.out, "report path (JSON; CSV written alongside)");
        sc->add_option("--seed", cfg.seed, "random seed");
        sc->add_option("--threads", cfg.threads, "worker threads (never changes results)");
        sc->add_option("--tolerance", cfg.tolerance, "absolute tolerance override");
    };
    auto sweep = [&](CLI::App* sc) {
        common(sc);
        sc->add_option("--radii", cfg.radii, "r1,r2,... decreasing, or geom:r0[:count]");
        sc->add_option("--tolerance-rel", cfg.tolerance_rel, "tolerance relative to the largest value");
        sc->add_option_function<double>("--reference", [&](double v) { cfg.reference = v; }, "reference limit");
        sc->add_flag("--no-reference", cfg.no_reference, "report without a verdict");
    };

    auto* ids = app.add_subcommand("identities", "exact identity suite on random finite spaces");
    common(ids);
    ids->add_option("--count", cfg.count, "number of instances");
    ids->add_option("--size-max", cfg.size_max, "largest space size");
    ids->add_flag("--fault-inject", cfg.fault_inject, "perturb one mass on the re-evaluation side");

    auto* amvs = app.add_subcommand("amv-sweep", "r-laplacian of a field at a point across radii");
    sweep(amvs);
    amvs->add_option("space", cfg.space, "space spec")->required();
    amvs->add_option("--field", cfg.field, "field name")->required();
    amvs->add_option("--point", cfg.point, "point, comma separated");
    amvs->add_option("--scheme", cfg.scheme, "mc:n:seed or grid:res");

    auto* ss = app.add_subcommand("strong-scan", "sup of |r-laplacian| over a point grid");
    sweep(ss);
    ss->add_option("space", cfg.space, "space spec")->required();
    ss->add_option("--field", cfg.field, "field name")->required();
    ss->add_option("--grid", cfg.grid, "annulus:lo:hi:n or box:lo:hi:k");
    ss->add_option("--scheme", cfg.scheme, "mc:n:seed or grid:res");

    for (const char* name : {"weak-sweep", "sym-vs-plain"}) {
        auto* sc = app.add_subcommand(name, std::string(name) == "weak-sweep"
                                                ? "pairing of a test function with the r-laplacian on point clouds"
                                                : "pairing of a test function with the plain minus symmetrized r-laplacian");
        sweep(sc);
        sc->add_option("space", cfg.space, "planar space spec, or file:<space file>")->required();
        sc->add_option("--field", cfg.field, "field name (cloud coordinates)");
        sc->add_option("--phi", cfg.phi, "bump:R, plateau:R1:R2 or zero");
        sc->add_option("--points-per-radius", cfg.points_per_radius, "r / grid spacing");
        sc->add_option("--u-file", cfg.u_file, "field file for file spaces");
        sc->add_option("--phi-file", cfg.phi_file, "test function file for file spaces");
    }

    auto* mm = app.add_subcommand("mm-boundary", "mm-boundary mass of a region across radii");
    sweep(mm);
    mm->add_option("space", cfg.space, "space spec")->required();
    mm->add_option("--region", cfg.region, "unit, strip:a:b or ball:c:R");

    auto* cc = app.add_subcommand("carnot-constant", "C = mean of ||z1||^2 / (2 v1) over the unit gauge ball");
    common(cc);
    cc->add_option("group", cfg.space, "preset (heisenberg:1, h2, @file)")->required();
    cc->add_option("gauge", cfg.gauge, "koranyi, folland or scaled:beta");
    cc->add_option("--scheme", cfg.scheme, "mc:n:seed or grid:res");
    cc->add_option_function<double>("--reference", [&](double v) { cfg.reference = v; }, "reference value");

    auto* iso = app.add_subcommand("isotropy", "mean of <a, z1>^2 over random horizontal directions");
    common(iso);
    iso->add_option("group", cfg.space, "preset")->required();
    iso->add_option("gauge", cfg.gauge, "gauge");
    iso->add_option("--directions", cfg.directions, "number of directions");
    iso->add_option("--scheme", cfg.scheme, "mc:n:seed or grid:res");

    auto* dir = app.add_subcommand("dirichlet", "discrete Dirichlet problem on a finite space");
    common(dir);
    dir->add_option("space", cfg.space, "space file")->required();
    dir->add_option("--mask", cfg.mask_file, "boundary mask file")->required();
    dir->add_option("--radius", cfg.radius, "scale r")->required();

    auto* bpz = app.add_subcommand("bpz-demo", "Dirichlet problem on a lattice gauge ball against a harmonic field");
    sweep(bpz);
    bpz->add_option("group", cfg.space, "preset")->required();
    bpz->add_option("gauge", cfg.gauge, "gauge");
    bpz->add_option("--field", cfg.field, "boundary field");
    bpz->add_option("--R", cfg.R, "gauge ball radius");
    bpz->add_option("--levels", cfg.levels, "res:r,res:r,... with r decreasing");

    auto* rc = app.add_subcommand("recheck", "re-derive the verdict of a stored sweep report");
    rc->add_option("report", report_path, "report JSON")->required();

    CLI11_PARSE(app, argc, argv);
    amv::set_thread_count(cfg.threads);
    auto* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    try {
        if (cfg.command == "identities") return run_identities(cfg);
        if (cfg.command == "amv-sweep") return run_amv_sweep(cfg);
        if (cfg.command == "strong-scan") return run_strong_scan(cfg);
        if (cfg.command == "weak-sweep") return run_pairing_sweep(cfg, true);
        if (cfg.command == "sym-vs-plain") return run_pairing_sweep(cfg, false);
        if (cfg.command == "mm-boundary") return run_mm_boundary(cfg);
        if (cfg.command == "carnot-constant") return run_carnot_constant(cfg);
        if (cfg.command == "isotropy") return run_isotropy(cfg);
        if (cfg.command == "dirichlet") return run_dirichlet(cfg);
        if (cfg.command == "bpz-demo") return run_bpz_demo(cfg);
        if (cfg.command == "recheck") return run_recheck(report_path);
    } catch (const std::exception& e) {
        std::cerr << "amvlab " << cfg.command << ": " << e.what() << '\n' << "config: " << cfg.to_json().dump() << '\n';
        return 2;
    }
    return 2;
}
