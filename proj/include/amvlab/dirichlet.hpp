#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "carnot.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "fields.hpp"
#include "mmspace.hpp"
#include "parallel.hpp"

namespace amv {

/// Interior/boundary split of a finite space with boundary data g (read on boundary points only).
struct BoundaryPartition {
    std::vector<std::size_t> interior;
    std::vector<std::size_t> boundary;
    ScalarField g;   ///< one value per point of the space

    /// From a mask: is_boundary[i] selects the boundary.
    static BoundaryPartition from_mask(const std::vector<bool>& is_boundary, ScalarField g)
    {
        require(g.size() == is_boundary.size(), "boundary data must have one value per point");
        BoundaryPartition p;
        for (std::size_t i = 0; i < is_boundary.size(); ++i) (is_boundary[i] ? p.boundary : p.interior).push_back(i);
        p.g = std::move(g);
        return p;
    }

    void validate(std::size_t n) const
    {
        require(g.size() == n, "boundary data must have one value per point");
        require(!boundary.empty(), "partition needs at least one boundary point");
        std::vector<int> seen(n, 0);
        for (const std::size_t i : interior) {
            require(i < n, "partition index out of range");
            ++seen[i];
        }
        for (const std::size_t i : boundary) {
            require(i < n, "partition index out of range");
            ++seen[i];
        }
        for (std::size_t i = 0; i < n; ++i) require(seen[i] == 1, "interior and boundary must be disjoint and cover the space");
        for (const std::size_t i : boundary) require(std::isfinite(g[i]), "boundary data must be finite");
    }
};

/// Mask file: one line per point, "I" or "B <value>"; '#' starts a comment.
inline BoundaryPartition read_boundary_mask(std::istream& is)
{
    std::vector<bool> mask;
    ScalarField g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "I") {
            mask.push_back(false);
            g.push_back(0.0);
        } else if (tag == "B") {
            double v;
            if (!(ls >> v)) throw InputError("mask line " + std::to_string(lineno) + ": B needs a value");
            mask.push_back(true);
            g.push_back(v);
        } else {
            throw InputError("mask line " + std::to_string(lineno) + ": expected I or B");
        }
        std::string rest;
        if (ls >> rest) throw InputError("mask line " + std::to_string(lineno) + ": trailing text");
    }
    return BoundaryPartition::from_mask(mask, std::move(g));
}

inline void write_boundary_mask(std::ostream& os, const BoundaryPartition& p)
{
    std::vector<char> is_b(p.g.size(), 0);
    for (const std::size_t i : p.boundary) is_b[i] = 1;
    os.precision(17);
    for (std::size_t i = 0; i < p.g.size(); ++i) {
        if (is_b[i]) os << "B " << p.g[i] << '\n';
        else os << "I\n";
    }
}

struct SolveInfo {
    std::string method;        ///< "ldlt" or "cg"
    int iterations = 0;
    double residual = 0.0;     ///< max over interior of |sym Delta_r u|
    double scale = 0.0;        ///< max |g| over the boundary
};

namespace detail {

/// Interior points not linked to the boundary through r-chains inside the interior.
inline std::vector<std::size_t> orphan_component(const BallTable& t, const std::vector<int>& slot)
{
    const std::size_t n = t.size();
    std::vector<char> reached(n, 0);
    std::queue<std::size_t> q;
    for (std::size_t x = 0; x < n; ++x) {
        if (slot[x] >= 0) continue;
        for (const std::size_t y : t.members(x))
            if (slot[y] >= 0 && !reached[y]) {
                reached[y] = 1;
                q.push(y);
            }
    }
    while (!q.empty()) {
        const std::size_t x = q.front();
        q.pop();
        for (const std::size_t y : t.members(x))
            if (slot[y] >= 0 && !reached[y]) {
                reached[y] = 1;
                q.push(y);
            }
    }
    // first unreached interior point and everything connected to it
    for (std::size_t s = 0; s < n; ++s) {
        if (slot[s] < 0 || reached[s]) continue;
        std::vector<std::size_t> comp{s};
        reached[s] = 1;
        for (std::size_t k = 0; k < comp.size(); ++k)
            for (const std::size_t y : t.members(comp[k]))
                if (slot[y] >= 0 && !reached[y]) {
                    reached[y] = 1;
                    comp.push_back(y);
                }
        std::sort(comp.begin(), comp.end());
        return comp;
    }
    return {};
}

} // namespace detail

/// Minimizer of E_r(u, u) among fields equal to g on the boundary, i.e. the solution of
/// sym Delta_r u = 0 on the interior. The table may carry ambient ball masses.
inline ScalarField solve(const BallTable& t, const BoundaryPartition& part, SolveInfo* info = nullptr)
{
    const std::size_t n = t.size();
    part.validate(n);
    std::vector<int> slot(n, -1);
    for (std::size_t k = 0; k < part.interior.size(); ++k) slot[part.interior[k]] = static_cast<int>(k);
    if (const auto comp = detail::orphan_component(t, slot); !comp.empty())
        throw DisconnectedInteriorError("interior component of " + std::to_string(comp.size()) +
                                            " point(s) has no boundary contact within r; first point " +
                                            std::to_string(comp.front()),
                                        comp);

    double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin, gabs = 0.0;
    for (const std::size_t b : part.boundary) {
        gmin = std::min(gmin, part.g[b]);
        gmax = std::max(gmax, part.g[b]);
        gabs = std::max(gabs, std::abs(part.g[b]));
    }
    ScalarField u = part.g;
    SolveInfo si;
    si.scale = gabs;
    const std::size_t m = part.interior.size();
    if (m == 0 || gmax == gmin) {
        for (const std::size_t i : part.interior) u[i] = gmin;
        si.method = "constant";
        if (info) *info = si;
        return u;
    }
    // u = gmin + span * w with boundary data in [0, 1]
    const double span = gmax - gmin;
    auto gn = [&](std::size_t y) { return (part.g[y] - gmin) / span; };

    // rows: sum_y W(x,y) (w(y) - w(x)) = 0, W = k_r m_x m_y
    std::vector<std::vector<std::pair<int, double>>> rows(m);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m)), diag(static_cast<Eigen::Index>(m));
    parallel_for(m, [&](std::size_t k) {
        const std::size_t x = part.interior[k];
        const double mx = t.point_mass(x), ix = 1.0 / t.ball_mass(x);
        double d = 0.0, b = 0.0;
        for (const std::size_t y : t.members(x)) {
            if (y == x) continue;
            const double w = 0.5 * (ix + 1.0 / t.ball_mass(y)) * mx * t.point_mass(y);
            d += w;
            if (slot[y] >= 0) rows[k].emplace_back(slot[y], -w);
            else b += w * gn(y);
        }
        diag[static_cast<Eigen::Index>(k)] = d;
        rhs[static_cast<Eigen::Index>(k)] = b;
    });
    Eigen::VectorXd w(static_cast<Eigen::Index>(m));
    if (m <= 500) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < m; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            A(kk, kk) = diag[kk];
            for (const auto& [j, v] : rows[k]) A(kk, j) += v;
        }
        w = A.ldlt().solve(rhs);
        si.method = "ldlt";
    } else {
        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t k = 0; k < m; ++k) {
            const auto kk = static_cast<int>(k);
            trip.emplace_back(kk, kk, diag[kk]);
            for (const auto& [j, v] : rows[k]) trip.emplace_back(kk, j, v);
        }
        Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(1e-12);
        cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(1000, 20 * m)));
        cg.compute(A);
        w = cg.solve(rhs);
        // one refinement pass against the assembled system
        const Eigen::VectorXd res = rhs - A * w;
        w += cg.solve(res);
        si.method = "cg";
        si.iterations = static_cast<int>(cg.iterations());
    }
    // Gauss-Seidel polish in index order, then clamp to the data range
    for (int sweep = 0; sweep < 2; ++sweep)
        for (std::size_t k = 0; k < m; ++k) {
            double s = rhs[static_cast<Eigen::Index>(k)];
            for (const auto& [j, v] : rows[k]) s -= v * w[j];
            w[static_cast<Eigen::Index>(k)] = s / diag[static_cast<Eigen::Index>(k)];
        }
    for (std::size_t k = 0; k < m; ++k)
        u[part.interior[k]] = gmin + span * std::clamp(w[static_cast<Eigen::Index>(k)], 0.0, 1.0);

    const ScalarField lap = sym_r_laplacian(t, u);
    for (const std::size_t i : part.interior) si.residual = std::max(si.residual, std::abs(lap[i]));
    if (!(si.residual <= 1e-10 * si.scale)) {
        std::ostringstream os;
        os << "dirichlet solve: residual " << si.residual << " exceeds 1e-10 * " << si.scale;
        throw NumericError(os.str());
    }
    if (info) *info = si;
    return u;
}

template <MetricMeasureSpace S>
ScalarField solve(const S& space, const BoundaryPartition& part, Radius r, SolveInfo* info = nullptr)
{
    return solve(BallTable(space, r), part, info);
}

/// Barrier term (phi_q / 2) (||(p^-1 p0)_1||^2 - R^2) / R^2 around the gauge ball B_R(p0).
inline AnalyticField bpz_barrier(const CarnotStep2& g, const Gauge& gauge, const GPoint& p0, double R, double phi_q,
                                 const GPoint& q)
{
    g.check(p0);
    g.check(q);
    require(R > 0.0, "bpz_barrier: R must be positive");
    require(phi_q < 0.0, "bpz_barrier: phi(q) must be negative");
    require(gauge.value(g.multiply(g.inverse(q), p0)) < R, "bpz_barrier: q must lie inside the gauge ball");
    // (p^-1 p0)_1 = p0_1 - p_1, so the term is a quadratic polynomial in z1
    const int d = g.dim(), v1 = g.v1();
    const double c = phi_q / (2.0 * R * R);
    std::vector<fields::Term> terms;
    double c0 = -R * R;
    for (int i = 0; i < v1; ++i) {
        const double a = p0.z1[i];
        terms.push_back({c, fields::unit_exp(d, i, 2)});
        terms.push_back({-2.0 * a * c, fields::unit_exp(d, i, 1)});
        c0 += a * a;
    }
    terms.push_back({c * c0, std::vector<int>(static_cast<std::size_t>(d), 0)});
    return fields::polynomial("bpz_barrier", d, terms);
}

/// Gauge ball on the lattice {(h i, h^2/2 k)} of a group with integer structure constants;
/// left translation by lattice points maps the lattice to itself, so every ambient ball
/// holds the same number of lattice points.
class GaugeBallLattice {
public:
    GaugeBallLattice(CarnotStep2 g, Gauge gauge, double R, int resolution, double r)
        : g_(std::move(g)), gauge_(std::move(gauge)), R_(R), r_(r)
    {
        require(R > 0.0 && r > 0.0 && resolution >= 1, "lattice: R, r and resolution must be positive");
        require(gauge_.has_closed_form(), "lattice: gauge must be of Koranyi type");
        for (int k = 0; k < g_.v2(); ++k)
            for (Eigen::Index i = 0; i < g_.v1(); ++i)
                for (Eigen::Index j = 0; j < g_.v1(); ++j)
                    require(g_.bracket(k)(i, j) == std::round(g_.bracket(k)(i, j)), "lattice: structure constants must be integers");
        h1_ = R / resolution;
        h2_ = 0.5 * h1_ * h1_;
        offsets_ = enumerate(g_.identity(), r_);
        const auto pts = enumerate(g_.identity(), R_);
        for (std::size_t i = 0; i < pts.size(); ++i) index_.emplace(pts[i], i);
        points_ = pts;
        is_boundary_.assign(points_.size(), false);
        parallel_for(points_.size(), [&](std::size_t i) {
            for (const auto& o : offsets_)
                if (!index_.count(translate(points_[i], o))) {
                    is_boundary_[i] = true;
                    break;
                }
        });
    }

    std::size_t size() const noexcept { return points_.size(); }
    double mass(std::size_t) const { return cell_volume(); }
    double cell_volume() const { return std::pow(h1_, g_.v1()) * std::pow(h2_, g_.v2()); }
    double ambient_ball_mass() const { return static_cast<double>(offsets_.size()) * cell_volume(); }
    bool is_boundary(std::size_t i) const { return is_boundary_[i]; }
    double h1() const { return h1_; }
    double radius() const { return r_; }

    Eigen::VectorXd coords(std::size_t i) const
    {
        const auto& p = points_[i];
        Eigen::VectorXd z(g_.dim());
        for (int k = 0; k < g_.v1(); ++k) z[k] = h1_ * static_cast<double>(p[static_cast<std::size_t>(k)]);
        for (int k = 0; k < g_.v2(); ++k) z[g_.v1() + k] = h2_ * static_cast<double>(p[static_cast<std::size_t>(g_.v1() + k)]);
        return z;
    }

    /// Members of B_r(x) inside the gauge ball; only the construction radius is supported.
    void ball_members(std::size_t x, double r, std::vector<std::pair<std::size_t, double>>& out) const
    {
        require(r == r_, "lattice ball_members: radius differs from the construction radius");
        out.clear();
        const GPoint px = GPoint::from_flat(coords(x), g_.v1());
        for (const auto& o : offsets_) {
            const auto it = index_.find(translate(points_[x], o));
            if (it == index_.end()) continue;
            const GPoint py = GPoint::from_flat(coords(it->second), g_.v1());
            out.emplace_back(it->second, gauge_distance(g_, gauge_, px, py));
        }
        std::sort(out.begin(), out.end());
    }

private:
    using Key = std::vector<std::int64_t>;

    /// Integer coordinates of p * o.
    Key translate(const Key& p, const Key& o) const
    {
        const int v1 = g_.v1();
        Key out(p.size());
        for (int i = 0; i < v1; ++i) out[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] + o[static_cast<std::size_t>(i)];
        for (int k = 0; k < g_.v2(); ++k) {
            const Eigen::MatrixXd& b = g_.bracket(k);
            double s = 0.0;
            for (int i = 0; i < v1; ++i)
                for (int j = 0; j < v1; ++j)
                    s += static_cast<double>(p[static_cast<std::size_t>(i)]) * b(i, j) * static_cast<double>(o[static_cast<std::size_t>(j)]);
            const auto kk = static_cast<std::size_t>(v1 + k);
            out[kk] = p[kk] + o[kk] + static_cast<std::int64_t>(std::llround(s));
        }
        return out;
    }

    /// Lattice points of the gauge ball of radius rad around the identity.
    std::vector<Key> enumerate(const GPoint& centre, double rad) const
    {
        const int v1 = g_.v1(), v2 = g_.v2(), d = v1 + v2;
        const auto n1 = static_cast<std::int64_t>(std::floor(rad / h1_));
        const auto n2 = static_cast<std::int64_t>(std::floor(gauge_.z2_bound(rad) / h2_));
        std::vector<Key> out;
        Key cur(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) cur[static_cast<std::size_t>(i)] = i < v1 ? -n1 : -n2;
        for (;;) {
            GPoint p = centre;
            for (int i = 0; i < v1; ++i) p.z1[i] = h1_ * static_cast<double>(cur[static_cast<std::size_t>(i)]);
            for (int k = 0; k < v2; ++k) p.z2[k] = h2_ * static_cast<double>(cur[static_cast<std::size_t>(v1 + k)]);
            if (gauge_.value(p) < rad) out.push_back(cur);
            int a = d - 1;
            for (; a >= 0; --a) {
                const std::int64_t top = a < v1 ? n1 : n2;
                if (++cur[static_cast<std::size_t>(a)] <= top) break;
                cur[static_cast<std::size_t>(a)] = -top;
            }
            if (a < 0) break;
        }
        return out;
    }

    CarnotStep2 g_;
    Gauge gauge_;
    double R_, r_, h1_ = 0, h2_ = 0;
    std::vector<Key> offsets_;
    std::vector<Key> points_;
    std::map<Key, std::size_t> index_;
    std::vector<bool> is_boundary_;
};

/// One refinement level of bpz_demo.
struct BpzLevel {
    int resolution;
    double r;
};

/// Discretizes B_R(identity), solves the Dirichlet problem with data u on the boundary
/// layer (points whose r-ball leaves B_R) and reports sup |solution - u| over the interior.
inline ExperimentReport bpz_demo(const CarnotStep2& g, const Gauge& gauge, const AnalyticField& u, double R,
                                 const std::vector<BpzLevel>& levels, const SweepOptions& opt = {})
{
    require(!levels.empty(), "bpz_demo: no refinement levels");
    require(u.dim() == g.dim(), "bpz_demo: field dimension does not match group");
    ExperimentReport rep;
    rep.experiment = "bpz-demo";
    std::vector<int> res;
    std::vector<std::size_t> sizes, interior_sizes;
    std::vector<double> resid;
    for (const auto& lv : levels) {
        const GaugeBallLattice lat(g, gauge, R, lv.resolution, lv.r);
        const std::size_t n = lat.size();
        std::vector<bool> mask(n);
        ScalarField data(n);
        for (std::size_t i = 0; i < n; ++i) {
            mask[i] = lat.is_boundary(i);
            data[i] = u.value(lat.coords(i));
        }
        const BoundaryPartition part = BoundaryPartition::from_mask(mask, data);
        require(!part.interior.empty(), "bpz_demo: r is too large for R; the interior is empty");
        const BallTable t = BallTable(lat, Radius(lv.r)).with_ball_masses(std::vector<double>(n, lat.ambient_ball_mass()));
        SolveInfo info;
        const ScalarField sol = solve(t, part, &info);
        double sup = 0.0;
        for (const std::size_t i : part.interior) sup = std::max(sup, std::abs(sol[i] - data[i]));
        rep.radii.push_back(lv.r);
        rep.values.push_back(sup);
        rep.std_errors.push_back(0.0);
        res.push_back(lv.resolution);
        sizes.push_back(n);
        interior_sizes.push_back(part.interior.size());
        resid.push_back(info.residual);
    }
    detail::check_radii(rep.radii);
    rep.metadata = {{"group_dim", g.dim()}, {"gauge", gauge.name()}, {"field", u.name()}, {"R", R}};
    rep.extra = {{"resolution", res}, {"points", sizes}, {"interior_points", interior_sizes}, {"solver_residual", resid}};
    finalize(rep, opt);
    return rep;
}

} // namespace amv
