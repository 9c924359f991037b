#include <gtest/gtest.h>

#include <amvlab/carnot_calculus.hpp>
#include <amvlab/dirichlet.hpp>
#include <amvlab/identities.hpp>

#include <cmath>
#include <sstream>

using namespace amv;

namespace {

GPoint pt(double x, double y, double t)
{
    Eigen::VectorXd a(2), b(1);
    a << x, y;
    b << t;
    return {a, b};
}

FiniteMMSpace line(std::size_t n)
{
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    return FiniteMMSpace::on_line(x, std::vector<double>(n, 1.0));
}

// Dense assembly of sym Delta_r u = 0 on the interior, solved by pivoted LU.
ScalarField dense_oracle(const FiniteMMSpace& s, double r, const BoundaryPartition& part)
{
    const BallTable t(s, Radius(r));
    const std::size_t n = s.size();
    std::vector<int> slot(n, -1);
    for (std::size_t k = 0; k < part.interior.size(); ++k) slot[part.interior[k]] = static_cast<int>(k);
    const auto m = static_cast<Eigen::Index>(part.interior.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const std::size_t x = part.interior[static_cast<std::size_t>(k)];
        for (std::size_t y = 0; y < n; ++y) {
            const double kxy = mean_value_kernel(t, x, y);
            if (y == x || kxy == 0.0) continue;
            A(k, k) += kxy * s.mass(y);
            if (slot[y] >= 0) A(k, slot[y]) -= kxy * s.mass(y);
            else b[k] += kxy * s.mass(y) * part.g[y];
        }
    }
    const Eigen::VectorXd w = A.partialPivLu().solve(b);
    ScalarField u = part.g;
    for (Eigen::Index k = 0; k < m; ++k) u[part.interior[static_cast<std::size_t>(k)]] = w[k];
    return u;
}

} // namespace

TEST(Solve, ThreePointLine)
{
    const auto part = BoundaryPartition::from_mask({true, false, true}, {0, 0, 6});
    SolveInfo info;
    const auto u = solve(line(3), part, Radius(1.5), &info);
    EXPECT_NEAR(u[1], 3.0, 1e-15);
    EXPECT_EQ(u[0], 0.0);
    EXPECT_EQ(u[2], 6.0);
    EXPECT_EQ(info.method, "ldlt");
    EXPECT_EQ(info.scale, 6.0);
}

TEST(Solve, ConstantData)
{
    CounterRng rng(SeedSpec{40, 0}, 0);
    const auto s = random_space(rng, 20);
    std::vector<bool> mask(20, false);
    mask[0] = mask[7] = true;
    const auto u = solve(s, BoundaryPartition::from_mask(mask, ScalarField(20, -2.5)), Radius(1.0));
    for (const double v : u) EXPECT_EQ(v, -2.5);
}

TEST(Solve, RandomInstancesAreMinimizers)
{
    for (std::uint64_t inst = 0; inst < 5; ++inst) {
        CounterRng rng(SeedSpec{41, 0}, inst);
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
            EXPECT_LE(std::abs(lap[i]), 1e-10 * info.scale);
            EXPECT_GE(u[i], gmin);
            EXPECT_LE(u[i], gmax);
        }
        const auto oracle = dense_oracle(s, 1.0, part);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(u[i], oracle[i], 1e-12);

        const double e0 = total_energy(t, u, u);
        for (int k = 0; k < 100; ++k) {
            ScalarField v = u;
            const double eps = std::pow(10.0, rng.uniform(-3, 0));
            for (const auto i : part.interior) v[i] += eps * rng.uniform(-1, 1);
            EXPECT_GT(total_energy(t, v, v), e0);
        }
    }
}

TEST(Solve, LargeSystemUsesCG)
{
    const std::size_t n = 700;
    const auto s = line(n);
    std::vector<bool> mask(n, false);
    mask.front() = mask.back() = true;
    ScalarField g(n, 0.0);
    g.back() = 1.0;
    const auto part = BoundaryPartition::from_mask(mask, g);
    SolveInfo info;
    const auto u = solve(s, part, Radius(2.5), &info);
    EXPECT_EQ(info.method, "cg");
    EXPECT_LE(info.residual, 1e-10);
    const auto oracle = dense_oracle(s, 2.5, part);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(u[i], oracle[i], 1e-9);
    for (std::size_t i = 1; i < n; ++i) EXPECT_GE(u[i], u[i - 1]);
}

TEST(Solve, DisconnectedInterior)
{
    // Points 0,1 | gap | 10,11; only point 0 is boundary.
    const auto s = FiniteMMSpace::on_line(std::vector<double>{0, 1, 10, 11}, {1, 1, 1, 1});
    const auto part = BoundaryPartition::from_mask({true, false, false, false}, {1, 0, 0, 0});
    try {
        solve(s, part, Radius(1.5));
        FAIL() << "expected DisconnectedInteriorError";
    } catch (const DisconnectedInteriorError& e) {
        EXPECT_EQ(e.component(), (std::vector<std::size_t>{2, 3}));
    }
}

TEST(Solve, RejectsBadPartitions)
{
    const auto s = line(3);
    EXPECT_THROW(solve(s, BoundaryPartition::from_mask({false, false, false}, {0, 0, 0}), Radius(1.5)), InputError);
    BoundaryPartition p;
    p.interior = {0, 1};
    p.boundary = {1, 2};
    p.g = {0, 0, 0};
    EXPECT_THROW(solve(s, p, Radius(1.5)), InputError);
    EXPECT_THROW(BoundaryPartition::from_mask({true, false}, {0, 0, 0}), InputError);
}

TEST(Mask, RoundTripAndErrors)
{
    const auto p = BoundaryPartition::from_mask({true, false, true}, {0.125, 0, -6});
    std::stringstream ss;
    write_boundary_mask(ss, p);
    EXPECT_EQ(ss.str(), "B 0.125\nI\nB -6\n");
    const auto q = read_boundary_mask(ss);
    EXPECT_EQ(q.interior, p.interior);
    EXPECT_EQ(q.boundary, p.boundary);
    EXPECT_EQ(q.g[2], -6.0);
    std::istringstream commented("# header\nB 1  # left\n\nI\n");
    EXPECT_EQ(read_boundary_mask(commented).boundary.size(), 1u);
    for (const char* bad : {"X\n", "B\n", "I 3\n"}) {
        std::istringstream is(bad);
        EXPECT_THROW(read_boundary_mask(is), InputError) << bad;
    }
}

TEST(Barrier, Properties)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto gauge = Gauge::koranyi();
    const GPoint p0 = pt(0.2, -0.1, 0.3), q = pt(0.5, 0.1, 0.2);
    const double R = 1.0, phq = -0.7;
    const auto b = bpz_barrier(g, gauge, p0, R, phq, q);
    CounterRng rng(SeedSpec{42, 0}, 0);
    for (int k = 0; k < 2000; ++k) {
        GPoint z = pt(rng.normal(), rng.normal(), rng.normal());
        const double rho = gauge.value(z);
        z = g.dilate(R * rng.uniform() / rho, z);
        const GPoint p = g.multiply(p0, z);   // gauge(p^-1 p0) = gauge(z) <= R
        EXPECT_GE(b.value(p), -1e-15);
        const double s2 = g.multiply(g.inverse(p), p0).z1.squaredNorm();
        EXPECT_NEAR(b.value(p), phq / 2 * (s2 - R * R) / (R * R), 1e-14);
        EXPECT_NEAR(sub_laplacian(g, b, p), phq / 2 * 4 / (R * R), 1e-13);
    }
    // On the sphere the barrier is >= 0, and it vanishes where ||z1|| = R.
    EXPECT_NEAR(b.value(g.multiply(p0, pt(-R, 0, 0))), 0.0, 1e-15);
    // F(q) = phi(q) + barrier(q) = phi(q) (||(q^-1 p0)_1||^2 + R^2) / (2 R^2) < 0.
    const double s2 = g.multiply(g.inverse(q), p0).z1.squaredNorm();
    EXPECT_NEAR(phq + b.value(q), phq * (s2 + R * R) / (2 * R * R), 1e-15);
    EXPECT_LT(phq + b.value(q), 0.0);
}

TEST(Barrier, HeisenbergUnitExample)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto b = bpz_barrier(g, Gauge::koranyi(), g.identity(), 1.0, -1.0, pt(0.1, 0, 0));
    EXPECT_NEAR(sub_laplacian(g, b, pt(0.3, 0.2, -0.4)), -2.0, 1e-14);
    EXPECT_THROW(bpz_barrier(g, Gauge::koranyi(), g.identity(), 1.0, -1.0, pt(2, 0, 0)), InputError);
    EXPECT_THROW(bpz_barrier(g, Gauge::koranyi(), g.identity(), 1.0, 0.5, pt(0.1, 0, 0)), InputError);
}

TEST(Lattice, BallsMatchBruteForce)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto gauge = Gauge::koranyi();
    const GaugeBallLattice lat(g, gauge, 1.0, 4, 0.55);
    std::vector<std::pair<std::size_t, double>> got;
    std::size_t full = 0;
    for (std::size_t x = 0; x < lat.size(); x += 5) {
        lat.ball_members(x, 0.55, got);
        std::vector<std::size_t> want;
        for (std::size_t y = 0; y < lat.size(); ++y)
            if (gauge_distance(g, gauge, GPoint::from_flat(lat.coords(x), 2), GPoint::from_flat(lat.coords(y), 2)) < 0.55)
                want.push_back(y);
        std::vector<std::size_t> ids;
        for (const auto& [y, d] : got) ids.push_back(y);
        ASSERT_EQ(ids, want) << x;
        if (!lat.is_boundary(x)) {
            EXPECT_NEAR(double(ids.size()) * lat.cell_volume(), lat.ambient_ball_mass(), 1e-12);
            ++full;
        }
    }
    EXPECT_GT(full, 0u);
    EXPECT_THROW(lat.ball_members(0, 0.3, got), InputError);
}

TEST(Lattice, RequiresIntegerBrackets)
{
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(0, 1) = 0.5;
    b(1, 0) = -0.5;
    EXPECT_THROW(GaugeBallLattice(CarnotStep2(2, 1, {b}), Gauge::koranyi(), 1.0, 4, 0.5), InputError);
}

TEST(BpzDemo, AffineAndConstantAreReproduced)
{
    const auto g = CarnotStep2::heisenberg(1);
    Eigen::VectorXd a(2);
    a << 0.3, -0.7;
    SweepOptions opt;
    opt.reference = 0.0;
    const std::vector<BpzLevel> levels{{4, 0.55}, {6, 0.37}};
    const auto rep = bpz_demo(g, Gauge::koranyi(), fields::affine(3, a, 0.2), 1.0, levels, opt);
    for (const double v : rep.values) EXPECT_LT(v, 1e-3);
    EXPECT_EQ(rep.verdict, Verdict::pass);
    const auto c = bpz_demo(g, Gauge::koranyi(), fields::constant(3, 1.5), 1.0, levels, opt);
    for (const double v : c.values) EXPECT_EQ(v, 0.0);
}

TEST(BpzDemo, NormSquaredStaysAwayFromZero)
{
    const auto g = CarnotStep2::heisenberg(1);
    const std::vector<BpzLevel> levels{{4, 0.55}, {6, 0.37}};
    const auto rep = bpz_demo(g, Gauge::koranyi(), fields::norm_squared(3, 2), 1.0, levels);
    for (const double v : rep.values) EXPECT_GT(v, 0.1);
    EXPECT_GT(rep.values[1], rep.values[0]);
}
