#include <gtest/gtest.h>

#include <amvlab/carnot_calculus.hpp>
#include <amvlab/fields.hpp>
#include <amvlab/random.hpp>

#include <cmath>

using namespace amv;

namespace {

GPoint pt(double x, double y, double t)
{
    Eigen::VectorXd a(2), b(1);
    a << x, y;
    b << t;
    return {a, b};
}

GPoint random_point(const CarnotStep2& g, CounterRng& rng, double lo, double hi)
{
    GPoint p = g.identity();
    for (int i = 0; i < g.v1(); ++i) p.z1[i] = rng.uniform(lo, hi);
    for (int k = 0; k < g.v2(); ++k) p.z2[k] = rng.uniform(lo, hi);
    return p;
}

GPoint step(const CarnotStep2& g, int j, double t)
{
    GPoint e = g.identity();
    e.z1[j] = t;
    return e;
}

// Finite differences along the flow t -> x (t e_j, 0).
double fd_left_field(const CarnotStep2& g, int j, const AnalyticField& u, const GPoint& x, double h = 1e-5)
{
    return (u.value(g.multiply(x, step(g, j, h))) - u.value(g.multiply(x, step(g, j, -h)))) / (2 * h);
}

double fd_sub_laplacian(const CarnotStep2& g, const AnalyticField& u, const GPoint& x, double h = 1e-3)
{
    double s = 0;
    for (int j = 0; j < g.v1(); ++j)
        s += (u.value(g.multiply(x, step(g, j, h))) - 2 * u.value(x) + u.value(g.multiply(x, step(g, j, -h)))) / (h * h);
    return s;
}

Eigen::VectorXd fd_gradient(const AnalyticField& u, const Eigen::VectorXd& z, double h = 1e-6)
{
    Eigen::VectorXd g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::VectorXd a = z, b = z;
        a[i] += h;
        b[i] -= h;
        g[i] = (u(a) - u(b)) / (2 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const AnalyticField& u, const Eigen::VectorXd& z, double h = 1e-5)
{
    Eigen::MatrixXd H(z.size(), z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::VectorXd a = z, b = z;
        a[i] += h;
        b[i] -= h;
        H.col(i) = (u.gradient(a) - u.gradient(b)) / (2 * h);
    }
    return H;
}

} // namespace

TEST(Fields, CatalogDerivativesMatchFiniteDifferences)
{
    const auto g = CarnotStep2::heisenberg(1);
    CounterRng rng(SeedSpec{9, 0}, 0);
    Eigen::VectorXd a(3);
    a << 0.3, -0.7, 0.5;
    const std::vector<AnalyticField> cat{fields::constant(3, 2.0),     fields::coordinate(3, 1),
                                         fields::coordinate_squared(3, 2), fields::norm_squared(3, 2),
                                         fields::affine(3, a, 0.2),    fields::harmonic_cubic(3),
                                         fields::gauge_power(g, 1.0, 3.0), fields::folland_kernel(g, pt(0.2, -0.1, 0.4))};
    for (const auto& u : cat)
        for (int k = 0; k < 20; ++k) {
            const Eigen::VectorXd z = random_point(g, rng, 0.5, 1.5).flat();
            const double scale = 1.0 + u.gradient(z).cwiseAbs().maxCoeff();
            EXPECT_LT((u.gradient(z) - fd_gradient(u, z)).cwiseAbs().maxCoeff(), 1e-6 * scale) << u.name();
            const double hs = 1.0 + u.hessian(z).cwiseAbs().maxCoeff();
            EXPECT_LT((u.hessian(z) - fd_hessian(u, z)).cwiseAbs().maxCoeff(), 1e-6 * hs) << u.name();
        }
}

TEST(Fields, ValuesByHand)
{
    Eigen::VectorXd z(3);
    z << 1.5, -2.0, 0.5;
    EXPECT_DOUBLE_EQ(fields::harmonic_cubic(3)(z), 1.5 * 1.5 * 1.5 - 3 * 1.5 * 4.0);
    EXPECT_DOUBLE_EQ(fields::norm_squared(3, 2)(z), 6.25);
    EXPECT_DOUBLE_EQ(fields::norm_squared(3, 3)(z), 6.5);
    Eigen::VectorXd c(2);
    c << 1.0, 1.0;
    EXPECT_DOUBLE_EQ(fields::norm_squared(3, 2, c)(z), 0.25 + 9.0);
    EXPECT_THROW(fields::coordinate(3, 3), InputError);
    EXPECT_THROW(fields::harmonic_cubic(3)(Eigen::VectorXd::Zero(2)), InputError);
}

TEST(Fields, FollandValue)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto u = fields::folland_kernel(g);
    // N(1,0;0) = 1, N(0,0;1) = 16^(1/4) = 2, Q = 4.
    EXPECT_NEAR(u.value(pt(1, 0, 0)), 1.0, 1e-15);
    EXPECT_NEAR(u.value(pt(0, 0, 1)), 0.25, 1e-15);
    const GPoint pole = pt(0.3, -0.2, 0.1), p = pt(1.1, 0.4, -0.6);
    const auto shifted = fields::folland_kernel(g, pole);
    EXPECT_NEAR(shifted.value(p), u.value(g.multiply(g.inverse(pole), p)), 1e-14);
}

TEST(Fields, LeftTranslatedAndCombine)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto u = fields::gauge_power(g, 1.0, 2.0);
    const GPoint a = pt(0.5, -1.0, 2.0), p = pt(0.1, 0.2, 0.3);
    EXPECT_NEAR(u.left_translated(g, a).value(p), u.value(g.multiply(a, p)), 1e-14);
    const auto w = u.combine(2.0, fields::coordinate(3, 0), -1.0, 0.5);
    EXPECT_NEAR(w.value(p), 2.0 * u.value(p) - 0.1 + 0.5, 1e-14);
    EXPECT_NEAR(u.scaled(3.0, 1.0).value(p), 3.0 * u.value(p) + 1.0, 1e-14);
}

TEST(LeftField, HandExamples)
{
    const auto g = CarnotStep2::heisenberg(1);
    EXPECT_DOUBLE_EQ(left_field(g, 0, fields::coordinate(3, 2), pt(0, 3, 0)), -1.5);
    EXPECT_DOUBLE_EQ(left_field(g, 0, fields::coordinate(3, 0), pt(4, -2, 7)), 1.0);
    EXPECT_THROW(left_field(g, 2, fields::coordinate(3, 0), pt(0, 0, 0)), InputError);
    const auto u = fields::norm_squared(3, 2);
    const GPoint x = pt(0.7, -1.3, 2.0);
    EXPECT_DOUBLE_EQ(left_field(g, 0, u, x), 2 * 0.7);
    EXPECT_DOUBLE_EQ(left_field(g, 1, u, x), -2 * 1.3);
}

TEST(LeftField, MatchesFlowDerivative)
{
    const auto g = CarnotStep2::heisenberg(2);
    CounterRng rng(SeedSpec{10, 0}, 0);
    const auto u = fields::gauge_power(g, 16.0, 3.0);
    for (int k = 0; k < 50; ++k) {
        const GPoint x = random_point(g, rng, -1.5, 1.5);
        for (int j = 0; j < g.v1(); ++j) EXPECT_NEAR(left_field(g, j, u, x), fd_left_field(g, j, u, x), 1e-7);
    }
}

TEST(LeftField, LeftInvariance)
{
    const auto g = CarnotStep2::heisenberg(1);
    CounterRng rng(SeedSpec{11, 0}, 0);
    const auto u = fields::gauge_power(g, 1.0, 3.0);
    for (int k = 0; k < 50; ++k) {
        const GPoint a = random_point(g, rng, -1, 1), x = random_point(g, rng, -1, 1);
        const auto ua = u.left_translated(g, a);
        for (int j = 0; j < 2; ++j)
            EXPECT_NEAR(left_field(g, j, ua, x), left_field(g, j, u, g.multiply(a, x)), 1e-12);
    }
}

TEST(SubLaplacian, HandExamples)
{
    const auto g = CarnotStep2::heisenberg(1);
    CounterRng rng(SeedSpec{12, 0}, 0);
    for (int k = 0; k < 20; ++k) {
        const GPoint x = random_point(g, rng, -3, 3);
        EXPECT_NEAR(sub_laplacian(g, fields::norm_squared(3, 2), x), 4.0, 1e-14);
        EXPECT_NEAR(sub_laplacian(g, fields::coordinate(3, 2), x), 0.0, 1e-15);
    }
    const auto g3 = CarnotStep2::heisenberg(3);
    EXPECT_NEAR(sub_laplacian(g3, fields::norm_squared(7, 6), g3.identity()), 12.0, 1e-14);
}

TEST(SubLaplacian, FollandKernelHarmonicAwayFromPole)
{
    const auto g = CarnotStep2::heisenberg(1);
    CounterRng rng(SeedSpec{13, 0}, 0);
    const GPoint pole = pt(0.2, 0.1, -0.3);
    const auto u = fields::folland_kernel(g, pole);
    double worst_closed = 0, worst_fd = 0;
    for (int k = 0; k < 100; ++k) {
        GPoint x = random_point(g, rng, -2, 2);
        if (Gauge::scaled_koranyi(16).value(g.multiply(g.inverse(pole), x)) < 0.5) continue;
        worst_closed = std::max(worst_closed, std::abs(sub_laplacian(g, u, x)));
        // Richardson step removes the h^2 term of the central difference.
        const double fd = (4 * fd_sub_laplacian(g, u, x, 1e-3) - fd_sub_laplacian(g, u, x, 2e-3)) / 3;
        worst_fd = std::max(worst_fd, std::abs(fd));
    }
    EXPECT_LT(worst_closed, 1e-10);
    EXPECT_LT(worst_fd, 1e-6);
}

TEST(SubLaplacian, NonFollandGaugeIsNotHarmonic)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto u = fields::gauge_power(g, 1.0, -2.0);
    EXPECT_GT(std::abs(sub_laplacian(g, u, pt(0.8, 0.3, 0.5))), 1e-3);
}

TEST(SubLaplacian, MatchesFlowSecondDifference)
{
    const auto g = CarnotStep2::heisenberg(2);
    CounterRng rng(SeedSpec{14, 0}, 0);
    const auto u = fields::gauge_power(g, 1.0, 6.0);
    for (int k = 0; k < 30; ++k) {
        const GPoint x = random_point(g, rng, -1, 1);
        EXPECT_NEAR(sub_laplacian(g, u, x), fd_sub_laplacian(g, u, x), 1e-4 * (1 + std::abs(sub_laplacian(g, u, x))));
    }
}

TEST(Pansu, HandExamples)
{
    const auto g = CarnotStep2::heisenberg(1);
    EXPECT_DOUBLE_EQ(pansu_differential(g, fields::coordinate(3, 0), pt(3, 1, 2), pt(0.25, 7, -1)), 0.25);
    EXPECT_DOUBLE_EQ(pansu_differential(g, fields::gauge_power(g, 1.0, 4.0), pt(1, 1, 1), pt(0, 0, 5)), 0.0);
    EXPECT_DOUBLE_EQ(pansu_differential(g, fields::norm_squared(3, 2), pt(1, 2, 0), pt(1, 0, 0)), 2.0);
}

TEST(Pansu, LinearInFirstLayer)
{
    const auto g = CarnotStep2::heisenberg(1);
    const auto u = fields::gauge_power(g, 1.0, 3.0);
    const GPoint x = pt(0.4, -0.9, 0.3);
    const double a = pansu_differential(g, u, x, pt(1, 0, 3)), b = pansu_differential(g, u, x, pt(0, 1, -2));
    EXPECT_NEAR(pansu_differential(g, u, x, pt(2, -3, 0.1)), 2 * a - 3 * b, 1e-13);
}
