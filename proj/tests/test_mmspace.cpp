#include <gtest/gtest.h>

#include <amvlab/mmspace.hpp>

#include <sstream>
#include <vector>

using namespace amv;

namespace {

FiniteMMSpace line3()
{
    const std::vector<double> x{0, 1, 2};
    return FiniteMMSpace::on_line(x, {1, 1, 1});
}

FiniteMMSpace pair12() { return FiniteMMSpace({0, 1, 1, 0}, {1, 2}); }

void expect_field(const ScalarField& got, const std::vector<double>& want, double tol = 1e-15)
{
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

} // namespace

TEST(FiniteMMSpace, RejectsBadInput)
{
    EXPECT_THROW(FiniteMMSpace({0, 1, 2, 0}, {1, 1}), InputError);          // asymmetric
    EXPECT_THROW(FiniteMMSpace({1, 1, 1, 0}, {1, 1}), InputError);          // diagonal
    EXPECT_THROW(FiniteMMSpace({0, -1, -1, 0}, {1, 1}), InputError);        // negative
    EXPECT_THROW(FiniteMMSpace({0, 1, 1, 0}, {1, 0}), InputError);          // zero mass
    EXPECT_THROW(FiniteMMSpace({0, 1, 1}, {1, 1}), InputError);             // size
    EXPECT_THROW(Radius(0.0), InputError);
}

TEST(Ball, MiddleOfLine)
{
    const Ball b = ball(line3(), 1, Radius(1.5));
    EXPECT_EQ(b.members, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_DOUBLE_EQ(b.mass, 3.0);
}

TEST(Ball, SingletonBelowSpacing)
{
    const Ball b = ball(line3(), 0, Radius(0.5));
    EXPECT_EQ(b.members, (std::vector<std::size_t>{0}));
    EXPECT_DOUBLE_EQ(b.mass, 1.0);
}

TEST(Ball, TwoPoints)
{
    const Ball b = ball(pair12(), 0, Radius(2));
    EXPECT_EQ(b.members.size(), 2u);
    EXPECT_DOUBLE_EQ(b.mass, 3.0);
}

TEST(Ball, OpenBallExcludesBoundaryDistance)
{
    const Ball b = ball(line3(), 0, Radius(1.0));
    EXPECT_EQ(b.members, (std::vector<std::size_t>{0}));
}

TEST(Ball, RadiusCollisionsAreReported)
{
    using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;
    EXPECT_EQ(radius_collisions(line3(), Radius(1.0)), (Pairs{{0, 1}, {1, 2}}));
    EXPECT_EQ(radius_collisions(line3(), Radius(2.0)), (Pairs{{0, 2}}));
    EXPECT_TRUE(radius_collisions(line3(), Radius(1.5)).empty());
}

TEST(Average, TwoPoints) { expect_field(average(pair12(), ScalarField{0, 3}, Radius(2)), {2, 2}); }

TEST(Average, PreservesConstants) { expect_field(average(line3(), ScalarField(3, 4.25), Radius(1.5)), {4.25, 4.25, 4.25}); }

TEST(Average, LineIndicator) { expect_field(average(line3(), ScalarField{1, 0, 0}, Radius(1.5)), {0.5, 1.0 / 3, 0}); }

TEST(AdjointAverage, TwoPoints) { expect_field(adjoint_average(pair12(), ScalarField{0, 3}, Radius(2)), {2, 2}); }

TEST(AdjointAverage, WeightOnLine)
{
    expect_field(adjoint_weight(BallTable(line3(), Radius(1.5))), {5.0 / 6, 4.0 / 3, 5.0 / 6});
}

TEST(AdjointAverage, SingletonIsIdentity)
{
    expect_field(adjoint_average(line3(), ScalarField{3, -1, 7}, Radius(0.5)), {3, -1, 7});
}

TEST(RLaplacian, TwoPoints) { expect_field(r_laplacian(pair12(), ScalarField{0, 3}, Radius(2)), {0.5, -0.25}); }

TEST(RLaplacian, ConstantsVanish) { expect_field(r_laplacian(line3(), ScalarField(3, 2.0), Radius(1.5)), {0, 0, 0}); }

TEST(RLaplacian, LineLeftPoint)
{
    EXPECT_NEAR(r_laplacian(line3(), ScalarField{1, 0, 0}, Radius(1.5))[0], -2.0 / 9, 1e-15);
}

TEST(AdjointRLaplacian, TwoPoints)
{
    expect_field(adjoint_r_laplacian(pair12(), ScalarField{0, 3}, Radius(2)), {0.5, -0.25});
}

TEST(AdjointRLaplacian, OnesOnLine)
{
    expect_field(adjoint_r_laplacian(line3(), ScalarField(3, 1.0), Radius(1.5)), {-2.0 / 27, 4.0 / 27, -2.0 / 27});
}

TEST(AdjointRLaplacian, SingletonsVanish)
{
    expect_field(adjoint_r_laplacian(line3(), ScalarField{3, 1, 2}, Radius(0.5)), {0, 0, 0});
}

TEST(SymRLaplacian, TwoPoints) { expect_field(sym_r_laplacian(pair12(), ScalarField{0, 3}, Radius(2)), {0.5, -0.25}); }

TEST(SymRLaplacian, ConstantsVanish) { expect_field(sym_r_laplacian(line3(), ScalarField(3, -1.5), Radius(1.5)), {0, 0, 0}); }

// Left ball {0,1} (mass 2), middle ball mass 3:
// k(0,1) = (1/2 + 1/3)/2 = 5/12, so the value is 5/12 * (0 - 1) / 2.25 = -5/27.
TEST(SymRLaplacian, LineLeftPointByKernel)
{
    EXPECT_NEAR(sym_r_laplacian(line3(), ScalarField{1, 0, 0}, Radius(1.5))[0], -5.0 / 27, 1e-15);
}

// Same value via sym = (Delta_r + Delta_r^* - u Delta_r^* 1) / 2.
TEST(SymRLaplacian, LineLeftPointBySymmetrization)
{
    const ScalarField u{1, 0, 0};
    const BallTable t(line3(), Radius(1.5));
    const auto a = r_laplacian(t, u), b = adjoint_r_laplacian(t, u), c = adjoint_r_laplacian(t, ScalarField(3, 1.0));
    EXPECT_NEAR(0.5 * (a[0] + b[0] - u[0] * c[0]), -5.0 / 27, 1e-15);
}

TEST(DeltaR, LineLeftMid)
{
    const BallTable t(line3(), Radius(1.5));
    EXPECT_NEAR(delta_r(t, 0, 1), 1.0 / 3, 1e-15);
    EXPECT_EQ(delta_r(t, 2, 2), 0.0);
}

TEST(DeltaR, TwoPointsBothOrders)
{
    const BallTable t(pair12(), Radius(2));
    EXPECT_EQ(delta_r(t, 0, 1), 0.0);
    EXPECT_EQ(delta_r(t, 1, 0), 0.0);
}

TEST(Kernel, Symmetric)
{
    const BallTable t(line3(), Radius(1.5));
    EXPECT_DOUBLE_EQ(mean_value_kernel(t, 0, 1), mean_value_kernel(t, 1, 0));
    EXPECT_DOUBLE_EQ(mean_value_kernel(t, 0, 1), 5.0 / 12);
    EXPECT_EQ(mean_value_kernel(t, 0, 2), 0.0);
}

TEST(EnergyDensity, TwoPoints)
{
    const ScalarField u{0, 3};
    expect_field(energy_density(pair12(), u, u, Radius(2)), {0.75, 0.375});
    expect_field(energy_density(pair12(), u, ScalarField{0, -1}, Radius(2)), {-0.25, -0.125});
    expect_field(energy_density(pair12(), u, ScalarField{2, 2}, Radius(2)), {0, 0});
}

TEST(TotalEnergy, TwoPoints)
{
    const ScalarField u{0, 3};
    EXPECT_NEAR(total_energy(pair12(), u, u, Radius(2)), 1.5, 1e-15);
    EXPECT_EQ(total_energy(pair12(), u, ScalarField{5, 5}, Radius(2)), 0.0);
}

TEST(TotalEnergy, EqualsMinusSymPairing)
{
    const ScalarField u{0, 3};
    const BallTable t(pair12(), Radius(2));
    EXPECT_NEAR(total_energy(t, u, u), -integrate(t, u, sym_r_laplacian(t, u)), 1e-15);
}

TEST(WeakPairing, TwoPoints)
{
    const ScalarField u{0, 3};
    EXPECT_NEAR(weak_pairing(pair12(), ScalarField{1, 1}, u, Radius(2)), 0.0, 1e-15);
    EXPECT_EQ(weak_pairing(pair12(), ScalarField{0, 0}, u, Radius(2)), 0.0);
    EXPECT_NEAR(weak_pairing(pair12(), ScalarField{1, 0}, u, Radius(2)), 0.5, 1e-15);
}

TEST(Operators, RejectWrongFieldLength)
{
    EXPECT_THROW(r_laplacian(line3(), ScalarField{1, 2}, Radius(1)), InputError);
}

TEST(SpaceIO, RoundTrip)
{
    const FiniteMMSpace s({0, 1.25, 3, 1.25, 0, 0.5, 3, 0.5, 0}, {1, 2.5, 0.125}, {"a", "b", "c"});
    std::stringstream ss;
    write_space(ss, s);
    const FiniteMMSpace t = read_space(ss);
    ASSERT_EQ(t.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(t.mass(i), s.mass(i));
        EXPECT_EQ(t.labels()[i], s.labels()[i]);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t.distance(i, j), s.distance(i, j));
    }
    EXPECT_EQ(t.index_of("c"), 2u);
}

TEST(SpaceIO, ParsesCommentsAndRejectsGarbage)
{
    std::istringstream ok("# two points\npoints 2\ndistances\n\n1.5\nmasses\n1 2\n");
    const auto s = read_space(ok);
    EXPECT_EQ(s.distance(0, 1), 1.5);
    std::istringstream bad("points 2\ndistances\nxyz\nmasses\n1 2\n");
    EXPECT_THROW(read_space(bad), InputError);
}

TEST(FieldIO, RoundTrip)
{
    const ScalarField u{0.1, -3.5e-7, 12};
    std::stringstream ss;
    write_field(ss, u);
    EXPECT_EQ(read_field(ss), u);
}
