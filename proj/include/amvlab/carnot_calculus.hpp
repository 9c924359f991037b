#pragma once

#include <Eigen/Dense>

#include "carnot.hpp"
#include "fields.hpp"

namespace amv {

/// Coefficients of the left-invariant horizontal fields in flat coordinates:
///   X_j = d/dz1_j + sum_k c_kj(x) d/dz2_k,  c_kj(x) = 1/2 sum_i b[k](i, j) x1_i,
/// i.e. X_j u(x) = d/dt u(x (t e_j, 0)) at t = 0.
inline Eigen::MatrixXd horizontal_frame(const CarnotStep2& g, const GPoint& x)
{
    g.check(x);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(g.dim(), g.v1());
    X.topRows(g.v1()).setIdentity();
    for (int k = 0; k < g.v2(); ++k) X.row(g.v1() + k) = 0.5 * (x.z1.transpose() * g.bracket(k));
    return X;
}

/// X_j u(x).
inline double left_field(const CarnotStep2& g, int j, const AnalyticField& u, const GPoint& x)
{
    require(j >= 0 && j < g.v1(), "left_field: horizontal index " + std::to_string(j) + " out of range");
    return horizontal_frame(g, x).col(j).dot(u.gradient(x.flat()));
}

/// (X_1 u, ..., X_v1 u)(x).
inline Eigen::VectorXd horizontal_gradient(const CarnotStep2& g, const AnalyticField& u, const GPoint& x)
{
    return horizontal_frame(g, x).transpose() * u.gradient(x.flat());
}

/// sum_j X_j X_j u(x). Since X_j has no d/dz1_j dependence in its own coefficients,
/// X_j^2 u = col_j^T Hess(u) col_j.
inline double sub_laplacian(const CarnotStep2& g, const AnalyticField& u, const GPoint& x)
{
    const Eigen::MatrixXd X = horizontal_frame(g, x);
    const Eigen::MatrixXd H = u.hessian(x.flat());
    return (X.transpose() * H * X).trace();
}

/// Du_x(z) = <grad_H u(x), z1>.
inline double pansu_differential(const CarnotStep2& g, const AnalyticField& u, const GPoint& x, const GPoint& z)
{
    g.check(z);
    return horizontal_gradient(g, u, x).dot(z.z1);
}

} // namespace amv
