#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "carnot.hpp"
#include "errors.hpp"

namespace amv {

namespace detail {

struct FieldImpl {
    virtual ~FieldImpl() = default;
    virtual int dim() const = 0;
    virtual double value(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const = 0;
};

struct Monomial {
    double coef;
    std::vector<int> exps;
};

class PolynomialImpl final : public FieldImpl {
public:
    PolynomialImpl(int d, std::vector<Monomial> terms) : d_(d), terms_(std::move(terms))
    {
        for (const auto& t : terms_) {
            require(static_cast<int>(t.exps.size()) == d_, "polynomial: exponent vector has wrong length");
            for (const int e : t.exps) require(e >= 0, "polynomial: negative exponent");
        }
    }
    int dim() const override { return d_; }

    double value(const Eigen::VectorXd& z) const override
    {
        double s = 0;
        for (const auto& t : terms_) s += t.coef * eval(t.exps, z);
        return s;
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d_);
        for (const auto& t : terms_)
            for (int i = 0; i < d_; ++i) {
                if (t.exps[i] == 0) continue;
                auto e = t.exps;
                const double c = t.coef * e[i];
                --e[i];
                g[i] += c * eval(e, z);
            }
        return g;
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const override
    {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d_, d_);
        for (const auto& t : terms_)
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j) {
                    auto e = t.exps;
                    double c = t.coef;
                    if (e[i] == 0) continue;
                    c *= e[i]--;
                    if (e[j] == 0) continue;
                    c *= e[j]--;
                    h(i, j) += c * eval(e, z);
                }
        return h;
    }

private:
    static double eval(const std::vector<int>& e, const Eigen::VectorXd& z)
    {
        double p = 1;
        for (std::size_t i = 0; i < e.size(); ++i)
            for (int k = 0; k < e[i]; ++k) p *= z[static_cast<Eigen::Index>(i)];
        return p;
    }

    int d_;
    std::vector<Monomial> terms_;
};

/// (||z1||^4 + beta ||z2||^2)^(p/4).
class GaugePowerImpl final : public FieldImpl {
public:
    GaugePowerImpl(int v1, int v2, double beta, double power) : v1_(v1), v2_(v2), beta_(beta), q_(power / 4.0) {}
    int dim() const override { return v1_ + v2_; }

    double value(const Eigen::VectorXd& z) const override { return std::pow(F(z), q_); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override
    {
        const double f = F(z);
        return q_ * std::pow(f, q_ - 1.0) * gradF(z);
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const override
    {
        const double f = F(z);
        const Eigen::VectorXd gf = gradF(z);
        Eigen::MatrixXd hf = Eigen::MatrixXd::Zero(dim(), dim());
        const auto z1 = z.head(v1_);
        const double s = z1.squaredNorm();
        hf.topLeftCorner(v1_, v1_) = 4.0 * s * Eigen::MatrixXd::Identity(v1_, v1_) + 8.0 * z1 * z1.transpose();
        hf.bottomRightCorner(v2_, v2_) = 2.0 * beta_ * Eigen::MatrixXd::Identity(v2_, v2_);
        return q_ * (q_ - 1.0) * std::pow(f, q_ - 2.0) * gf * gf.transpose() + q_ * std::pow(f, q_ - 1.0) * hf;
    }

private:
    double F(const Eigen::VectorXd& z) const
    {
        const double s = z.head(v1_).squaredNorm();
        return s * s + beta_ * z.tail(v2_).squaredNorm();
    }
    Eigen::VectorXd gradF(const Eigen::VectorXd& z) const
    {
        Eigen::VectorXd g(dim());
        const double s = z.head(v1_).squaredNorm();
        g.head(v1_) = 4.0 * s * z.head(v1_);
        g.tail(v2_) = 2.0 * beta_ * z.tail(v2_);
        return g;
    }

    int v1_, v2_;
    double beta_, q_;
};

/// u(A z + c) for a constant affine map.
class AffinePullbackImpl final : public FieldImpl {
public:
    AffinePullbackImpl(std::shared_ptr<const FieldImpl> base, Eigen::MatrixXd A, Eigen::VectorXd c)
        : base_(std::move(base)), A_(std::move(A)), c_(std::move(c)) {}
    int dim() const override { return static_cast<int>(A_.cols()); }
    double value(const Eigen::VectorXd& z) const override { return base_->value(A_ * z + c_); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override
    {
        return A_.transpose() * base_->gradient(A_ * z + c_);
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const override
    {
        return A_.transpose() * base_->hessian(A_ * z + c_) * A_;
    }

private:
    std::shared_ptr<const FieldImpl> base_;
    Eigen::MatrixXd A_;
    Eigen::VectorXd c_;
};

class LinearComboImpl final : public FieldImpl {
public:
    LinearComboImpl(std::vector<std::pair<double, std::shared_ptr<const FieldImpl>>> parts, double constant)
        : parts_(std::move(parts)), constant_(constant)
    {
        require(!parts_.empty(), "linear combination needs at least one field");
        for (const auto& p : parts_) require(p.second->dim() == parts_[0].second->dim(), "linear combination: dimension mismatch");
    }
    int dim() const override { return parts_[0].second->dim(); }
    double value(const Eigen::VectorXd& z) const override
    {
        double s = constant_;
        for (const auto& [c, f] : parts_) s += c * f->value(z);
        return s;
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const override
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
        for (const auto& [c, f] : parts_) g += c * f->gradient(z);
        return g;
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const override
    {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
        for (const auto& [c, f] : parts_) h += c * f->hessian(z);
        return h;
    }

private:
    std::vector<std::pair<double, std::shared_ptr<const FieldImpl>>> parts_;
    double constant_;
};

} // namespace detail

/// Function on R^d (flat coordinates) with closed-form value, gradient and Hessian.
class AnalyticField {
public:
    AnalyticField(std::string name, std::shared_ptr<const detail::FieldImpl> impl)
        : name_(std::move(name)), impl_(std::move(impl)) {}

    const std::string& name() const noexcept { return name_; }
    int dim() const { return impl_->dim(); }

    double operator()(const Eigen::VectorXd& z) const { return value(z); }
    double value(const Eigen::VectorXd& z) const
    {
        check(z);
        return impl_->value(z);
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& z) const
    {
        check(z);
        return impl_->gradient(z);
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z) const
    {
        check(z);
        return impl_->hessian(z);
    }

    double value(const GPoint& p) const { return value(p.flat()); }

    /// p -> u(a p) on a Carnot group.
    AnalyticField left_translated(const CarnotStep2& g, const GPoint& a) const
    {
        require(dim() == g.dim(), "left_translated: field dimension does not match group");
        return {name_ + "@L", std::make_shared<detail::AffinePullbackImpl>(
                                  impl_, g.left_translation_jacobian(a), a.flat())};
    }

    /// c * this + other_coef * other + constant.
    AnalyticField combine(double c, const AnalyticField& other, double other_coef, double constant = 0.0) const
    {
        return {name_ + "+" + other.name_,
                std::make_shared<detail::LinearComboImpl>(
                    std::vector<std::pair<double, std::shared_ptr<const detail::FieldImpl>>>{{c, impl_},
                                                                                            {other_coef, other.impl_}},
                    constant)};
    }

    AnalyticField scaled(double c, double constant = 0.0) const
    {
        return {name_, std::make_shared<detail::LinearComboImpl>(
                           std::vector<std::pair<double, std::shared_ptr<const detail::FieldImpl>>>{{c, impl_}}, constant)};
    }

private:
    void check(const Eigen::VectorXd& z) const
    {
        if (z.size() != impl_->dim())
            throw InputError("field '" + name_ + "' expects " + std::to_string(impl_->dim()) + " coordinates, got " +
                             std::to_string(z.size()));
    }

    std::string name_;
    std::shared_ptr<const detail::FieldImpl> impl_;
};

namespace fields {

struct Term {
    double coef;
    std::vector<int> exps;
};

inline AnalyticField polynomial(std::string name, int dim, const std::vector<Term>& terms)
{
    std::vector<detail::Monomial> m;
    for (const auto& t : terms) m.push_back({t.coef, t.exps});
    return {std::move(name), std::make_shared<detail::PolynomialImpl>(dim, std::move(m))};
}

inline std::vector<int> unit_exp(int dim, int i, int power)
{
    std::vector<int> e(static_cast<std::size_t>(dim), 0);
    e[static_cast<std::size_t>(i)] = power;
    return e;
}

inline AnalyticField constant(int dim, double c)
{
    return polynomial("const", dim, {{c, std::vector<int>(static_cast<std::size_t>(dim), 0)}});
}

/// z_i.
inline AnalyticField coordinate(int dim, int i)
{
    require(i >= 0 && i < dim, "coordinate index out of range");
    return polynomial("coord" + std::to_string(i), dim, {{1.0, unit_exp(dim, i, 1)}});
}

/// z_i^2.
inline AnalyticField coordinate_squared(int dim, int i)
{
    require(i >= 0 && i < dim, "coordinate index out of range");
    return polynomial("sq" + std::to_string(i), dim, {{1.0, unit_exp(dim, i, 2)}});
}

/// sum over the first `count` coordinates of (z_i - c_i)^2.
inline AnalyticField norm_squared(int dim, int count, const Eigen::VectorXd& center = {})
{
    require(count >= 1 && count <= dim, "norm_squared: bad coordinate count");
    std::vector<Term> t;
    std::vector<int> zero(static_cast<std::size_t>(dim), 0);
    double c0 = 0;
    for (int i = 0; i < count; ++i) {
        const double c = center.size() ? center[i] : 0.0;
        t.push_back({1.0, unit_exp(dim, i, 2)});
        if (c != 0.0) t.push_back({-2.0 * c, unit_exp(dim, i, 1)});
        c0 += c * c;
    }
    if (c0 != 0.0) t.push_back({c0, zero});
    return polynomial("normsq", dim, t);
}

/// <a, z_{0..k}> + c over the leading coordinates.
inline AnalyticField affine(int dim, const Eigen::VectorXd& a, double c)
{
    require(a.size() <= dim, "affine: too many coefficients");
    std::vector<Term> t{{c, std::vector<int>(static_cast<std::size_t>(dim), 0)}};
    for (int i = 0; i < a.size(); ++i)
        if (a[i] != 0.0) t.push_back({a[i], unit_exp(dim, i, 1)});
    return polynomial("affine", dim, t);
}

/// Re (z_0 + i z_1)^3 = z_0^3 - 3 z_0 z_1^2, harmonic in the plane.
inline AnalyticField harmonic_cubic(int dim)
{
    require(dim >= 2, "harmonic_cubic needs two coordinates");
    std::vector<int> e = unit_exp(dim, 0, 1);
    e[1] = 2;
    return polynomial("harm3", dim, {{1.0, unit_exp(dim, 0, 3)}, {-3.0, e}});
}

/// rho^p for the gauge (||z1||^4 + beta ||z2||^2)^(1/4).
inline AnalyticField gauge_power(const CarnotStep2& g, double beta, double power)
{
    return {"gaugepow", std::make_shared<detail::GaugePowerImpl>(g.v1(), g.v2(), beta, power)};
}

/// Folland-type kernel N^(2-Q) with N = (||z1||^4 + 16 ||z2||^2)^(1/4), pole at `pole`:
/// p -> N(pole^{-1} p)^(2-Q). Sub-elliptic harmonic off the pole on H^n.
inline AnalyticField folland_kernel(const CarnotStep2& g, const GPoint& pole)
{
    return AnalyticField("folland", std::make_shared<detail::AffinePullbackImpl>(
                                        std::make_shared<detail::GaugePowerImpl>(g.v1(), g.v2(), 16.0, 2.0 - g.homogeneous_dim()),
                                        g.left_translation_jacobian(g.inverse(pole)), g.inverse(pole).flat()));
}

inline AnalyticField folland_kernel(const CarnotStep2& g) { return folland_kernel(g, g.identity()); }

} // namespace fields

} // namespace amv
