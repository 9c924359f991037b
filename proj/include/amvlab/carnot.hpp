#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace amv {

/// Point of a step-2 group in exponential coordinates z = (z1, z2).
struct GPoint {
    Eigen::VectorXd z1;
    Eigen::VectorXd z2;

    GPoint() = default;
    GPoint(Eigen::VectorXd a, Eigen::VectorXd b) : z1(std::move(a)), z2(std::move(b)) {}

    /// Flattened coordinates (z1, z2).
    Eigen::VectorXd flat() const
    {
        Eigen::VectorXd f(z1.size() + z2.size());
        f << z1, z2;
        return f;
    }

    static GPoint from_flat(const Eigen::VectorXd& f, int v1)
    {
        return {f.head(v1), f.tail(f.size() - v1)};
    }
};

/// Stratified Lie algebra V1 (+) V2 with structure constants b[k](i, j), antisymmetric in (i, j).
/// The group law is the exact BCH product
///   (x y)_1 = x_1 + y_1,   (x y)_2,k = x_2,k + y_2,k + 1/2 x_1^T b[k] y_1.
class CarnotStep2 {
public:
    CarnotStep2(int v1, int v2, std::vector<Eigen::MatrixXd> bracket) : v1_(v1), v2_(v2), b_(std::move(bracket))
    {
        require(v1 >= 1, "carnot: v1 must be positive");
        require(v2 >= 0, "carnot: v2 must be nonnegative");
        require(static_cast<int>(b_.size()) == v2, "carnot: need one bracket matrix per second-layer direction");
        for (const auto& m : b_) {
            require(m.rows() == v1 && m.cols() == v1, "carnot: bracket matrices must be v1 x v1");
            require((m + m.transpose()).cwiseAbs().maxCoeff() == 0.0, "carnot: bracket must be antisymmetric");
        }
    }

    /// H^n: v1 = 2n, v2 = 1, b[0](i, n + i) = 1.
    static CarnotStep2 heisenberg(int n)
    {
        require(n >= 1, "heisenberg: n must be positive");
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        for (int i = 0; i < n; ++i) {
            b(i, n + i) = 1.0;
            b(n + i, i) = -1.0;
        }
        return CarnotStep2(2 * n, 1, {b});
    }

    /// Abelian R^n viewed as a step-1 group (v2 = 0).
    static CarnotStep2 euclidean(int n) { return CarnotStep2(n, 0, {}); }

    int v1() const noexcept { return v1_; }
    int v2() const noexcept { return v2_; }
    int dim() const noexcept { return v1_ + v2_; }
    /// Homogeneous dimension Q = v1 + 2 v2.
    int homogeneous_dim() const noexcept { return v1_ + 2 * v2_; }
    const Eigen::MatrixXd& bracket(int k) const { return b_[static_cast<std::size_t>(k)]; }
    /// Operator norm bound max_k ||b[k]||_2.
    double bracket_norm() const
    {
        double m = 0;
        for (const auto& b : b_) m = std::max(m, b.operatorNorm());
        return m;
    }

    GPoint identity() const { return {Eigen::VectorXd::Zero(v1_), Eigen::VectorXd::Zero(v2_)}; }

    void check(const GPoint& x) const
    {
        if (x.z1.size() != v1_ || x.z2.size() != v2_)
            throw InputError("carnot: point dimension (" + std::to_string(x.z1.size()) + "," +
                             std::to_string(x.z2.size()) + ") does not match group (" + std::to_string(v1_) + "," +
                             std::to_string(v2_) + ")");
    }

    GPoint multiply(const GPoint& x, const GPoint& y) const
    {
        check(x);
        check(y);
        GPoint out{x.z1 + y.z1, x.z2 + y.z2};
        for (int k = 0; k < v2_; ++k) out.z2[k] += 0.5 * x.z1.dot(b_[k] * y.z1);
        return out;
    }

    GPoint inverse(const GPoint& x) const
    {
        check(x);
        return {-x.z1, -x.z2};
    }

    /// delta_t (z1, z2) = (t z1, t^2 z2).
    GPoint dilate(double t, const GPoint& x) const
    {
        require(t > 0.0 && std::isfinite(t), "dilate: t must be positive");
        check(x);
        return {t * x.z1, t * t * x.z2};
    }

    /// Jacobian of the left translation p -> a p in flat coordinates (constant in p).
    Eigen::MatrixXd left_translation_jacobian(const GPoint& a) const
    {
        check(a);
        Eigen::MatrixXd J = Eigen::MatrixXd::Identity(dim(), dim());
        for (int k = 0; k < v2_; ++k) J.block(v1_ + k, 0, 1, v1_) = 0.5 * (a.z1.transpose() * b_[k]);
        return J;
    }

private:
    int v1_;
    int v2_;
    std::vector<Eigen::MatrixXd> b_;
};

/// Homogeneous pseudonorm of the form F(||z1||, z2).
class Gauge {
public:
    enum class Kind { koranyi, scaled_koranyi, plugin };

    /// (||z1||^4 + ||z2||^2)^(1/4).
    static Gauge koranyi() { return Gauge(Kind::koranyi, 1.0); }
    /// (||z1||^4 + beta ||z2||^2)^(1/4); beta = 16 is the Folland normalization on H^n.
    static Gauge scaled_koranyi(double beta)
    {
        require(beta > 0.0 && std::isfinite(beta), "scaled_koranyi: beta must be positive");
        return Gauge(Kind::scaled_koranyi, beta);
    }
    /// User profile rho(z) = profile(||z1||, z2). `z2_bound(r)` must bound |z2_k| on B_r(0).
    /// Plug-in gauges support Monte Carlo only.
    static Gauge plugin(std::function<double(double, const Eigen::VectorXd&)> profile,
                        std::function<double(double)> z2_bound)
    {
        Gauge g(Kind::plugin, 1.0);
        g.profile_ = std::move(profile);
        g.z2_bound_ = std::move(z2_bound);
        return g;
    }

    Kind kind() const noexcept { return kind_; }
    double beta() const noexcept { return beta_; }
    bool has_closed_form() const noexcept { return kind_ != Kind::plugin; }

    double value(const GPoint& x) const
    {
        const double s = x.z1.norm();
        if (kind_ == Kind::plugin) return profile_(s, x.z2);
        const double s2 = s * s;
        return std::sqrt(std::sqrt(s2 * s2 + beta_ * x.z2.squaredNorm()));
    }

    /// Bound on |z2_k| over B_r(0): r^2 / sqrt(beta) for the Koranyi family.
    double z2_bound(double r) const
    {
        if (kind_ == Kind::plugin) return z2_bound_(r);
        return r * r / std::sqrt(beta_);
    }

    /// Radius of the z2-section of B_r(0) above a given ||z1|| < r (Koranyi family only).
    double z2_section_radius(double r, double z1_norm) const
    {
        require(has_closed_form(), "gauge: plug-in gauges have no closed-form sections");
        const double r2 = r * r, s2 = z1_norm * z1_norm;
        const double d = (r2 - s2) * (r2 + s2);
        return d > 0.0 ? std::sqrt(d / beta_) : 0.0;
    }

    std::string name() const
    {
        switch (kind_) {
        case Kind::koranyi: return "koranyi";
        case Kind::scaled_koranyi: {
            std::ostringstream os;
            os << "scaled_koranyi(" << beta_ << ")";
            return os.str();
        }
        case Kind::plugin: return "plugin";
        }
        return "?";
    }

private:
    Gauge(Kind k, double beta) : kind_(k), beta_(beta) {}

    Kind kind_;
    double beta_;
    std::function<double(double, const Eigen::VectorXd&)> profile_;
    std::function<double(double)> z2_bound_;
};

/// d(x, y) = rho(y^{-1} x).
inline double gauge_distance(const CarnotStep2& g, const Gauge& gauge, const GPoint& x, const GPoint& y)
{
    return gauge.value(g.multiply(g.inverse(y), x));
}

/// Text format: "v1 <n>", "v2 <m>", then lines "bracket <k> <i> <j> <value>" with
/// 1-based indices and i != j; the antisymmetric partner is filled in.
inline CarnotStep2 read_carnot(std::istream& is)
{
    int v1 = -1, v2 = -1;
    std::vector<std::tuple<int, int, int, double>> entries;
    for (std::string line; std::getline(is, line);) {
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') continue;
        if (key == "v1") require(static_cast<bool>(ls >> v1), "carnot file: bad v1");
        else if (key == "v2") require(static_cast<bool>(ls >> v2), "carnot file: bad v2");
        else if (key == "bracket") {
            int k, i, j;
            double val;
            require(static_cast<bool>(ls >> k >> i >> j >> val), "carnot file: bad bracket line");
            entries.emplace_back(k, i, j, val);
        } else throw InputError("carnot file: unknown key '" + key + "'");
    }
    require(v1 >= 1 && v2 >= 0, "carnot file: v1/v2 missing");
    std::vector<Eigen::MatrixXd> b(static_cast<std::size_t>(v2), Eigen::MatrixXd::Zero(v1, v1));
    for (const auto& [k, i, j, val] : entries) {
        require(k >= 1 && k <= v2 && i >= 1 && i <= v1 && j >= 1 && j <= v1 && i != j,
                "carnot file: bracket index out of range");
        b[k - 1](i - 1, j - 1) = val;
        b[k - 1](j - 1, i - 1) = -val;
    }
    return CarnotStep2(v1, v2, std::move(b));
}

inline void write_carnot(std::ostream& os, const CarnotStep2& g)
{
    const auto old = os.precision(17);
    os << "v1 " << g.v1() << "\nv2 " << g.v2() << '\n';
    for (int k = 0; k < g.v2(); ++k)
        for (int i = 0; i < g.v1(); ++i)
            for (int j = i + 1; j < g.v1(); ++j)
                if (g.bracket(k)(i, j) != 0.0)
                    os << "bracket " << k + 1 << ' ' << i + 1 << ' ' << j + 1 << ' ' << g.bracket(k)(i, j) << '\n';
    os.precision(old);
}

} // namespace amv
