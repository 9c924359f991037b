#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>
#include <utility>
#include <vector>

#include "carnot.hpp"
#include "errors.hpp"
#include "model_spaces.hpp"

namespace amv {

/// Metric on embedded cloud coordinates plus what a bucket search needs.
class CloudGeometry {
public:
    virtual ~CloudGeometry() = default;
    virtual int dim() const = 0;
    virtual double distance(const double* a, const double* b) const = 0;
    /// Per-axis half-widths of a box around `a` containing every y with d(a, y) < r.
    virtual void search_halfwidth(const double* a, double r, double* w) const = 0;
    /// Number of coordinate images to search (quotient geometries); 1 otherwise.
    virtual int image_count() const { return 1; }
    virtual void image(int /*j*/, const double* a, double* out) const { std::copy(a, a + dim(), out); }
};

class EuclideanGeometry final : public CloudGeometry {
public:
    explicit EuclideanGeometry(int n) : n_(n) {}
    int dim() const override { return n_; }
    double distance(const double* a, const double* b) const override
    {
        double s = 0;
        for (int i = 0; i < n_; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    }
    void search_halfwidth(const double*, double r, double* w) const override { std::fill(w, w + n_, r); }

private:
    int n_;
};

/// Flat cone of angle 2 pi / k as the plane modulo rotation by 2 pi / k; points are stored
/// by a planar representative in the sector [0, 2 pi / k).
class ConeQuotientGeometry final : public CloudGeometry {
public:
    explicit ConeQuotientGeometry(int k) : k_(k) { require(k >= 1, "cone quotient order must be positive"); }
    int dim() const override { return 2; }
    double cone_angle() const { return 2.0 * std::numbers::pi / k_; }
    double distance(const double* a, const double* b) const override
    {
        double best = std::numeric_limits<double>::infinity();
        double img[2];
        for (int j = 0; j < k_; ++j) {
            image(j, b, img);
            best = std::min(best, std::hypot(a[0] - img[0], a[1] - img[1]));
        }
        return best;
    }
    void search_halfwidth(const double*, double r, double* w) const override { w[0] = w[1] = r; }
    int image_count() const override { return k_; }
    void image(int j, const double* a, double* out) const override
    {
        // half and quarter turns are applied exactly
        const double t = 2.0 * std::numbers::pi * j / k_;
        if (k_ == 2 && j == 1) {
            out[0] = -a[0];
            out[1] = -a[1];
            return;
        }
        if (k_ == 4) {
            switch (j) {
            case 0: out[0] = a[0]; out[1] = a[1]; return;
            case 1: out[0] = -a[1]; out[1] = a[0]; return;
            case 2: out[0] = -a[0]; out[1] = -a[1]; return;
            case 3: out[0] = a[1]; out[1] = -a[0]; return;
            }
        }
        const double c = std::cos(t), s = std::sin(t);
        out[0] = c * a[0] - s * a[1];
        out[1] = s * a[0] + c * a[1];
    }

    /// (rho, angle) cone coordinates of a planar representative.
    ConePoint to_cone(const double* a) const
    {
        double ang = std::atan2(a[1], a[0]);
        if (ang < 0.0) ang += 2.0 * std::numbers::pi;
        return {std::hypot(a[0], a[1]), std::fmod(ang, cone_angle())};
    }

private:
    int k_;
};

/// Step-2 group with a Koranyi-family gauge, flat coordinates.
class CarnotGeometry final : public CloudGeometry {
public:
    CarnotGeometry(CarnotStep2 g, Gauge gauge) : g_(std::move(g)), gauge_(std::move(gauge)), bnorm_(g_.bracket_norm()) {}
    int dim() const override { return g_.dim(); }
    double distance(const double* a, const double* b) const override
    {
        const int v1 = g_.v1();
        const Eigen::Map<const Eigen::VectorXd> fa(a, dim()), fb(b, dim());
        return gauge_distance(g_, gauge_, GPoint::from_flat(fa, v1), GPoint::from_flat(fb, v1));
    }
    void search_halfwidth(const double* a, double r, double* w) const override
    {
        const int v1 = g_.v1();
        double x1 = 0;
        for (int i = 0; i < v1; ++i) x1 += a[i] * a[i];
        x1 = std::sqrt(x1);
        for (int i = 0; i < v1; ++i) w[i] = r;
        const double w2 = gauge_.z2_bound(r) + 0.5 * bnorm_ * (x1 + r) * r;
        for (int k = 0; k < g_.v2(); ++k) w[v1 + k] = w2;
    }
    const CarnotStep2& group() const { return g_; }
    const Gauge& gauge() const { return gauge_; }

private:
    CarnotStep2 g_;
    Gauge gauge_;
    double bnorm_;
};

/// Finite metric measure space given by embedded points, cell masses and a geometry.
/// `clearance(i)` is the distance from point i to the artificial outer boundary of the
/// discretized region (infinity where the region has none).
class PointCloud {
public:
    PointCloud(std::shared_ptr<const CloudGeometry> geom, std::vector<double> coords, std::vector<double> mass,
               std::vector<double> clearance)
        : geom_(std::move(geom)), d_(geom_->dim()), coords_(std::move(coords)), mass_(std::move(mass)),
          clearance_(std::move(clearance))
    {
        require(coords_.size() == mass_.size() * static_cast<std::size_t>(d_), "cloud: coordinate count mismatch");
        require(clearance_.size() == mass_.size(), "cloud: clearance count mismatch");
        for (const double m : mass_) require(m > 0.0, "cloud: masses must be positive");
    }

    std::size_t size() const noexcept { return mass_.size(); }
    int dim() const noexcept { return d_; }
    double mass(std::size_t i) const { return mass_[i]; }
    double clearance(std::size_t i) const { return clearance_[i]; }
    const double* point(std::size_t i) const { return coords_.data() + i * static_cast<std::size_t>(d_); }
    Eigen::VectorXd coords(std::size_t i) const { return Eigen::Map<const Eigen::VectorXd>(point(i), d_); }
    const CloudGeometry& geometry() const { return *geom_; }
    double distance(std::size_t i, std::size_t j) const { return geom_->distance(point(i), point(j)); }

    void ball_members(std::size_t x, double r, std::vector<std::pair<std::size_t, double>>& out) const
    {
        out.clear();
        const Index& idx = index_for(r);
        std::vector<double> w(static_cast<std::size_t>(d_)), img(static_cast<std::size_t>(d_));
        std::vector<std::int64_t> lo(static_cast<std::size_t>(d_)), hi(static_cast<std::size_t>(d_)), cur;
        for (int j = 0; j < geom_->image_count(); ++j) {
            // y is a candidate if some image of y lies near x, i.e. y lies near the inverse image of x
            geom_->image((geom_->image_count() - j) % geom_->image_count(), point(x), img.data());
            geom_->search_halfwidth(img.data(), r, w.data());
            bool empty = false;
            for (int a = 0; a < d_; ++a) {
                lo[a] = std::max<std::int64_t>(0, idx.cell(a, img[a] - w[a]));
                hi[a] = std::min<std::int64_t>(idx.counts[a] - 1, idx.cell(a, img[a] + w[a]));
                empty |= lo[a] > hi[a];
            }
            if (empty) continue;
            cur = lo;
            for (;;) {
                std::int64_t base = 0;
                for (int a = 0; a + 1 < d_; ++a) base = base * idx.counts[a] + cur[a];
                const std::int64_t first = base * idx.counts[d_ - 1] + lo[d_ - 1];
                const std::int64_t last = base * idx.counts[d_ - 1] + hi[d_ - 1];
                auto it = std::lower_bound(idx.keys.begin(), idx.keys.end(), first);
                for (; it != idx.keys.end() && *it <= last; ++it) {
                    const std::size_t y = idx.order[static_cast<std::size_t>(it - idx.keys.begin())];
                    const double d = geom_->distance(point(x), point(y));
                    if (d < r) out.emplace_back(y, d);
                }
                int a = d_ - 2;
                for (; a >= 0; --a) {
                    if (++cur[a] <= hi[a]) break;
                    cur[a] = lo[a];
                }
                if (a < 0) break;
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end(), [](const auto& p, const auto& q) { return p.first == q.first; }),
                  out.end());
    }

private:
    struct Index {
        double radius = -1;
        std::vector<double> origin, cellw;
        std::vector<std::int64_t> counts;
        std::vector<std::int64_t> keys;     // sorted cell ids
        std::vector<std::size_t> order;     // point index for each key
        std::int64_t cell(int a, double v) const
        {
            return static_cast<std::int64_t>(std::floor((v - origin[a]) / cellw[a]));
        }
    };

    const Index& index_for(double r) const
    {
        std::lock_guard lock(index_mutex_);
        if (index_ && index_->radius == r) return *index_;
        auto idx = std::make_shared<Index>();
        idx->radius = r;
        const std::size_t n = size();
        idx->origin.assign(static_cast<std::size_t>(d_), std::numeric_limits<double>::infinity());
        std::vector<double> top(static_cast<std::size_t>(d_), -std::numeric_limits<double>::infinity());
        std::vector<double> w(static_cast<std::size_t>(d_)), wmax(static_cast<std::size_t>(d_), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (int a = 0; a < d_; ++a) {
                idx->origin[a] = std::min(idx->origin[a], point(i)[a]);
                top[a] = std::max(top[a], point(i)[a]);
            }
        // cell width ~ typical search half-width, capped so no axis gets more than 4096 cells
        std::vector<double> zero(static_cast<std::size_t>(d_), 0.0);
        geom_->search_halfwidth(zero.data(), r, w.data());
        idx->cellw.resize(static_cast<std::size_t>(d_));
        idx->counts.resize(static_cast<std::size_t>(d_));
        for (int a = 0; a < d_; ++a) {
            const double extent = std::max(top[a] - idx->origin[a], 1e-300);
            idx->cellw[a] = std::max(w[a], extent / 4096.0);
            idx->counts[a] = static_cast<std::int64_t>(std::floor(extent / idx->cellw[a])) + 1;
        }
        std::vector<std::pair<std::int64_t, std::size_t>> kv(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::int64_t key = 0;
            for (int a = 0; a < d_; ++a) key = key * idx->counts[a] + idx->cell(a, point(i)[a]);
            kv[i] = {key, i};
        }
        std::sort(kv.begin(), kv.end());
        idx->keys.resize(n);
        idx->order.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            idx->keys[i] = kv[i].first;
            idx->order[i] = kv[i].second;
        }
        index_ = idx;
        return *index_;
    }

    std::shared_ptr<const CloudGeometry> geom_;
    int d_;
    std::vector<double> coords_;
    std::vector<double> mass_;
    std::vector<double> clearance_;
    mutable std::mutex index_mutex_;
    mutable std::shared_ptr<Index> index_;
};

namespace clouds {

/// Cell-centred square grid of spacing h on [lo, hi]^2 in the plane; masses h^2.
/// Clearance is the distance to the box boundary.
inline PointCloud euclidean_square(double lo, double hi, double h)
{
    require(hi > lo && h > 0.0, "euclidean_square: bad box");
    const auto n = static_cast<long>(std::floor((hi - lo) / h));
    std::vector<double> c, m, cl;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            const double x = lo + (i + 0.5) * h, y = lo + (j + 0.5) * h;
            c.push_back(x);
            c.push_back(y);
            m.push_back(h * h);
            cl.push_back(std::min({x - lo, hi - x, y - lo, hi - y}));
        }
    return PointCloud(std::make_shared<EuclideanGeometry>(2), std::move(c), std::move(m), std::move(cl));
}

/// Cell-centred grid on [x_lo, x_hi] x [0, height] in the half-plane {y >= 0}. The edge
/// y = 0 is the genuine boundary; the other three sides are artificial.
inline PointCloud half_plane(double x_lo, double x_hi, double height, double h)
{
    require(x_hi > x_lo && height > 0.0 && h > 0.0, "half_plane: bad box");
    const auto nx = static_cast<long>(std::floor((x_hi - x_lo) / h));
    const auto ny = static_cast<long>(std::floor(height / h));
    std::vector<double> c, m, cl;
    for (long i = 0; i < nx; ++i)
        for (long j = 0; j < ny; ++j) {
            const double x = x_lo + (i + 0.5) * h, y = (j + 0.5) * h;
            c.push_back(x);
            c.push_back(y);
            m.push_back(h * h);
            cl.push_back(std::min({x - x_lo, x_hi - x, height - y}));
        }
    return PointCloud(std::make_shared<EuclideanGeometry>(2), std::move(c), std::move(m), std::move(cl));
}

/// Flat cone of angle 2 pi / k (k in {1, 2, 4}) as the square grid modulo rotation,
/// restricted to distance < radius from the apex.
inline PointCloud cone(int k, double radius, double h)
{
    require(k == 1 || k == 2 || k == 4, "cone clouds support angles 2pi, pi and pi/2");
    require(radius > 0.0 && h > 0.0, "cone: bad radius or spacing");
    const auto n = static_cast<long>(std::ceil(radius / h));
    std::vector<double> c, m, cl;
    for (long i = -n; i < n; ++i)
        for (long j = -n; j < n; ++j) {
            const double x = (i + 0.5) * h, y = (j + 0.5) * h;
            const bool in_sector = k == 1 || (k == 2 && y > 0.0) || (k == 4 && x > 0.0 && y > 0.0);
            const double rho = std::hypot(x, y);
            if (!in_sector || rho >= radius) continue;
            c.push_back(x);
            c.push_back(y);
            m.push_back(h * h);
            cl.push_back(radius - rho);
        }
    return PointCloud(std::make_shared<ConeQuotientGeometry>(k), std::move(c), std::move(m), std::move(cl));
}

} // namespace clouds

} // namespace amv
