#pragma once

// G-means clustering over 2-D points: grow k from 1, test each cluster's
// 1-D projection (onto the axis between its 2-means children) for
// normality with the Anderson-Darling statistic, split while the test
// rejects, then polish with a final k-means pass.
//
// Determinism: k-means++ seeding draws from a caller-seeded mt19937_64
// through fixed 53-bit uniforms, so runs are reproducible across
// platforms for a given seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nascur {

struct Point2 {
    double x = 0, y = 0;
};

struct Clustering {
    std::vector<Point2> centers;
    std::vector<int> assignment;  // point index -> center index

    std::vector<std::vector<int>> groups() const {
        std::vector<std::vector<int>> g(centers.size());
        for (std::size_t i = 0; i < assignment.size(); ++i)
            g[assignment[i]].push_back(static_cast<int>(i));
        return g;
    }
};

namespace detail {

inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double dist2(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline std::vector<Point2> kmeanspp_seed(const std::vector<Point2>& pts, int k,
                                         std::mt19937_64& rng) {
    std::vector<Point2> centers;
    centers.push_back(pts[static_cast<std::size_t>(u01(rng) * pts.size()) % pts.size()]);
    std::vector<double> d2(pts.size());
    while (static_cast<int>(centers.size()) < k) {
        double total = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = dist2(pts[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, dist2(pts[i], centers[c]));
            d2[i] = best;
            total += best;
        }
        if (total <= 0) {
            centers.push_back(pts[0]);
            continue;
        }
        double r = u01(rng) * total;
        std::size_t pick = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r -= d2[i];
            if (r <= 0) { pick = i; break; }
            pick = i;
        }
        centers.push_back(pts[pick]);
    }
    return centers;
}

// Lloyd iterations until relative center shift drops below tolerance.
// Emptied clusters are dropped.
inline Clustering kmeans(const std::vector<Point2>& pts, std::vector<Point2> centers,
                         int max_iter = 100, double tol = 1e-6) {
    Clustering out;
    out.assignment.assign(pts.size(), 0);
    for (int it = 0; it < max_iter; ++it) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double bd = dist2(pts[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c) {
                double d = dist2(pts[i], centers[c]);
                if (d < bd) { bd = d; best = static_cast<int>(c); }
            }
            out.assignment[i] = best;
        }
        std::vector<Point2> next(centers.size());
        std::vector<int> count(centers.size(), 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            next[out.assignment[i]].x += pts[i].x;
            next[out.assignment[i]].y += pts[i].y;
            ++count[out.assignment[i]];
        }
        double shift = 0, scale = 0;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (count[c] == 0) { next[c] = centers[c]; continue; }
            next[c].x /= count[c];
            next[c].y /= count[c];
            shift += std::sqrt(dist2(next[c], centers[c]));
            scale += std::sqrt(next[c].x * next[c].x + next[c].y * next[c].y) + 1.0;
        }
        centers = std::move(next);
        if (shift <= tol * scale) break;
    }
    // Final assignment against the settled centers; drop empty clusters.
    std::vector<int> count(centers.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        int best = 0;
        double bd = dist2(pts[i], centers[0]);
        for (std::size_t c = 1; c < centers.size(); ++c) {
            double d = dist2(pts[i], centers[c]);
            if (d < bd) { bd = d; best = static_cast<int>(c); }
        }
        out.assignment[i] = best;
        ++count[best];
    }
    std::vector<int> remap(centers.size(), -1);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (count[c] == 0) continue;
        remap[c] = static_cast<int>(out.centers.size());
        out.centers.push_back(centers[c]);
    }
    for (auto& a : out.assignment) a = remap[a];
    return out;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Anderson-Darling A*^2 with mean and variance estimated from the
// sample (case 3), including the small-sample correction.
inline double anderson_darling_stat(std::vector<double> xs) {
    const std::size_t n = xs.size();
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    if (var <= 0) return 0.0;
    const double sd = std::sqrt(var);
    std::sort(xs.begin(), xs.end());
    double a2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double zi = std::clamp(normal_cdf((xs[i] - mean) / sd), 1e-12, 1.0 - 1e-12);
        double zr = std::clamp(normal_cdf((xs[n - 1 - i] - mean) / sd), 1e-12, 1.0 - 1e-12);
        a2 += (2.0 * static_cast<double>(i) + 1.0) * (std::log(zi) + std::log(1.0 - zr));
    }
    a2 = -static_cast<double>(n) - a2 / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    return a2 * (1.0 + 4.0 / nn - 25.0 / (nn * nn));
}

// Upper-tail p-value for the case-3 modified statistic.
inline double anderson_darling_pvalue(double a) {
    if (a < 0.2) return 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
    if (a < 0.34) return 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
    if (a < 0.6) return std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
    return std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
}

}  // namespace detail

struct GMeansOptions {
    double alpha = 1e-4;      // significance for the normality test
    std::uint64_t seed = 0;
    int max_k = 64;
    int min_split_size = 8;   // clusters smaller than this never split
};

inline Clustering gmeans(const std::vector<Point2>& pts, const GMeansOptions& opts = {}) {
    Clustering out;
    if (pts.empty()) return out;

    std::mt19937_64 rng(opts.seed);
    Point2 mean{};
    for (const auto& p : pts) { mean.x += p.x; mean.y += p.y; }
    mean.x /= static_cast<double>(pts.size());
    mean.y /= static_cast<double>(pts.size());
    std::vector<Point2> centers{mean};

    bool changed = true;
    while (changed && static_cast<int>(centers.size()) < opts.max_k) {
        changed = false;
        auto cl = detail::kmeans(pts, centers);
        std::vector<Point2> next_centers;
        auto groups = cl.groups();
        for (std::size_t c = 0; c < cl.centers.size(); ++c) {
            const auto& members = groups[c];
            if (static_cast<int>(members.size()) < opts.min_split_size) {
                next_centers.push_back(cl.centers[c]);
                continue;
            }
            std::vector<Point2> sub;
            sub.reserve(members.size());
            for (int i : members) sub.push_back(pts[i]);

            auto children = detail::kmeans(sub, detail::kmeanspp_seed(sub, 2, rng));
            if (children.centers.size() < 2) {
                next_centers.push_back(cl.centers[c]);
                continue;
            }
            const Point2 v{children.centers[0].x - children.centers[1].x,
                           children.centers[0].y - children.centers[1].y};
            const double vn2 = v.x * v.x + v.y * v.y;
            if (vn2 <= 0) {
                next_centers.push_back(cl.centers[c]);
                continue;
            }
            std::vector<double> proj;
            proj.reserve(sub.size());
            for (const auto& p : sub) proj.push_back((p.x * v.x + p.y * v.y) / std::sqrt(vn2));
            const double a = detail::anderson_darling_stat(std::move(proj));
            if (detail::anderson_darling_pvalue(a) < opts.alpha) {
                next_centers.push_back(children.centers[0]);
                next_centers.push_back(children.centers[1]);
                changed = true;
            } else {
                next_centers.push_back(cl.centers[c]);
            }
        }
        centers = std::move(next_centers);
    }
    return detail::kmeans(pts, centers);
}

}  // namespace nascur
