#pragma once

// Histogram (grid) Bayes filter over lane pose (d, phi).
// d: lateral offset from lane centre, metres, left positive.
// phi: heading relative to the lane direction, radians, left positive.

#include <cmath>
#include <vector>

#include "oodrt/core/image.hpp"
#include "oodrt/lane/segments.hpp"

namespace oodrt::lane {

struct LanePose {
    double d = 0, phi = 0;
};

struct LaneGrid {
    std::size_t nd = 41, nphi = 61;
    double d_min = -0.3, d_max = 0.3;
    double phi_min = -kPi / 2, phi_max = kPi / 2;

    std::size_t size() const { return nd * nphi; }
    double d_step() const { return (d_max - d_min) / static_cast<double>(nd - 1); }
    double phi_step() const { return (phi_max - phi_min) / static_cast<double>(nphi - 1); }
    double d_at(std::size_t i) const { return d_min + static_cast<double>(i) * d_step(); }
    double phi_at(std::size_t j) const { return phi_min + static_cast<double>(j) * phi_step(); }
    // Nearest cell, or false when outside the grid by more than half a cell.
    bool cell_of(double d, double phi, std::size_t& i, std::size_t& j) const {
        const double fi = std::round((d - d_min) / d_step()), fj = std::round((phi - phi_min) / phi_step());
        if (!(fi >= 0 && fi <= static_cast<double>(nd - 1) && fj >= 0 && fj <= static_cast<double>(nphi - 1))) return false;
        i = static_cast<std::size_t>(fi);
        j = static_cast<std::size_t>(fj);
        return true;
    }
};

// Probability grid, row-major over (d index, phi index).
struct Belief {
    LaneGrid grid;
    std::vector<double> p;

    static Belief uniform(const LaneGrid& g = {}) {
        return {g, std::vector<double>(g.size(), 1.0 / static_cast<double>(g.size()))};
    }
    double& at(std::size_t i, std::size_t j) { return p[i * grid.nphi + j]; }
    double at(std::size_t i, std::size_t j) const { return p[i * grid.nphi + j]; }
    double sum() const {
        double s = 0;
        for (double v : p) s += v;
        return s;
    }
    double entropy() const {
        double h = 0;
        for (double v : p)
            if (v > 0) h -= v * std::log(v);
        return h;
    }
    LanePose argmax() const {
        std::size_t best = 0;
        for (std::size_t k = 1; k < p.size(); ++k)
            if (p[k] > p[best]) best = k;
        return {grid.d_at(best / grid.nphi), grid.phi_at(best % grid.nphi)};
    }
};

struct FilterConfig {
    double sigma_d = 0.01, sigma_phi = 0.05;
    double floor = 1e-6;
    // Expected line offsets from the lane centre (left positive).
    double yellow_offset = 0.11;
    double white_offset = -0.11;
    double far_white_offset = 0.33;  // left road edge, seen across the oncoming lane
    double max_range = 0.8;          // ignore ground segments farther than this (m)
};

// Vote histogram: each ground segment votes, weighted by its length, for the
// pose that would put it on its expected line.
inline std::vector<double> segment_votes(const std::vector<GroundSegment>& segs, const LaneGrid& g,
                                         const FilterConfig& cfg = {}) {
    std::vector<double> h(g.size(), 0.0);
    for (const auto& s : segs) {
        Vec2 t = s.p1 - s.p0;
        const double len = t.norm();
        if (len < 1e-6) continue;
        if (s.p0.norm() > cfg.max_range || s.p1.norm() > cfg.max_range) continue;
        t = t * (1.0 / len);
        if (t.x < 0) t = t * -1.0;
        const Vec2 n{-t.y, t.x};
        const double l = s.p0.dot(n);  // signed distance of the line, left positive
        const double phi = -std::atan2(t.y, t.x);
        double d;
        if (s.color == LineColor::yellow) d = cfg.yellow_offset - l;
        else d = (l < 0 ? cfg.white_offset : cfg.far_white_offset) - l;
        std::size_t i, j;
        if (g.cell_of(d, phi, i, j)) h[i * g.nphi + j] += len;
    }
    return h;
}

namespace detail {

// Mass-conserving fractional shift along one axis; mass pushed past the
// edge piles up in the edge cell.
inline std::vector<double> shift_axis(const std::vector<double>& p, std::size_t n0, std::size_t n1, bool first,
                                      double cells) {
    std::vector<double> out(p.size(), 0.0);
    const std::size_t n = first ? n0 : n1;
    const double fl = std::floor(cells), frac = cells - fl;
    for (std::size_t a = 0; a < n0; ++a)
        for (std::size_t b = 0; b < n1; ++b) {
            const double m = p[a * n1 + b];
            if (m == 0) continue;
            const double k = static_cast<double>(first ? a : b) + fl;
            for (int s = 0; s < 2; ++s) {
                const double w = s == 0 ? 1.0 - frac : frac;
                if (w == 0) continue;
                const auto idx = static_cast<std::size_t>(std::clamp(k + s, 0.0, static_cast<double>(n - 1)));
                out[first ? idx * n1 + b : a * n1 + idx] += m * w;
            }
        }
    return out;
}

// Gaussian blur along one axis with half-sample symmetric reflection. The
// resulting transition matrix is symmetric and stochastic, hence doubly
// stochastic, so blurring never lowers entropy.
inline std::vector<double> blur_axis(const std::vector<double>& p, std::size_t n0, std::size_t n1, bool first,
                                     double sigma_cells) {
    if (sigma_cells <= 0) return p;
    const auto r = static_cast<long>(std::ceil(4 * sigma_cells));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double ks = 0;
    for (long i = -r; i <= r; ++i) ks += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma_cells * sigma_cells));
    for (double& v : k) v /= ks;
    const auto n = static_cast<long>(first ? n0 : n1);
    auto reflect = [n](long i) {
        while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
        return static_cast<std::size_t>(i);
    };
    std::vector<double> out(p.size(), 0.0);
    for (std::size_t a = 0; a < n0; ++a)
        for (std::size_t b = 0; b < n1; ++b) {
            const double m = p[a * n1 + b];
            if (m == 0) continue;
            const long c = static_cast<long>(first ? a : b);
            for (long o = -r; o <= r; ++o) {
                const std::size_t idx = reflect(c + o);
                out[first ? idx * n1 + b : a * n1 + idx] += m * k[static_cast<std::size_t>(o + r)];
            }
        }
    return out;
}

}  // namespace detail

inline Belief predict(Belief b, double delta_d, double delta_phi, const FilterConfig& cfg = {}) {
    const auto& g = b.grid;
    if (delta_d != 0) b.p = detail::shift_axis(b.p, g.nd, g.nphi, true, delta_d / g.d_step());
    if (delta_phi != 0) b.p = detail::shift_axis(b.p, g.nd, g.nphi, false, delta_phi / g.phi_step());
    b.p = detail::blur_axis(b.p, g.nd, g.nphi, true, cfg.sigma_d / g.d_step());
    b.p = detail::blur_axis(b.p, g.nd, g.nphi, false, cfg.sigma_phi / g.phi_step());
    return b;
}

inline Belief update(Belief b, const std::vector<double>& votes, const FilterConfig& cfg = {}) {
    if (votes.size() != b.p.size()) throw argument_error("vote histogram does not match the belief grid");
    double vs = 0;
    for (double v : votes) vs += v;
    if (vs > 0)
        for (std::size_t k = 0; k < b.p.size(); ++k) b.p[k] *= votes[k] / vs + cfg.floor;
    const double s = b.sum();
    if (!(s > 0) || !std::isfinite(s)) throw numeric_error("belief lost all mass");
    for (double& v : b.p) v /= s;
    return b;
}

struct BeliefStep {
    Belief belief;
    LanePose estimate;
};

inline BeliefStep belief_step(const Belief& b, const std::vector<double>& votes, LanePose motion,
                              const FilterConfig& cfg = {}) {
    Belief nb = update(predict(b, motion.d, motion.phi, cfg), votes, cfg);
    const LanePose est = nb.argmax();
    return {std::move(nb), est};
}

// Heatmap dump: rows are d (top = +d_max), columns phi; scaled to the max.
inline GrayFrame belief_image(const Belief& b) {
    const auto& g = b.grid;
    GrayFrame img(g.nphi, g.nd, 0);
    double mx = 0;
    for (double v : b.p) mx = std::max(mx, v);
    for (std::size_t i = 0; i < g.nd; ++i)
        for (std::size_t j = 0; j < g.nphi; ++j)
            img(j, g.nd - 1 - i) = static_cast<std::uint8_t>(mx > 0 ? std::lround(255.0 * b.at(i, j) / mx) : 0);
    return img;
}

}  // namespace oodrt::lane
