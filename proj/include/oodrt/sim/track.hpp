#pragma once

// Road centerline built from straights and circular arcs, with lateral
// (left-positive) coordinates relative to it.

#include <limits>
#include <optional>
#include <vector>

#include "oodrt/core/geometry.hpp"

namespace oodrt::sim {

struct Pose2 {
    double x = 0, y = 0, theta = 0;
};

struct TrackPiece {
    enum Kind { straight, arc } kind = straight;
    double length = 0;  // straight: metres; arc: arc length
    double radius = 0;  // arc only
    int turn = 1;       // +1 left, -1 right
};

// Position along the track: arc length s, lateral offset (left positive)
// and the centerline heading at s.
struct TrackCoord {
    double s = 0, lateral = 0, heading = 0;
};

class Track {
public:
    Track() = default;
    Track(Pose2 start, std::vector<TrackPiece> pieces, bool closed) : start_(start), pieces_(std::move(pieces)), closed_(closed) {
        if (pieces_.empty()) throw argument_error("track needs at least one piece");
        Pose2 p = start_;
        double s = 0;
        for (const auto& pc : pieces_) {
            if (!(pc.length > 0) || (pc.kind == TrackPiece::arc && !(pc.radius > 0)))
                throw argument_error("track piece with non-positive length or radius");
            starts_.push_back(p);
            offsets_.push_back(s);
            p = advance(p, pc, pc.length);
            s += pc.length;
        }
        length_ = s;
    }

    // Two straights joined by two left half-circles (counter-clockwise).
    static Track loop(double straight = 3.0, double radius = 0.8) {
        const double half = kPi * radius;
        return Track({0, 0, 0},
                     {{TrackPiece::straight, straight}, {TrackPiece::arc, half, radius, 1},
                      {TrackPiece::straight, straight}, {TrackPiece::arc, half, radius, 1}},
                     true);
    }
    static Track straight_line(double length = 12.0) { return Track({0, 0, 0}, {{TrackPiece::straight, length}}, false); }

    double length() const { return length_; }
    bool closed() const { return closed_; }
    const std::vector<TrackPiece>& pieces() const { return pieces_; }

    // Centerline pose at arc length s, offset laterally by `lateral`.
    Pose2 pose_at(double s, double lateral = 0.0) const {
        s = normalize_s(s);
        std::size_t i = piece_index(s);
        Pose2 p = advance(starts_[i], pieces_[i], s - offsets_[i]);
        const Vec2 n = left_normal(p.theta);
        return {p.x + n.x * lateral, p.y + n.y * lateral, p.theta};
    }

    double curvature_at(double s) const {
        const auto& pc = pieces_[piece_index(normalize_s(s))];
        return pc.kind == TrackPiece::arc ? pc.turn / pc.radius : 0.0;
    }

    // Nearest centerline coordinate of world point q among pieces whose
    // range covers the projection. nullopt when no piece does.
    std::optional<TrackCoord> locate(Vec2 q) const {
        std::optional<TrackCoord> best;
        double best_abs = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const auto& pc = pieces_[i];
            const Pose2& st = starts_[i];
            TrackCoord c;
            if (pc.kind == TrackPiece::straight) {
                const Vec2 d = q - Vec2{st.x, st.y};
                const double along = d.dot(heading_vec(st.theta));
                if (along < 0 || along > pc.length) continue;
                c = {offsets_[i] + along, d.dot(left_normal(st.theta)), st.theta};
            } else {
                const Vec2 n = left_normal(st.theta);
                const Vec2 center = Vec2{st.x, st.y} + n * (pc.radius * pc.turn);
                const Vec2 r = q - center;
                const double rho = r.norm();
                // Angle swept from the start radius, in the turning direction.
                const Vec2 r0 = Vec2{st.x, st.y} - center;
                double ang = std::atan2(r0.x * r.y - r0.y * r.x, r0.dot(r)) * pc.turn;
                if (ang < 0) ang += 2 * kPi;
                const double sweep = pc.length / pc.radius;
                if (ang > sweep) continue;
                c = {offsets_[i] + ang * pc.radius, (pc.radius - rho) * pc.turn, wrap_angle(st.theta + pc.turn * ang)};
            }
            if (std::abs(c.lateral) < best_abs) {
                best_abs = std::abs(c.lateral);
                best = c;
            }
        }
        return best;
    }

private:
    static Pose2 advance(Pose2 p, const TrackPiece& pc, double ds) {
        if (pc.kind == TrackPiece::straight) return {p.x + ds * std::cos(p.theta), p.y + ds * std::sin(p.theta), p.theta};
        const double dth = pc.turn * ds / pc.radius;
        const Vec2 n = left_normal(p.theta);
        const Vec2 c = Vec2{p.x, p.y} + n * (pc.radius * pc.turn);
        const Vec2 r0 = Vec2{p.x, p.y} - c;
        const double cs = std::cos(dth), sn = std::sin(dth);
        return {c.x + r0.x * cs - r0.y * sn, c.y + r0.x * sn + r0.y * cs, wrap_angle(p.theta + dth)};
    }
    double normalize_s(double s) const {
        if (closed_) {
            s = std::fmod(s, length_);
            if (s < 0) s += length_;
            return s;
        }
        return std::clamp(s, 0.0, length_);
    }
    std::size_t piece_index(double s) const {
        std::size_t i = 0;
        while (i + 1 < pieces_.size() && s >= offsets_[i + 1]) ++i;
        return i;
    }

    Pose2 start_;
    std::vector<TrackPiece> pieces_;
    bool closed_ = false;
    std::vector<Pose2> starts_;
    std::vector<double> offsets_;
    double length_ = 0;
};

}  // namespace oodrt::sim
