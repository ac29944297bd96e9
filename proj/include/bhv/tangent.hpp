#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "geodesic.hpp"

namespace bhv {

// A vector of the tangent cone at a base tree: signed coordinates over
// interior splits (the base's own splits, plus splits compatible with the
// base carried at their target weights) and one coordinate per pendant edge.
class TangentVector {
  public:
    TangentVector(AmbientVector interior, std::vector<double> pendant, Tree base)
        : interior_(std::move(interior)), pendant_(std::move(pendant)), base_(std::move(base)) {
        if (pendant_.size() != base_.taxa()->size())
            throw std::invalid_argument("pendant coordinate count does not match leaf count");
    }

    const AmbientVector& interior() const { return interior_; }
    const std::vector<double>& pendant() const { return pendant_; }
    const Tree& base() const { return base_; }

    double norm() const {
        double s2 = 0;
        for (const auto& [s, v] : interior_.coords()) s2 += v * v;
        for (double p : pendant_) s2 += p * p;
        return std::sqrt(s2);
    }

    // Difference of two vectors anchored at the same base point.
    friend TangentVector operator-(const TangentVector& x, const TangentVector& y) {
        if (!x.base_.same_taxa_as(y.base_) || !trees_close(x.base_, y.base_, 0.0))
            throw std::invalid_argument("tangent vectors anchored at different base trees");
        AmbientVector interior = x.interior_ - y.interior_;
        std::vector<double> pendant(x.pendant_.size());
        for (std::size_t i = 0; i < pendant.size(); ++i)
            pendant[i] = x.pendant_[i] - y.pendant_[i];
        return TangentVector(std::move(interior), std::move(pendant), x.base_);
    }

  private:
    AmbientVector interior_;
    std::vector<double> pendant_;
    Tree base_;
};

// The base tree's own coordinates as a tangent vector at itself (the
// reference point that log-mapped inputs are measured against).
inline TangentVector base_coordinates(const Tree& base) {
    return TangentVector(embed(base), base.pendant_weights(), base);
}

// Log map of T at `base`: the tangent-cone image whose distance to the base't
// own coordinates equals the geodesic distance. Shared splits keep T's
// weight; each exchanged source group A_i is scaled by -||B_i||_T/||A_i||_base
// so its contraction speed and the arrival of B_i are folded into one
// coordinate block per source split.
inline TangentVector log_map(const Tree& t, const Tree& base) {
    GeodesicPath g = geodesic(base, t);
    AmbientVector coords;
    for (const CommonSplit& c : g.support().common) coords.set(c.split, c.w_target);
    for (const SupportPair& p : g.support().pairs) {
        const double nb = set_norm(p.b, t);
        const double na = set_norm(p.a, base);
        for (const Split& a : p.a) coords.set(a, -(nb / na) * base.weight(a));
    }
    return TangentVector(std::move(coords), t.pendant_weights(), base);
}

// Keep only the coordinates of splits in S; pendant coordinates are dropped.
inline TangentVector project_tangent(const TangentVector& v, const SplitSet& s) {
    AmbientVector coords;
    for (const Split& x : s) coords.set(x, v.interior()[x]);
    return TangentVector(std::move(coords), std::vector<double>(v.pendant().size(), 0.0),
                         v.base());
}

// A movement direction at a base tree: signed rates on the base's own splits
// plus strictly positive rates on an extension set of new splits, all
// mutually compatible with the base.
struct Direction {
    AmbientVector coords;
    SplitSet extension;
};

namespace detail {

struct SupportSignature {
    SplitSet common;
    std::vector<std::pair<SplitSet, SplitSet>> pairs;
    bool operator==(const SupportSignature&) const = default;
};

inline SupportSignature signature_of(const Support& sup) {
    SupportSignature sig;
    sig.common = sup.common_splits();
    for (const SupportPair& p : sup.pairs)
        sig.pairs.emplace_back(SplitSet(p.a.begin(), p.a.end()),
                               SplitSet(p.b.begin(), p.b.end()));
    return sig;
}

inline void validate_direction(const Tree& base, const Direction& dir) {
    const SplitSet e = base.split_set();
    if (dir.coords.empty()) throw std::invalid_argument("zero direction");
    for (const Split& f : dir.extension) {
        if (e.count(f)) throw std::invalid_argument("extension split already in the base tree");
        if (!(dir.coords[f] > 0))
            throw std::invalid_argument("extension splits need a strictly positive rate");
        if (!compatible_with_all(f, e))
            throw std::invalid_argument("extension split incompatible with the base tree");
    }
    if (!mutually_compatible(dir.extension))
        throw std::invalid_argument("extension splits incompatible with each other");
    for (const auto& [s, v] : dir.coords.coords())
        if (!e.count(s) && !dir.extension.count(s))
            throw std::invalid_argument("direction rate on a split outside the base orthant");
}

}  // namespace detail

// One-sided limit of the log map of T as the base moves with rate `dir`:
// lim of log_map(t, base + lam * dir) for lam -> 0+. The support of the
// perturbed geodesic stabilizes for small lam; once three successive
// halvings agree, the limit coordinates are evaluated in closed form. With an
// empty extension the limit is the log map at the base itself.
inline TangentVector directional_limit(const Tree& t, const Tree& base, const Direction& dir) {
    detail::validate_direction(base, dir);
    if (dir.extension.empty()) return log_map(t, base);

    const SplitSet e = base.split_set();
    double lam = 1e-3 * (1.0 + interior_norm(base));
    for (const auto& [s, v] : dir.coords.coords())
        if (e.count(s) && v < 0) lam = std::min(lam, 0.49 * base.weight(s) / -v);

    auto perturbed = [&](double l) {
        std::map<Split, double> weights = base.interior_weights();
        for (const auto& [s, v] : dir.coords.coords()) {
            if (e.count(s))
                weights[s] += l * v;
            else
                weights[s] = l * v;
        }
        return Tree(base.taxa(), std::move(weights), base.pendant_weights());
    };

    detail::SupportSignature sig;
    int streak = 0;
    for (int iter = 0;; ++iter, lam /= 2) {
        if (iter > 80)
            throw std::runtime_error("perturbed geodesic support did not stabilize");
        detail::SupportSignature cur =
            detail::signature_of(geodesic(perturbed(lam), t).support());
        if (iter > 0 && cur == sig) {
            if (++streak >= 2) break;  // three successive identical signatures
        } else {
            streak = 0;
        }
        sig = std::move(cur);
    }

    AmbientVector coords;
    for (const Split& s : sig.common) coords.set(s, t.weight(s));
    for (const auto& [aset, bset] : sig.pairs) {
        const double nb = set_norm(bset, t);
        // In the limit the extension splits carry no weight, so the group's
        // norm comes from its base splits when it has any; a group made of
        // extension splits only shrinks uniformly at the direction's own
        // scale, which cancels.
        SplitSet a_base;
        for (const Split& a : aset)
            if (e.count(a)) a_base.insert(a);
        if (!a_base.empty()) {
            const double na = norm(a_base, base);
            for (const Split& a : a_base) coords.set(a, -(nb / na) * base.weight(a));
            for (const Split& a : aset)
                if (!e.count(a)) coords.set(a, 0.0);
        } else {
            double nw2 = 0;
            for (const Split& a : aset) nw2 += dir.coords[a] * dir.coords[a];
            const double nw = std::sqrt(nw2);
            for (const Split& a : aset) coords.set(a, -(nb / nw) * dir.coords[a]);
        }
    }
    return TangentVector(std::move(coords), t.pendant_weights(), base);
}

}  // namespace bhv
