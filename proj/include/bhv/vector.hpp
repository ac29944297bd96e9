#pragma once

#include <cmath>
#include <map>

#include "split.hpp"

namespace bhv {

// Sparse signed coordinate vector over the universe of interior splits. Only
// nonzero coordinates are stored; iteration follows the fixed split order.
class AmbientVector {
  public:
    AmbientVector() = default;

    double operator[](const Split& s) const {
        auto it = coords_.find(s);
        return it == coords_.end() ? 0.0 : it->second;
    }

    void set(const Split& s, double v) {
        if (v == 0.0)
            coords_.erase(s);
        else
            coords_[s] = v;
    }

    void add(const Split& s, double v) { set(s, (*this)[s] + v); }

    const std::map<Split, double>& coords() const { return coords_; }
    bool empty() const { return coords_.empty(); }

    AmbientVector& operator+=(const AmbientVector& o) {
        for (const auto& [s, v] : o.coords_) add(s, v);
        return *this;
    }
    AmbientVector& operator-=(const AmbientVector& o) {
        for (const auto& [s, v] : o.coords_) add(s, -v);
        return *this;
    }
    AmbientVector& operator*=(double c) {
        if (c == 0.0) {
            coords_.clear();
            return *this;
        }
        for (auto& [s, v] : coords_) v *= c;
        return *this;
    }

    friend AmbientVector operator+(AmbientVector a, const AmbientVector& b) { return a += b; }
    friend AmbientVector operator-(AmbientVector a, const AmbientVector& b) { return a -= b; }
    friend AmbientVector operator*(double c, AmbientVector a) { return a *= c; }

    double norm() const {
        double s2 = 0;
        for (const auto& [s, v] : coords_) s2 += v * v;
        return std::sqrt(s2);
    }

    friend double dot(const AmbientVector& a, const AmbientVector& b) {
        // Walk the smaller map.
        const AmbientVector& small = a.coords_.size() <= b.coords_.size() ? a : b;
        const AmbientVector& big = a.coords_.size() <= b.coords_.size() ? b : a;
        double acc = 0;
        for (const auto& [s, v] : small.coords_) acc += v * big[s];
        return acc;
    }

  private:
    std::map<Split, double> coords_;
};

}  // namespace bhv
