#pragma once

#include <string>
#include <vector>

namespace specop {

struct Interval {
    double lo;
    double hi;
};

// Finite union of closed intervals, kept sorted and merged. Degenerate
// intervals [a, a] are kept as isolated points.
class IntervalUnion {
public:
    IntervalUnion() = default;
    explicit IntervalUnion(std::vector<Interval> parts);
    static IntervalUnion single(double lo, double hi) { return IntervalUnion({{lo, hi}}); }
    // "a:b,c:d"; an empty string is the empty set.
    static IntervalUnion parse(const std::string& text);

    const std::vector<Interval>& parts() const noexcept { return parts_; }
    bool empty() const noexcept { return parts_.empty(); }
    bool contains(double x) const noexcept;
    double measure() const noexcept;

    IntervalUnion intersect(const IntervalUnion& other) const;
    IntervalUnion unite(const IntervalUnion& other) const;
    // Closure of [lo, hi] minus this set.
    IntervalUnion complement(double lo, double hi) const;
    std::string str() const;

private:
    std::vector<Interval> parts_;
};

} // namespace specop
