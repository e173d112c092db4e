#include "specop/intervals.hpp"
#include "specop/core.hpp"

#include <algorithm>
#include <sstream>

namespace specop {

IntervalUnion::IntervalUnion(std::vector<Interval> parts) {
    std::erase_if(parts, [](const Interval& iv) { return !(iv.hi >= iv.lo); });
    std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (const auto& iv : parts) {
        if (!parts_.empty() && iv.lo <= parts_.back().hi)
            parts_.back().hi = std::max(parts_.back().hi, iv.hi);
        else
            parts_.push_back(iv);
    }
}

IntervalUnion IntervalUnion::parse(const std::string& text) {
    std::vector<Interval> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        auto colon = item.find(':');
        if (colon == std::string::npos) fail(ErrorKind::spec_invalid, "interval '" + item + "' is not lo:hi");
        try {
            double lo = std::stod(item.substr(0, colon));
            double hi = std::stod(item.substr(colon + 1));
            if (!(hi >= lo)) fail(ErrorKind::spec_invalid, "interval '" + item + "' has hi < lo");
            parts.push_back({lo, hi});
        } catch (const std::logic_error&) {
            fail(ErrorKind::spec_invalid, "interval '" + item + "' is not numeric");
        }
    }
    return IntervalUnion(std::move(parts));
}

bool IntervalUnion::contains(double x) const noexcept {
    return std::any_of(parts_.begin(), parts_.end(), [x](const Interval& iv) { return iv.lo <= x && x <= iv.hi; });
}

double IntervalUnion::measure() const noexcept {
    double m = 0.0;
    for (const auto& iv : parts_) m += iv.hi - iv.lo;
    return m;
}

IntervalUnion IntervalUnion::intersect(const IntervalUnion& other) const {
    std::vector<Interval> out;
    for (const auto& a : parts_)
        for (const auto& b : other.parts_) {
            double lo = std::max(a.lo, b.lo), hi = std::min(a.hi, b.hi);
            if (hi >= lo) out.push_back({lo, hi});
        }
    return IntervalUnion(std::move(out));
}

IntervalUnion IntervalUnion::unite(const IntervalUnion& other) const {
    auto all = parts_;
    all.insert(all.end(), other.parts_.begin(), other.parts_.end());
    return IntervalUnion(std::move(all));
}

IntervalUnion IntervalUnion::complement(double lo, double hi) const {
    std::vector<Interval> out;
    double cur = lo;
    for (const auto& iv : parts_) {
        if (iv.hi < lo || iv.lo > hi) continue;
        if (iv.lo > cur) out.push_back({cur, iv.lo});
        cur = std::max(cur, iv.hi);
    }
    if (cur < hi) out.push_back({cur, hi});
    return IntervalUnion(std::move(out));
}

std::string IntervalUnion::str() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        if (i) os << ',';
        os << parts_[i].lo << ':' << parts_[i].hi;
    }
    return os.str();
}

} // namespace specop
