#pragma once

// Dated scalar series and calendar alignment. Dates are ISO-8601 strings
// ("2004-01-02"); lexicographic order equals chronological order, so no
// date arithmetic is needed for ordering or intersection.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>
#include <cmath>

namespace fieldattr {

struct ObservableSeries {
    std::vector<std::string> dates;
    std::vector<double> values;
    std::string label;

    std::size_t size() const { return dates.size(); }
    bool empty() const { return dates.empty(); }
};

struct AlignedPair {
    std::vector<std::string> dates;
    std::vector<double> x;
    std::vector<double> y;

    std::size_t size() const { return dates.size(); }
};

inline void check_series(const ObservableSeries& s) {
    if (s.dates.size() != s.values.size())
        throw std::runtime_error("series '" + s.label + "': dates/values length mismatch");
    for (std::size_t i = 1; i < s.dates.size(); ++i)
        if (!(s.dates[i - 1] < s.dates[i]))
            throw std::runtime_error("series '" + s.label + "': dates not strictly increasing at " + s.dates[i]);
    for (double v : s.values)
        if (!std::isfinite(v))
            throw std::runtime_error("series '" + s.label + "': non-finite value");
}

// Intersection of calendars, order preserved.
inline AlignedPair align(const ObservableSeries& a, const ObservableSeries& b) {
    if (a.empty() || b.empty()) throw std::runtime_error("align: empty series");
    check_series(a);
    check_series(b);
    AlignedPair out;
    std::unordered_map<std::string, std::size_t> bidx;
    bidx.reserve(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) bidx.emplace(b.dates[j], j);
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto it = bidx.find(a.dates[i]);
        if (it == bidx.end()) continue;
        out.dates.push_back(a.dates[i]);
        out.x.push_back(a.values[i]);
        out.y.push_back(b.values[it->second]);
    }
    if (out.dates.empty()) throw std::runtime_error("align: calendars do not intersect");
    return out;
}

// Restrict every series to the intersection of all calendars.
inline std::vector<ObservableSeries> align_many(const std::vector<const ObservableSeries*>& in) {
    if (in.empty()) throw std::runtime_error("align_many: no series");
    for (const auto* s : in) {
        if (!s || s->empty()) throw std::runtime_error("align_many: empty series");
        check_series(*s);
    }
    std::vector<std::string> common = in[0]->dates;
    for (std::size_t i = 1; i < in.size(); ++i) {
        std::unordered_map<std::string, bool> have;
        for (const auto& d : in[i]->dates) have.emplace(d, true);
        std::vector<std::string> next;
        for (const auto& d : common)
            if (have.count(d)) next.push_back(d);
        common.swap(next);
    }
    if (common.empty()) throw std::runtime_error("align_many: calendars do not intersect");
    std::vector<ObservableSeries> out;
    for (const auto* s : in) {
        std::unordered_map<std::string, double> at;
        for (std::size_t i = 0; i < s->size(); ++i) at.emplace(s->dates[i], s->values[i]);
        ObservableSeries r;
        r.label = s->label;
        r.dates = common;
        for (const auto& d : common) r.values.push_back(at.at(d));
        out.push_back(std::move(r));
    }
    return out;
}

inline ObservableSeries sub_series(const ObservableSeries& s, std::size_t begin, std::size_t end) {
    ObservableSeries out;
    out.label = s.label;
    out.dates.assign(s.dates.begin() + begin, s.dates.begin() + end);
    out.values.assign(s.values.begin() + begin, s.values.begin() + end);
    return out;
}

inline ObservableSeries log_series(const ObservableSeries& s, const std::string& label) {
    ObservableSeries out;
    out.label = label;
    out.dates = s.dates;
    out.values.reserve(s.size());
    for (double v : s.values) {
        if (!(v > 0.0)) throw std::runtime_error("log_series: non-positive value in '" + s.label + "'");
        out.values.push_back(std::log(v));
    }
    return out;
}

}  // namespace fieldattr
