#pragma once

// Shared scaffolding for the test suite. Data generators here intentionally
// use std::mt19937_64, not the library RNG, so oracle comparisons never share
// a random stream with the code under test.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "fieldattr/series.hpp"
#include "fieldattr/synthetic.hpp"

namespace tst {

inline fieldattr::ObservableSeries make_series(const std::vector<double>& values,
                                               const std::string& label = "x") {
    fieldattr::ObservableSeries s;
    s.values = values;
    s.dates = fieldattr::weekday_calendar(static_cast<long>(values.size()));
    s.label = label;
    return s;
}

// Gaussian AR(1) around a mean, stationary start. Oracle-side generator.
inline std::vector<double> ar1(std::size_t n, double phi, double mean, double noise_sd,
                               std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> x(n);
    double stat_sd = noise_sd / std::sqrt(1.0 - phi * phi);
    x[0] = mean + stat_sd * nd(g);
    for (std::size_t t = 1; t < n; ++t)
        x[t] = mean + phi * (x[t - 1] - mean) + noise_sd * nd(g);
    return x;
}

inline std::vector<double> gaussian(std::size_t n, double mean, double sd, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> nd(mean, sd);
    std::vector<double> x(n);
    for (auto& v : x) v = nd(g);
    return x;
}

// Scratch directory unique to a test, removed on destruction.
struct TmpDir {
    std::filesystem::path path;
    explicit TmpDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("fa_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace tst
