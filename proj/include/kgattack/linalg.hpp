#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace kgattack {

using Vec = std::vector<double>;

// Row-major dense matrix, just enough for embedding tables and small heads.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
    std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols)}; }
    std::span<const double> row_span(int i) const { return {row(i), static_cast<std::size_t>(cols)}; }
    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }

    friend bool operator==(const Mat&, const Mat&) = default;
};

double dot(std::span<const double> x, std::span<const double> y);
// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
double norm2(std::span<const double> x);
// Cosine similarity; zero-norm input maps to -1 (worst).
double cosine(std::span<const double> x, std::span<const double> y);

// Deterministic seeded RNG wrapper used everywhere randomness is needed.
struct Rng {
    std::mt19937_64 eng;

    explicit Rng(std::uint64_t seed) : eng(seed) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng);
    }
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(eng);
    }
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
    }
    bool coin() { return std::uniform_int_distribution<int>(0, 1)(eng) == 1; }
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hex64(std::uint64_t v);

}  // namespace kgattack
