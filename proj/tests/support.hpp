#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "hieract/tensor.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("hieract-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Independent generator (std::mt19937 + Box-Muller) so test data never
/// shares a stream with the library's Rng.
inline std::vector<double> gaussian(std::size_t n, std::uint32_t seed, double scale = 1.0) {
    std::mt19937 gen(seed);
    std::vector<double> out(n);
    for (auto& v : out) {
        double u1 = (static_cast<double>(gen()) + 1.0) / 4294967297.0;
        double u2 = static_cast<double>(gen()) / 4294967296.0;
        v = scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    return out;
}

inline hieract::Tensor64 tensor64(std::vector<double> values, hieract::Shape shape, bool requires_grad = true) {
    return hieract::Tensor64::from_vector(std::move(values), std::move(shape), requires_grad);
}

/// Central differences of a scalar function of a flat vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double eps = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + eps;
        double up = f(x);
        x[i] = keep - eps;
        double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * eps);
    }
    return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

template <typename Span>
std::vector<double> to_doubles(const Span& s) {
    return {s.begin(), s.end()};
}

} // namespace testing
