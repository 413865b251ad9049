#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "cdo/tensor.hpp"

namespace cdo::test {

// Fresh empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cdo_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Tensor random_tensor(Shape s, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor t(s);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

}  // namespace cdo::test
