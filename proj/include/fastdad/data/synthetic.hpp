#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastdad/data/table.hpp"

namespace fastdad::data {

// Two interleaved spiral arms in the plane (columns x, y) with the arm as a
// binary target.
Table make_spiral(std::size_t n, std::uint64_t seed, double noise = 0.1);

// Points on the occupied squares of an 8x8 checkerboard over [-4, 4]^2,
// labeled by which of three angular sectors around the origin they fall
// in, with a fraction of labels replaced uniformly at random.
Table make_checkerboard(std::size_t n, std::uint64_t seed, double label_noise = 0.1);

// Linear regression: three numeric features, a 3-level categorical with
// per-level offsets, Gaussian noise.
Table make_linear(std::size_t n, std::uint64_t seed, double noise = 0.1);

const std::vector<std::string>& builtin_dataset_names();
// Dispatch on "spiral", "checkerboard" or "linear".
Table make_builtin(const std::string& name, std::size_t n, std::uint64_t seed);

}  // namespace fastdad::data
