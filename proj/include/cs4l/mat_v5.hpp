#pragma once

#include <filesystem>

#include "cs4l/data.hpp"

namespace cs4l {

// Reads an official SVHN cropped-digits file (train_32x32.mat / test_32x32.mat,
// MATLAB level-5 format, optionally zlib-compressed elements). X is a
// 32x32x3xN uint8 array in column-major order, y an N x 1 array with digit 0
// stored as 10.
Container read_svhn_mat(const std::filesystem::path& file);

}  // namespace cs4l
