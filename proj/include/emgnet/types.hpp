#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace emgnet {

template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// All pipeline arithmetic is done in 64-bit floats.
using Vec = VectorX<double>;
using Mat = MatrixX<double>;
using Index = Eigen::Index;

enum class ClassLabel : int {
  Normal = 0,
  Myopathy = 1,
  Als = 2,
};

inline constexpr int kNumClasses = 3;
inline constexpr int kFeatureCount = 27;
inline constexpr Index kWindowLength = 8192;
inline constexpr int kDecompositionLevels = 6;

// Throws BadLabel for anything outside {0,1,2}.
ClassLabel class_label_from_int(int value);
const char* class_label_name(ClassLabel label);

}  // namespace emgnet
