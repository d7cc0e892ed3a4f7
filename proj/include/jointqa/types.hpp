#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace jointqa {

using Scalar = double;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using TokenId = std::int32_t;

// Reserved token ids; corpus vocabulary starts right after.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kFirstVocabId = 4;

}  // namespace jointqa
