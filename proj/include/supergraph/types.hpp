#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace supergraph {

using Scalar = double;

template <class S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Mat = MatX<Scalar>;
using Vec = VecX<Scalar>;
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

using Index = Eigen::Index;

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace supergraph
