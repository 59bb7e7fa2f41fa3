#pragma once

#include <Eigen/Dense>

namespace sdm {

/// A point of the plane, either geographic (G) or deformed (D).
using Point = Eigen::Vector2d;

/// n points stored row-wise (n x 2).
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2>;

}  // namespace sdm
