// dmicp - degeneracy-aware point-to-plane ICP, header-only
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dmicp {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using RowMat6 = Eigen::Matrix<double, Eigen::Dynamic, 6>;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NotSymmetric : Error {
  explicit NotSymmetric(const std::string& msg) : Error(msg) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};
struct MissingProperty : Error {
  explicit MissingProperty(const std::string& msg) : Error(msg) {}
};
struct TooFewPoints : Error {
  explicit TooFewPoints(const std::string& msg) : Error(msg) {}
};
struct EmptyIndex : Error {
  explicit EmptyIndex(const std::string& msg) : Error(msg) {}
};
struct EmptyCloud : Error {
  explicit EmptyCloud(const std::string& msg) : Error(msg) {}
};
struct MissingNormals : Error {
  explicit MissingNormals(const std::string& msg) : Error(msg) {}
};
struct EmptyCorrespondences : Error {
  explicit EmptyCorrespondences(const std::string& msg) : Error(msg) {}
};
struct NotUnit : Error {
  explicit NotUnit(const std::string& msg) : Error(msg) {}
};
struct Infeasible : Error {
  explicit Infeasible(const std::string& msg) : Error(msg) {}
};
struct MaxIterations : Error {
  explicit MaxIterations(const std::string& msg) : Error(msg) {}
};
struct LengthMismatch : Error {
  explicit LengthMismatch(const std::string& msg) : Error(msg) {}
};
struct TimestampMismatch : Error {
  explicit TimestampMismatch(const std::string& msg) : Error(msg) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace dmicp
