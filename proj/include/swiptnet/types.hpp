#pragma once

#include <Eigen/Dense>
#include <complex>

namespace swiptnet {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Receiver architecture of the downlink user equipment.
enum class Receiver : uint8_t { PS = 0, TS = 1 };

inline const char* to_string(Receiver r) { return r == Receiver::PS ? "ps" : "ts"; }

}  // namespace swiptnet
