#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <stdexcept>
#include <string>

namespace dmri {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using MatX3i = Eigen::Matrix<int, Eigen::Dynamic, 3>;
using MatX4i = Eigen::Matrix<int, Eigen::Dynamic, 4>;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using cdouble = std::complex<double>;
using CVecX = Eigen::VectorXcd;
using CMatX = Eigen::MatrixXcd;

// Internal units are micrometers, milliseconds and milliteslas throughout.
// Diffusivities are then O(1) (water ~ 2 um^2/ms) and b-values are in ms/um^2
// (1 ms/um^2 == 1000 s/mm^2).
//
// Gyromagnetic ratio of water protons, 2.675e8 rad s^-1 T^-1 expressed in
// rad ms^-1 mT^-1.
inline constexpr double kGyromagneticRatio = 267.5;

// Input violated a documented precondition. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed to meet its contract (non-convergence,
// overflow, singular factorization). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmri
