#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string_view>
#include <vector>

namespace spinclock {

using complexd = std::complex<double>;

// ZYZ Euler rotation R = Rz(alpha) Ry(beta) Rz(gamma).
Eigen::Matrix3d rotation_zyz(double alpha, double beta, double gamma);

double max_abs(const Eigen::MatrixXcd& m);

// max |H - H^dag| entry.
double hermiticity_defect(const Eigen::MatrixXcd& h);

// Make the largest-magnitude component of each column real and non-negative.
void gauge_fix_columns(Eigen::MatrixXcd& v);
void gauge_fix_column(Eigen::VectorXcd& v);

// Spin matrices for spin quantum number I, basis m = I, I-1, ..., -I.
struct SpinOps {
  Eigen::MatrixXcd x, y, z;
  int dim = 0;
};
SpinOps spin_operators(double spin);

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

// Operator acting on one slot of a tensor product with the given slot dims.
Eigen::MatrixXcd embed(const Eigen::MatrixXcd& op, int slot,
                       const std::vector<int>& dims);

// --------------------------- deterministic seeding ---------------------------

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view bytes);

// Per-module child seed: splitmix64(seed ^ fnv1a64(module)).
uint64_t child_seed(uint64_t seed, std::string_view module);

// Minimal generator with pinned semantics so streams are identical across
// platforms and standard libraries.
class SplitMix {
 public:
  explicit SplitMix(uint64_t seed) : state_(seed) {}
  uint64_t next();
  double uniform();        // [0, 1)
  int uniform_int(int n);  // [0, n)

 private:
  uint64_t state_;
};

}  // namespace spinclock
