#include "spinclock/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace spinclock {

Eigen::Matrix3d rotation_zyz(double alpha, double beta, double gamma) {
  return (Eigen::AngleAxisd(alpha, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(beta, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(gamma, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

double max_abs(const Eigen::MatrixXcd& m) {
  return m.cwiseAbs().maxCoeff();
}

double hermiticity_defect(const Eigen::MatrixXcd& h) {
  return max_abs(h - h.adjoint());
}

void gauge_fix_column(Eigen::VectorXcd& v) {
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const double mag = std::abs(v(imax));
  if (mag > 0.0) v *= std::conj(v(imax)) / mag;
}

void gauge_fix_columns(Eigen::MatrixXcd& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::VectorXcd col = v.col(c);
    gauge_fix_column(col);
    v.col(c) = col;
  }
}

SpinOps spin_operators(double spin) {
  const int dim = static_cast<int>(std::lround(2.0 * spin)) + 1;
  if (dim < 1 || std::abs(2.0 * spin - std::lround(2.0 * spin)) > 1e-9)
    throw std::invalid_argument("spin_operators: spin must be a multiple of 1/2");
  SpinOps ops;
  ops.dim = dim;
  ops.x = Eigen::MatrixXcd::Zero(dim, dim);
  ops.y = Eigen::MatrixXcd::Zero(dim, dim);
  ops.z = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const double m = spin - i;
    ops.z(i, i) = m;
    if (i + 1 < dim) {
      // <m|I+|m-1> with m-1 = spin - (i+1)
      const double c = std::sqrt(spin * (spin + 1.0) - (m - 1.0) * m);
      ops.x(i, i + 1) = 0.5 * c;
      ops.x(i + 1, i) = 0.5 * c;
      ops.y(i, i + 1) = complexd(0.0, -0.5 * c);
      ops.y(i + 1, i) = complexd(0.0, 0.5 * c);
    }
  }
  return ops;
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXcd embed(const Eigen::MatrixXcd& op, int slot,
                       const std::vector<int>& dims) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (int k = 0; k < static_cast<int>(dims.size()); ++k) {
    if (k == slot) {
      if (op.rows() != dims[k])
        throw std::invalid_argument("embed: operator dimension mismatch");
      out = kron(out, op);
    } else {
      out = kron(out, Eigen::MatrixXcd::Identity(dims[k], dims[k]));
    }
  }
  return out;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t child_seed(uint64_t seed, std::string_view module) {
  return splitmix64(seed ^ fnv1a64(module));
}

uint64_t SplitMix::next() {
  state_ = splitmix64(state_);
  return state_;
}

double SplitMix::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

int SplitMix::uniform_int(int n) {
  if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
  return static_cast<int>(uniform() * n);
}

}  // namespace spinclock
