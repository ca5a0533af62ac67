#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "magloop/loopspace.hpp"

namespace magloop::testkit {

/// Circle at x0 with smooth random Fourier wiggles in both coordinates.
inline DiscreteLoop random_loop(std::mt19937_64& rng, int N, int winding, double x_span = 1.5) {
  std::uniform_real_distribution<double> u(-1, 1);
  const double x0 = x_span * u(rng);
  DiscreteLoop loop = DiscreteLoop::circle(x0, winding, N, 0.5 + 0.5 * (u(rng) + 1));
  double ax[3], bx[3], ay[3];
  for (int m = 0; m < 3; ++m) {
    ax[m] = 0.3 * u(rng) / (m + 1);
    bx[m] = 0.3 * u(rng) / (m + 1);
    ay[m] = 0.05 * u(rng) / (m + 1);
  }
  for (int j = 0; j < N; ++j) {
    const double s = 2 * M_PI * j / N;
    for (int m = 0; m < 3; ++m) {
      loop.nodes[j].x() += ax[m] * std::cos((m + 1) * s) + bx[m] * std::sin((m + 1) * s);
      loop.nodes[j].y() += ay[m] * std::sin((m + 1) * s);
    }
  }
  return loop;
}

/// Central-difference gradient of the scalar action in packed coordinates.
template <class F>
Eigen::VectorXd fd_gradient(F&& f, const Eigen::VectorXd& z, double h) {
  Eigen::VectorXd g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    g(i) = (f(zp) - f(zm)) / (2 * h);
  }
  return g;
}

/// Columns are central differences of a vector-valued map.
template <class G>
Eigen::MatrixXd fd_jacobian(G&& g, const Eigen::VectorXd& z, double h) {
  Eigen::MatrixXd J(z.size(), z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Eigen::VectorXd zp = z, zm = z;
    zp(i) += h;
    zm(i) -= h;
    J.col(i) = (g(zp) - g(zm)) / (2 * h);
  }
  return J;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace magloop::testkit
