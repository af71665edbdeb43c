#pragma once

#include <Eigen/Dense>

namespace fpl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Uniform interior-node discretization of an interval (left, right).
///
/// Node i sits at left + (i+1)*h with h = (right-left)/(n+1); every node is
/// strictly inside the interval and the node set is symmetric about the
/// midpoint. Grid functions are plain vectors of nodal values, extended by
/// zero outside the interval.
class Domain1D
{
public:
  Domain1D(double left, double right, int n);

  double left() const { return left_; }
  double right() const { return right_; }
  int size() const { return n_; }
  double cell_weight() const { return h_; }
  double length() const { return right_ - left_; }
  double midpoint() const { return 0.5 * (left_ + right_); }
  const Vector &nodes() const { return nodes_; }
  double node(int i) const { return nodes_[i]; }

  bool operator==(const Domain1D &other) const;

private:
  double left_;
  double right_;
  int n_;
  double h_;
  Vector nodes_;
};

Domain1D build_grid(double left, double right, int n);

/// rho(x_i) = min(x_i - left, right - x_i).
Vector distance_to_boundary(const Domain1D &domain);

/// Midpoint quadrature sum_i h*u_i.
double integrate(const Vector &u, const Domain1D &domain);

/// u(left+right-x) on the same grid.
Vector reflect(const Vector &u);

} // namespace fpl
