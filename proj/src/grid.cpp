#include "fplap/grid.hpp"

#include "fplap/errors.hpp"

#include <string>

namespace fpl {

Domain1D::Domain1D(double left, double right, int n)
  : left_(left)
  , right_(right)
  , n_(n)
  , h_(0.)
{
  if (!(left < right))
    throw ValidationError("grid: left < right required, got left=" +
                          std::to_string(left) +
                          " right=" + std::to_string(right));
  if (n < 2)
    throw ValidationError("grid: n >= 2 interior nodes required, got n=" +
                          std::to_string(n));

  h_ = (right - left) / (n + 1);
  nodes_.resize(n);
  for (int i = 0; i < n; ++i)
    nodes_[i] = left + (i + 1) * h_;
  // exact symmetry: pair up mirrored nodes about the midpoint
  for (int i = 0; i < n / 2; ++i)
    {
      const double d = 0.5 * ((nodes_[i] - left) + (right - nodes_[n - 1 - i]));
      nodes_[i]         = left + d;
      nodes_[n - 1 - i] = right - d;
    }
  if (n % 2 == 1)
    nodes_[n / 2] = 0.5 * (left + right);
}

bool Domain1D::operator==(const Domain1D &other) const
{
  return left_ == other.left_ && right_ == other.right_ && n_ == other.n_;
}

Domain1D build_grid(double left, double right, int n)
{
  return Domain1D(left, right, n);
}

Vector distance_to_boundary(const Domain1D &domain)
{
  Vector rho(domain.size());
  for (int i = 0; i < domain.size(); ++i)
    {
      const double x = domain.node(i);
      rho[i] = std::min(x - domain.left(), domain.right() - x);
    }
  return rho;
}

double integrate(const Vector &u, const Domain1D &domain)
{
  if (u.size() != domain.size())
    throw ValidationError("integrate: vector length " +
                          std::to_string(u.size()) + " does not match grid size " +
                          std::to_string(domain.size()));
  return domain.cell_weight() * u.sum();
}

Vector reflect(const Vector &u)
{
  return u.reverse();
}

} // namespace fpl
