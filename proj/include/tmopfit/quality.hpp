#pragma once

#include "tmopfit/error.hpp"
#include "tmopfit/mesh.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace tmopfit
{

enum class MetricId { Mu2, Mu58, Mu77, Mu80, Mu302, Mu316, Mu333 };

int metric_number(MetricId id);
/// Accepts "mu58", "58", ...
MetricId metric_from_string(const std::string &s);
std::string to_string(MetricId id);
/// Shape metrics are invariant under T -> cT.
bool metric_is_shape(MetricId id);
bool metric_defined_in(MetricId id, int dim);

struct MetricSpec
{
   MetricId id = MetricId::Mu2;
   double gamma = 0.5;       ///< blend weight for mu80 / mu333
   bool fd_second = false;   ///< second derivative by differencing the first
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct MetricEval
{
   Scalar value = Scalar(0);
   MatrixX<Scalar> first;    ///< d x d
   MatrixX<Scalar> second;   ///< d^2 x d^2, entry (r + c d, s + t d) = d2mu / dT_rc dT_st
};

namespace detail
{

/// Value and partials of a metric written as f(I1, tau, J), with
/// I1 = |T|^2, tau = det T, J = |T^t T|^2. Index order 0: I1, 1: tau, 2: J.
template <typename Scalar>
struct InvariantPartials
{
   Scalar f = Scalar(0);
   Scalar d[3] = {Scalar(0), Scalar(0), Scalar(0)};
   Scalar dd[3][3] = {};

   InvariantPartials &operator+=(const InvariantPartials &o)
   {
      f += o.f;
      for (int a = 0; a < 3; a++)
      {
         d[a] += o.d[a];
         for (int b = 0; b < 3; b++) { dd[a][b] += o.dd[a][b]; }
      }
      return *this;
   }
   InvariantPartials scaled(Scalar c) const
   {
      InvariantPartials r = *this;
      r.f *= c;
      for (int a = 0; a < 3; a++)
      {
         r.d[a] *= c;
         for (int b = 0; b < 3; b++) { r.dd[a][b] *= c; }
      }
      return r;
   }
};

template <typename Scalar>
InvariantPartials<Scalar> partials(MetricId id, Scalar gamma, Scalar I1, Scalar t, Scalar J)
{
   InvariantPartials<Scalar> p;
   const Scalar t2 = t * t, t3 = t2 * t, t4 = t3 * t;
   switch (id)
   {
      case MetricId::Mu2:
         p.f = Scalar(0.5) * I1 / t - 1;
         p.d[0] = Scalar(0.5) / t;
         p.d[1] = -Scalar(0.5) * I1 / t2;
         p.dd[0][1] = p.dd[1][0] = -Scalar(0.5) / t2;
         p.dd[1][1] = I1 / t3;
         break;
      case MetricId::Mu77:
         p.f = Scalar(0.5) * (t - 1 / t) * (t - 1 / t);
         p.d[1] = t - 1 / t3;
         p.dd[1][1] = 1 + 3 / t4;
         break;
      case MetricId::Mu316:
         p.f = Scalar(0.5) * (t + 1 / t) - 1;
         p.d[1] = Scalar(0.5) * (1 - 1 / t2);
         p.dd[1][1] = 1 / t3;
         break;
      case MetricId::Mu58:
         p.f = J / t2 - 2 * I1 / t + 2;
         p.d[0] = -2 / t;
         p.d[1] = -2 * J / t3 + 2 * I1 / t2;
         p.d[2] = 1 / t2;
         p.dd[0][1] = p.dd[1][0] = 2 / t2;
         p.dd[1][1] = 6 * J / t4 - 4 * I1 / t3;
         p.dd[1][2] = p.dd[2][1] = -2 / t3;
         break;
      case MetricId::Mu302:
      {
         // |T|^2 |T^-1|^2 / 9 with |adj T|^2 = (I1^2 - J) / 2 in 3D
         const Scalar c = Scalar(1) / 18;
         const Scalar q = I1 * I1 * I1 - I1 * J;
         const Scalar q1 = 3 * I1 * I1 - J;
         p.f = c * q / t2 - 1;
         p.d[0] = c * q1 / t2;
         p.d[1] = -2 * c * q / t3;
         p.d[2] = -c * I1 / t2;
         p.dd[0][0] = c * 6 * I1 / t2;
         p.dd[0][1] = p.dd[1][0] = -2 * c * q1 / t3;
         p.dd[0][2] = p.dd[2][0] = -c / t2;
         p.dd[1][1] = 6 * c * q / t4;
         p.dd[1][2] = p.dd[2][1] = 2 * c * I1 / t3;
         break;
      }
      case MetricId::Mu80:
         p = partials(MetricId::Mu2, gamma, I1, t, J).scaled(1 - gamma);
         p += partials(MetricId::Mu77, gamma, I1, t, J).scaled(gamma);
         break;
      case MetricId::Mu333:
         p = partials(MetricId::Mu302, gamma, I1, t, J).scaled(1 - gamma);
         p += partials(MetricId::Mu316, gamma, I1, t, J).scaled(gamma);
         break;
   }
   return p;
}

template <typename Scalar>
MatrixX<Scalar> cofactor(const MatrixX<Scalar> &T)
{
   const int d = static_cast<int>(T.rows());
   MatrixX<Scalar> C(d, d);
   if (d == 2)
   {
      C << T(1, 1), -T(1, 0), -T(0, 1), T(0, 0);
   }
   else
   {
      for (int i = 0; i < 3; i++)
      {
         for (int j = 0; j < 3; j++)
         {
            const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
            const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
            C(i, j) = T(i1, j1) * T(i2, j2) - T(i1, j2) * T(i2, j1);
         }
      }
   }
   return C;
}

inline int levi_civita(int i, int j, int k)
{
   if (i == j || j == k || i == k) { return 0; }
   return ((j - i + 3) % 3 == 1) ? 1 : -1;
}

template <typename Scalar>
MatrixX<Scalar> det_hessian(const MatrixX<Scalar> &T)
{
   const int d = static_cast<int>(T.rows());
   MatrixX<Scalar> H = MatrixX<Scalar>::Zero(d * d, d * d);
   if (d == 2)
   {
      H(0, 3) = H(3, 0) = Scalar(1);
      H(1, 2) = H(2, 1) = Scalar(-1);
      return H;
   }
   for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++)
         for (int k = 0; k < 3; k++)
            for (int l = 0; l < 3; l++)
            {
               Scalar s(0);
               for (int m = 0; m < 3; m++)
                  for (int n = 0; n < 3; n++)
                  {
                     const int e = levi_civita(i, k, m) * levi_civita(j, l, n);
                     if (e) { s += Scalar(e) * T(m, n); }
                  }
               H(i + 3 * j, k + 3 * l) = s;
            }
   return H;
}

template <typename Scalar>
Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> flat(const MatrixX<Scalar> &M)
{
   return {M.data(), M.size()};
}

template <typename Scalar>
MatrixX<Scalar> analytic_first(const InvariantPartials<Scalar> &p, const MatrixX<Scalar> &T,
                               const MatrixX<Scalar> &C, const MatrixX<Scalar> &cof)
{
   return p.d[0] * 2 * T + p.d[1] * cof + p.d[2] * 4 * (T * C);
}

} // namespace detail

/// Evaluates mu(T) and, up to `deriv` (0, 1 or 2), its derivatives.
/// Throws NonpositiveDeterminant if det T <= 0.
template <typename Scalar>
MetricEval<Scalar> metric(const MetricSpec &spec, const MatrixX<Scalar> &T, int deriv = 2)
{
   const int d = static_cast<int>(T.rows());
   if (T.cols() != d || (d != 2 && d != 3))
   {
      throw Error(ErrorKind::InvalidArgument, "metric: T must be 2x2 or 3x3");
   }
   if (!metric_defined_in(spec.id, d))
   {
      throw Error(ErrorKind::InvalidArgument,
                  to_string(spec.id) + " is not defined in " + std::to_string(d) + "D");
   }
   const Scalar tau = T.determinant();
   if (!(tau > Scalar(0)))
   {
      throw Error(ErrorKind::NonpositiveDeterminant, "metric: det T <= 0");
   }
   const MatrixX<Scalar> C = T.transpose() * T;
   const Scalar I1 = C.trace();
   const Scalar J = C.squaredNorm();
   const auto p = detail::partials<Scalar>(spec.id, Scalar(spec.gamma), I1, tau, J);

   MetricEval<Scalar> out;
   out.value = p.f;
   if (deriv < 1) { return out; }

   const MatrixX<Scalar> cof = detail::cofactor(T);
   out.first = detail::analytic_first(p, T, C, cof);
   if (deriv < 2) { return out; }

   const int n = d * d;
   if (spec.fd_second)
   {
      out.second.resize(n, n);
      const Scalar h = Scalar(1e-6) * std::max(Scalar(1), T.norm());
      for (int k = 0; k < n; k++)
      {
         MatrixX<Scalar> Tp = T, Tm = T;
         Tp.data()[k] += h;
         Tm.data()[k] -= h;
         const MatrixX<Scalar> gp = metric(MetricSpec{spec.id, spec.gamma, false}, Tp, 1).first;
         const MatrixX<Scalar> gm = metric(MetricSpec{spec.id, spec.gamma, false}, Tm, 1).first;
         out.second.col(k) = detail::flat<Scalar>(gp - gm) / (2 * h);
      }
      out.second = (0.5 * (out.second + out.second.transpose())).eval();
      return out;
   }

   const MatrixX<Scalar> g0 = 2 * T, g2 = 4 * (T * C);
   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v[3] = {
      detail::flat<Scalar>(g0), detail::flat<Scalar>(cof), detail::flat<Scalar>(g2)};

   out.second = MatrixX<Scalar>::Zero(n, n);
   if (p.d[0] != Scalar(0)) { out.second.diagonal().array() += 2 * p.d[0]; }
   if (p.d[1] != Scalar(0)) { out.second += p.d[1] * detail::det_hessian(T); }
   if (p.d[2] != Scalar(0))
   {
      const MatrixX<Scalar> TTt = T * T.transpose();
      for (int pp = 0; pp < d; pp++)
         for (int q = 0; q < d; q++)
            for (int r = 0; r < d; r++)
               for (int s = 0; s < d; s++)
               {
                  Scalar v = T(pp, s) * T(r, q);
                  if (pp == r) { v += C(s, q); }
                  if (q == s) { v += TTt(pp, r); }
                  out.second(pp + d * q, r + d * s) += 4 * p.d[2] * v;
               }
   }
   for (int a = 0; a < 3; a++)
   {
      for (int b = 0; b < 3; b++)
      {
         if (p.dd[a][b] != Scalar(0)) { out.second += p.dd[a][b] * v[a] * v[b].transpose(); }
      }
   }
   return out;
}

enum class TargetKind { IdealShapeUnitSize, IdealShapeInitialSize };

std::string to_string(TargetKind k);
TargetKind target_kind_from_string(const std::string &s);

/// Maps the reference element to the ideal (equilateral / regular) element.
Eigen::MatrixXd ideal_target(Geometry g);

/// Target Jacobians. W is constant within each element.
struct TargetJacobian
{
   TargetKind kind = TargetKind::IdealShapeUnitSize;
   std::vector<Eigen::MatrixXd> W;      ///< per element
   std::vector<Eigen::MatrixXd> Winv;
   std::vector<double> det;

   bool volumetric() const { return kind == TargetKind::IdealShapeInitialSize; }
   int num_elements() const { return static_cast<int>(W.size()); }
};

/// W = s^(1/d) W_ideal. For the initial-size kind s is chosen so that the
/// target element has the initial element's volume.
TargetJacobian make_targets(const Mesh &mesh, const NodeVector &x0, TargetKind kind,
                            const QuadratureRule &quad);

} // namespace tmopfit
