#include "tmopfit/fields.hpp"

#include "tmopfit/error.hpp"

#include <algorithm>
#include <cmath>

namespace tmopfit
{

SphereLevelSet::SphereLevelSet(Eigen::VectorXd center, double radius)
   : c_(std::move(center)), r_(radius)
{}

double SphereLevelSet::value(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   return (x - c_).norm() - r_;
}

Eigen::VectorXd SphereLevelSet::gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd d = x - c_;
   const double r = d.norm();
   if (r == 0.0) { return Eigen::VectorXd::Zero(d.size()); }
   return d / r;
}

Eigen::MatrixXd SphereLevelSet::hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd d = x - c_;
   const double r = d.norm();
   const int n = static_cast<int>(d.size());
   if (r == 0.0) { return Eigen::MatrixXd::Zero(n, n); }
   return (Eigen::MatrixXd::Identity(n, n) - d * d.transpose() / (r * r)) / r;
}

LobedLevelSet::LobedLevelSet(Eigen::VectorXd center, double r0, double amplitude)
   : c_(std::move(center)), r0_(r0), a_(amplitude)
{}

double LobedLevelSet::value(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd d = x - c_;
   const double r2 = d.squaredNorm();
   if (r2 == 0.0) { return -r0_; }
   const double p = std::pow(d(0), 4) - 6 * d(0) * d(0) * d(1) * d(1) + std::pow(d(1), 4);
   return std::sqrt(r2) - r0_ - a_ * p / (r2 * r2);
}

Eigen::VectorXd LobedLevelSet::gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd d = x - c_;
   const int n = static_cast<int>(d.size());
   const double r2 = d.squaredNorm();
   if (r2 == 0.0) { return Eigen::VectorXd::Zero(n); }
   const double r = std::sqrt(r2), r4 = r2 * r2, r6 = r4 * r2;
   const double dx = d(0), dy = d(1);
   const double p = dx * dx * dx * dx - 6 * dx * dx * dy * dy + dy * dy * dy * dy;
   Eigen::VectorXd gp = Eigen::VectorXd::Zero(n);
   gp(0) = 4 * dx * dx * dx - 12 * dx * dy * dy;
   gp(1) = 4 * dy * dy * dy - 12 * dx * dx * dy;
   return d / r - a_ * (gp / r4 - 4 * p * d / r6);
}

Eigen::MatrixXd LobedLevelSet::hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd d = x - c_;
   const int n = static_cast<int>(d.size());
   const double r2 = d.squaredNorm();
   if (r2 == 0.0) { return Eigen::MatrixXd::Zero(n, n); }
   const double r = std::sqrt(r2), r4 = r2 * r2, r6 = r4 * r2, r8 = r4 * r4;
   const double dx = d(0), dy = d(1);
   const double p = dx * dx * dx * dx - 6 * dx * dx * dy * dy + dy * dy * dy * dy;
   Eigen::VectorXd gp = Eigen::VectorXd::Zero(n);
   gp(0) = 4 * dx * dx * dx - 12 * dx * dy * dy;
   gp(1) = 4 * dy * dy * dy - 12 * dx * dx * dy;
   Eigen::MatrixXd hp = Eigen::MatrixXd::Zero(n, n);
   hp(0, 0) = 12 * dx * dx - 12 * dy * dy;
   hp(1, 1) = 12 * dy * dy - 12 * dx * dx;
   hp(0, 1) = hp(1, 0) = -24 * dx * dy;
   const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
   const Eigen::MatrixXd ddt = d * d.transpose();
   return (I - ddt / r2) / r -
          a_ * (hp / r4 - 4 * (gp * d.transpose() + d * gp.transpose()) / r6 - 4 * p * I / r6 +
                24 * p * ddt / r8);
}

double LobedLevelSet::radius_along(const Eigen::Ref<const Eigen::VectorXd> &d) const
{
   const double r2 = d.squaredNorm();
   const double p = std::pow(d(0), 4) - 6 * d(0) * d(0) * d(1) * d(1) + std::pow(d(1), 4);
   return r0_ + a_ * p / (r2 * r2);
}

ExtrudedLevelSet::ExtrudedLevelSet(std::shared_ptr<const LevelSet> base, std::array<int, 2> axes)
   : base_(std::move(base)), axes_(axes)
{
   if (axes_[0] == axes_[1] || std::min(axes_[0], axes_[1]) < 0 || std::max(axes_[0], axes_[1]) > 2)
   {
      throw Error(ErrorKind::InvalidArgument, "extruded level set: bad axes");
   }
}

Eigen::Vector2d ExtrudedLevelSet::restrict(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   return Eigen::Vector2d(x(axes_[0]), x(axes_[1]));
}

double ExtrudedLevelSet::value(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   return base_->value(restrict(x));
}

Eigen::VectorXd ExtrudedLevelSet::gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::VectorXd g2 = base_->gradient(restrict(x));
   Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
   for (int a = 0; a < 2; a++) { g(axes_[a]) = g2(a); }
   return g;
}

Eigen::MatrixXd ExtrudedLevelSet::hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const Eigen::MatrixXd h2 = base_->hessian(restrict(x));
   Eigen::MatrixXd h = Eigen::MatrixXd::Zero(x.size(), x.size());
   for (int a = 0; a < 2; a++)
   {
      for (int b = 0; b < 2; b++) { h(axes_[a], axes_[b]) = h2(a, b); }
   }
   return h;
}

SinusoidLevelSet::SinusoidLevelSet(double base, std::vector<Mode> modes)
   : base_(base), modes_(std::move(modes))
{}

double SinusoidLevelSet::height(double x1) const
{
   double h = base_;
   for (const auto &m : modes_) { h += m.amplitude * std::cos(m.wavenumber * M_PI * x1); }
   return h;
}

double SinusoidLevelSet::value(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   return x(x.size() - 1) - height(x(0));
}

Eigen::VectorXd SinusoidLevelSet::gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const int n = static_cast<int>(x.size());
   Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
   for (const auto &m : modes_)
   {
      const double k = m.wavenumber * M_PI;
      g(0) += m.amplitude * k * std::sin(k * x(0));
   }
   g(n - 1) += 1.0;
   return g;
}

Eigen::MatrixXd SinusoidLevelSet::hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const
{
   const int n = static_cast<int>(x.size());
   Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
   for (const auto &m : modes_)
   {
      const double k = m.wavenumber * M_PI;
      H(0, 0) += m.amplitude * k * k * std::cos(k * x(0));
   }
   return H;
}

ScalarField project(const LevelSet &ls, const Mesh &mesh, const NodeVector &x)
{
   ScalarField f;
   f.coeffs.resize(mesh.num_nodes());
   for (int i = 0; i < mesh.num_nodes(); i++) { f.coeffs(i) = ls.value(node_position(mesh, x, i)); }
   return f;
}

namespace
{

Eigen::VectorXd local_coeffs(const ScalarField &f, const Mesh &mesh, int e)
{
   const auto &nodes = mesh.element(e).nodes;
   Eigen::VectorXd c(nodes.size());
   for (std::size_t i = 0; i < nodes.size(); i++) { c(i) = f.coeffs(nodes[i]); }
   return c;
}

void check_jacobian(const Eigen::MatrixXd &A, double det)
{
   const double scale = std::pow(A.norm(), A.rows());
   if (!(std::abs(det) > 1e-14 * scale))
   {
      throw Error(ErrorKind::SingularJacobian, "singular element Jacobian");
   }
}

} // namespace

double eval(const ScalarField &f, const Mesh &mesh, const NodeVector &, int e,
            const Eigen::Ref<const Eigen::VectorXd> &ref)
{
   const auto &b = mesh.basis();
   Eigen::VectorXd w(b.size());
   Eigen::MatrixXd g(b.size(), b.dim());
   b.eval(ref, w, g);
   return w.dot(local_coeffs(f, mesh, e));
}

FieldSample eval_all(const ScalarField &f, const Mesh &mesh, const NodeVector &x, int e,
                     const Eigen::Ref<const Eigen::VectorXd> &ref, bool want_hessian)
{
   const auto &b = mesh.basis();
   const int d = b.dim();
   Eigen::VectorXd w(b.size());
   Eigen::MatrixXd g(b.size(), d);
   b.eval(ref, w, g);
   const Eigen::MatrixXd X = element_coords(mesh, x, e);
   const Eigen::VectorXd c = local_coeffs(f, mesh, e);
   const Eigen::MatrixXd A = X * g;
   const double det = A.determinant();
   check_jacobian(A, det);
   const Eigen::MatrixXd Ainv = A.inverse();

   FieldSample s;
   s.value = w.dot(c);
   s.grad = Ainv.transpose() * (g.transpose() * c);
   if (!want_hessian) { return s; }

   Eigen::MatrixXd h(b.size(), d * d);
   b.eval_hessian(ref, h);
   const Eigen::VectorXd hc = h.transpose() * c;
   const Eigen::MatrixXd hx = X * h;   // d x d^2
   Eigen::MatrixXd R(d, d);
   for (int p = 0; p < d; p++)
   {
      for (int q = 0; q < d; q++)
      {
         R(p, q) = hc(p + d * q) - s.grad.dot(hx.col(p + d * q));
      }
   }
   s.hess = Ainv.transpose() * R * Ainv;
   return s;
}

Eigen::VectorXd eval_grad(const ScalarField &f, const Mesh &mesh, const NodeVector &x, int e,
                          const Eigen::Ref<const Eigen::VectorXd> &ref)
{
   return eval_all(f, mesh, x, e, ref, false).grad;
}

std::vector<ScalarField> discrete_gradient(const ScalarField &f, const Mesh &mesh,
                                           const NodeVector &x)
{
   const int d = mesh.dim();
   const int nn = mesh.num_nodes();
   std::vector<ScalarField> out(d);
   for (auto &o : out) { o.coeffs = Eigen::VectorXd::Zero(nn); }
   Eigen::VectorXd count = Eigen::VectorXd::Zero(nn);
   const auto &b = mesh.basis();
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const auto &nodes = mesh.element(e).nodes;
      for (int i = 0; i < b.size(); i++)
      {
         const Eigen::VectorXd g = eval_grad(f, mesh, x, e, b.nodes().col(i));
         for (int a = 0; a < d; a++) { out[a].coeffs(nodes[i]) += g(a); }
         count(nodes[i]) += 1.0;
      }
   }
   for (auto &o : out) { o.coeffs.array() /= count.array().max(1.0); }
   return out;
}

} // namespace tmopfit
