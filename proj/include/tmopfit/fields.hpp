#pragma once

#include "tmopfit/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace tmopfit
{

/// Scalar function in the mesh's nodal space; coeffs(i) is the value at node i.
struct ScalarField
{
   Eigen::VectorXd coeffs;
};

/// Closed-form level set with gradient and Hessian.
class LevelSet
{
public:
   virtual ~LevelSet() = default;
   virtual std::string kind() const = 0;
   virtual double value(const Eigen::Ref<const Eigen::VectorXd> &x) const = 0;
   virtual Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const = 0;
   virtual Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const = 0;
};

/// |x - c| - r
class SphereLevelSet : public LevelSet
{
public:
   SphereLevelSet(Eigen::VectorXd center, double radius);
   std::string kind() const override { return "sphere"; }
   double value(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const override;

   const Eigen::VectorXd &center() const { return c_; }
   double radius() const { return r_; }

private:
   Eigen::VectorXd c_;
   double r_;
};

/// Four-lobed closed surface |d| - r0 - a P(d) / |d|^4 with d = x - c and
/// P = d1^4 - 6 d1^2 d2^2 + d2^4. In 2D P / |d|^4 = cos(4 theta).
class LobedLevelSet : public LevelSet
{
public:
   LobedLevelSet(Eigen::VectorXd center, double r0, double amplitude);
   std::string kind() const override { return "lobed"; }
   double value(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const override;

   const Eigen::VectorXd &center() const { return c_; }
   /// Radius of the zero set along the direction of d (d nonzero).
   double radius_along(const Eigen::Ref<const Eigen::VectorXd> &d) const;

private:
   Eigen::VectorXd c_;
   double r0_, a_;
};

/// A 2D level set lifted to 3D through coordinates (axes[0], axes[1]); constant
/// along the remaining axis.
class ExtrudedLevelSet : public LevelSet
{
public:
   ExtrudedLevelSet(std::shared_ptr<const LevelSet> base, std::array<int, 2> axes);
   std::string kind() const override { return "extruded-" + base_->kind(); }
   double value(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const override;

   const LevelSet &base() const { return *base_; }
   const std::array<int, 2> &axes() const { return axes_; }
   Eigen::Vector2d restrict(const Eigen::Ref<const Eigen::VectorXd> &x) const;

private:
   std::shared_ptr<const LevelSet> base_;
   std::array<int, 2> axes_;
};

/// x_d - (h0 + sum_m a_m cos(k_m pi x_1)): a graph over the first coordinate.
class SinusoidLevelSet : public LevelSet
{
public:
   struct Mode
   {
      double amplitude;
      double wavenumber;   ///< multiple of pi
   };
   SinusoidLevelSet(double base, std::vector<Mode> modes);
   std::string kind() const override { return "sinusoid"; }
   double value(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd> &x) const override;
   Eigen::MatrixXd hessian(const Eigen::Ref<const Eigen::VectorXd> &x) const override;

   /// Interface height at first coordinate x1.
   double height(double x1) const;
   const std::vector<Mode> &modes() const { return modes_; }

private:
   double base_;
   std::vector<Mode> modes_;
};

/// Nodal interpolation: coefficient i = sigma(node i).
ScalarField project(const LevelSet &ls, const Mesh &mesh, const NodeVector &x);

double eval(const ScalarField &f, const Mesh &mesh, const NodeVector &x, int e,
            const Eigen::Ref<const Eigen::VectorXd> &ref);

/// Physical gradient A^{-T} grad_ref. Throws singular-jacobian if det A is
/// negligible relative to |A|^d.
Eigen::VectorXd eval_grad(const ScalarField &f, const Mesh &mesh, const NodeVector &x, int e,
                          const Eigen::Ref<const Eigen::VectorXd> &ref);

/// Value, physical gradient and physical Hessian in one pass. The Hessian
/// accounts for curvature of the element map.
struct FieldSample
{
   double value = 0.0;
   Eigen::VectorXd grad;
   Eigen::MatrixXd hess;
};
FieldSample eval_all(const ScalarField &f, const Mesh &mesh, const NodeVector &x, int e,
                     const Eigen::Ref<const Eigen::VectorXd> &ref, bool want_hessian);

/// Nodal physical gradient, averaged over the elements sharing each node.
std::vector<ScalarField> discrete_gradient(const ScalarField &f, const Mesh &mesh,
                                           const NodeVector &x);

} // namespace tmopfit
