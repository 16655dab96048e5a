#pragma once

#include "tmopfit/fields.hpp"
#include "tmopfit/mesh.hpp"
#include "tmopfit/quality.hpp"
#include "tmopfit/transfer.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace tmopfit
{

/// Sorted unique node indices.
using MarkedSet = std::vector<int>;

/// Nodes on faces shared by elements of different attributes. Throws
/// empty-marked-set if there are none.
MarkedSet mark_interface_nodes(const Mesh &mesh);

/// Sets every element attribute from the sign of sigma at the element's
/// reference center (1 where sigma < 0, 2 otherwise), then marks as above.
MarkedSet mark_interface_nodes(Mesh &mesh, const NodeVector &x, const ScalarField &sigma);

/// Coefficients outside S set to zero.
ScalarField restrict_field(const ScalarField &sigma, const MarkedSet &S);

/// Level-set value with its physical first and second derivatives at a point.
struct SigmaSample
{
   double value = 0.0;
   Eigen::VectorXd grad;
   Eigen::MatrixXd hess;
};

/// Where sigma is evaluated at the current position of a marked node.
class SigmaSource
{
public:
   virtual ~SigmaSource() = default;
   virtual SigmaSample sample(const Eigen::Ref<const Eigen::VectorXd> &p, bool hessian) const = 0;
};

class AnalyticSigma : public SigmaSource
{
public:
   explicit AnalyticSigma(std::shared_ptr<const LevelSet> ls) : ls_(std::move(ls)) {}
   SigmaSample sample(const Eigen::Ref<const Eigen::VectorXd> &p, bool hessian) const override;
   const LevelSet &level_set() const { return *ls_; }

private:
   std::shared_ptr<const LevelSet> ls_;
};

/// sigma0 living on the initial mesh, evaluated by point location. Where a
/// point lies on several elements the derivatives are averaged.
class DiscreteSigma : public SigmaSource
{
public:
   enum class SecondDerivative
   {
      Element,           ///< exact second derivative of the containing element
      DiscreteGradient   ///< discrete gradient applied twice
   };

   DiscreteSigma(const Mesh &mesh0, const NodeVector &x0, ScalarField sigma0,
                 SecondDerivative second = SecondDerivative::Element);
   SigmaSample sample(const Eigen::Ref<const Eigen::VectorXd> &p, bool hessian) const override;

   const ScalarField &field() const { return sigma0_; }
   const Locator &locator() const { return loc_; }

private:
   const Mesh *mesh_;
   ScalarField sigma0_;
   Locator loc_;
   SecondDerivative second_;
   std::vector<ScalarField> dd_;   ///< d*d fields, entry a + d*b
};

enum class PenaltyHessianMode { Analytic, FdOfGradient };

/// 1/c: the initial domain volume for volumetric targets, otherwise N_E.
double penalty_normalization(const TargetJacobian &targets, const Mesh &mesh);

/// (omega/c) sum_E int sigma_bar^2 over target elements, by direct quadrature.
double penalty_value(double weight, double normalization, const ScalarField &sigma_bar,
                     const Mesh &mesh, const TargetJacobian &targets,
                     const QuadratureRule &quad);

/// The fitting penalty as a function of the node positions. With target
/// integration, sigma_bar only depends on x through the samples
/// sigma_s = sigma(x_s), so F_sigma = (omega/c) sigma_S^T M sigma_S with M the
/// target mass matrix restricted to S.
class FittingPenalty
{
public:
   struct Samples
   {
      Eigen::VectorXd value;              ///< |S|
      Eigen::MatrixXd grad;               ///< d x |S|
      std::vector<Eigen::MatrixXd> hess;  ///< |S| entries when requested
   };

   FittingPenalty(const Mesh &mesh, const TargetJacobian &targets, const QuadratureRule &quad,
                  MarkedSet S, double weight, std::shared_ptr<const SigmaSource> source);

   const MarkedSet &marked() const { return S_; }
   double weight() const { return weight_; }
   void set_weight(double w) { weight_ = w; }
   /// 1/c
   double normalization() const { return c_; }
   const Eigen::SparseMatrix<double> &mass() const { return M_; }
   const SigmaSource &source() const { return *source_; }
   /// Nodes held in place. The Hessian leaves out their rows and columns, and
   /// the fd mode never samples beside them.
   void set_fixed_nodes(const std::vector<int> &nodes);

   Samples sample(const NodeVector &x, bool hessian) const;
   double value(const Samples &s) const;
   /// Length d * N_x.
   Eigen::VectorXd gradient(const Samples &s) const;
   /// Triplets for the d N_x square Hessian; fd mode re-samples each marked node.
   void hessian(const NodeVector &x, const Samples &s, PenaltyHessianMode mode,
                std::vector<Eigen::Triplet<double>> &out) const;
   Eigen::SparseMatrix<double> hessian(const NodeVector &x, const Samples &s,
                                       PenaltyHessianMode mode) const;

   /// sigma_bar as a field on the current mesh: sampled values on S, zero elsewhere.
   ScalarField restricted(const Samples &s) const;

private:
   const Mesh *mesh_;
   MarkedSet S_;
   double weight_;
   double c_;
   std::shared_ptr<const SigmaSource> source_;
   Eigen::SparseMatrix<double> M_;
   double fd_step_;
   std::vector<char> fixed_;   ///< per entry of S
};

} // namespace tmopfit
