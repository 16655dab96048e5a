#pragma once

#include "tmopfit/fitting.hpp"
#include "tmopfit/mesh.hpp"
#include "tmopfit/quality.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace tmopfit
{

using SparseMatrix = Eigen::SparseMatrix<double>;

struct ObjectiveReport
{
   double F = 0.0;
   double Fmu = 0.0;
   double Fsigma = 0.0;
   double gradnorm = 0.0;              ///< of the masked gradient, when computed
   Eigen::VectorXd worst_mu;           ///< per element, max over quadrature points
};

struct Evaluation
{
   ObjectiveReport report;
   Eigen::VectorXd gradient;   ///< masked, when deriv >= 1
   SparseMatrix hessian;       ///< masked, when deriv >= 2
   FittingPenalty::Samples samples;
};

/// F(x) = sum_E int mu(A W^-1) dx_t + F_sigma(x) over a fixed mesh topology.
/// Quadrature weights are the reference weights times det W.
class Objective
{
public:
   Objective(const Mesh &mesh, TargetJacobian targets, QuadratureRule quad, MetricSpec metric);

   const Mesh &mesh() const { return *mesh_; }
   const TargetJacobian &targets() const { return targets_; }
   const QuadratureRule &quadrature() const { return quad_; }
   const MetricSpec &metric() const { return metric_; }

   /// The penalty is shared so its weight can be changed between solves.
   void set_penalty(std::shared_ptr<FittingPenalty> penalty,
                    PenaltyHessianMode mode = PenaltyHessianMode::Analytic);
   FittingPenalty *penalty() const { return penalty_.get(); }

   /// Per dof, true where the dof is held fixed.
   void set_mask(std::vector<bool> fixed);
   /// Fixes every component of the given nodes, on top of the current mask.
   void fix_nodes(const std::vector<int> &nodes);
   const std::vector<bool> &mask() const { return fixed_; }

   /// deriv 0: values only; 1: plus gradient; 2: plus Hessian.
   Evaluation evaluate(const NodeVector &x, int deriv) const;
   double value(const NodeVector &x) const { return evaluate(x, 0).report.F; }

   /// Zeroes the masked entries of v.
   void apply_mask(Eigen::VectorXd &v) const;

private:
   void build_pattern();
   void assemble_mu(const NodeVector &x, int deriv, Evaluation &out) const;

   const Mesh *mesh_;
   TargetJacobian targets_;
   QuadratureRule quad_;
   MetricSpec metric_;
   BasisTable tab_;
   std::shared_ptr<FittingPenalty> penalty_;
   PenaltyHessianMode penalty_mode_ = PenaltyHessianMode::Analytic;
   std::vector<bool> fixed_;

   // Hessian sparsity: dof (b, j) has rows (a, k) for every node k sharing an
   // element with j, stored component-major, so an entry sits at
   // outer(b, j) + a * degree(j) + rank_e(i, j).
   SparseMatrix pattern_;
   std::vector<int> degree_;
   std::vector<std::vector<int>> rank_;   ///< per element, nb * nb, entry i + nb * j
};

} // namespace tmopfit
