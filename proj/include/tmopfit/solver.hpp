#pragma once

#include "tmopfit/objective.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tmopfit
{

enum class Method { Newton, LBFGS };
enum class Termination { Converged, MaxIterations, LineSearchFailure };

const char *to_string(Method m);
Method method_from_string(const std::string &s);
const char *to_string(Termination t);

struct SolverConfig
{
   Method method = Method::Newton;
   double tolerance = 1e-6;         ///< on |g| / |g0|
   double zero_gradient = 1e-12;    ///< |g0| at or below this counts as already converged
   int max_iterations = 200;
   double minres_tolerance = 1e-8;
   int minres_max_iterations = 500;
   int lbfgs_memory = 10;
   double backtrack = 0.5;
   int max_halvings = 20;
};

struct IterationRecord
{
   int iter = 0;
   double F = 0.0, Fmu = 0.0, Fsigma = 0.0;
   double gradnorm = 0.0;
   double step = 0.0;     ///< accepted line-search factor, 0 for the initial state
   double mindet = 0.0;   ///< min det A over all quadrature points
};

struct SolveReport
{
   std::vector<IterationRecord> history;   ///< entry 0 is the initial state
   int iterations = 0;
   Termination reason = Termination::MaxIterations;
   double initial_gradnorm = 0.0;
   double ratio = 0.0;                      ///< final |g| / |g0|
   int fallbacks = 0;                       ///< steepest-descent replacements
};

/// Diagonal preconditioner with entries 1 / sum_j |H_ij|. Same interface as
/// Eigen::DiagonalPreconditioner, for use with Eigen's iterative solvers.
class L1JacobiPreconditioner
{
public:
   L1JacobiPreconditioner() = default;
   template <typename MatType>
   explicit L1JacobiPreconditioner(const MatType &m) { compute(m); }

   template <typename MatType>
   L1JacobiPreconditioner &analyzePattern(const MatType &) { return *this; }

   template <typename MatType>
   L1JacobiPreconditioner &factorize(const MatType &m)
   {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.rows());
      for (Eigen::Index k = 0; k < m.outerSize(); k++)
      {
         for (typename MatType::InnerIterator it(m, k); it; ++it)
         {
            sum(it.row()) += std::abs(it.value());
         }
      }
      inv_ = sum.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 1.0; });
      return *this;
   }

   template <typename MatType>
   L1JacobiPreconditioner &compute(const MatType &m) { return factorize(m); }

   template <typename Rhs>
   Eigen::VectorXd solve(const Rhs &b) const { return inv_.cwiseProduct(b); }

   const Eigen::VectorXd &inverse_diagonal() const { return inv_; }
   Eigen::ComputationInfo info() const { return Eigen::Success; }

private:
   Eigen::VectorXd inv_;
};

struct Direction
{
   Eigen::VectorXd p;
   bool fallback = false;   ///< p = -g because the Krylov solution was unusable
   int krylov_iterations = 0;
};

/// Approximately solves H p = -g by preconditioned MINRES; returns -g if
/// the result is not finite or not a descent direction.
Direction newton_step(const SparseMatrix &H, const Eigen::VectorXd &g, const SolverConfig &cfg);

struct LineSearchResult
{
   bool accepted = false;
   double alpha = 0.0;
   NodeVector x;
   ObjectiveReport report;
   double mindet = 0.0;
};

/// Largest alpha in {1, b, b^2, ...} for which the trial mesh is valid and F
/// decreases. Throws InvalidArgument when p is not a descent direction for g.
LineSearchResult line_search(const Objective &obj, const NodeVector &x, const Eigen::VectorXd &p,
                             const Eigen::VectorXd &g, double F, const SolverConfig &cfg);

/// Called after the initial evaluation and after every accepted iterate.
using IterationCallback = std::function<void(const NodeVector &, const IterationRecord &)>;

/// Minimizes obj over x in place. Throws NonpositiveDeterminant if the
/// initial mesh is invalid.
SolveReport solve(const Objective &obj, NodeVector &x, const SolverConfig &cfg,
                  const IterationCallback &callback = {});

/// Header iter,F,Fmu,Fsigma,gradnorm,step,mindet then one row per record.
void write_history_csv(std::ostream &os, const SolveReport &report);

} // namespace tmopfit
