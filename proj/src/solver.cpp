#include "tmopfit/solver.hpp"

#include "tmopfit/error.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <deque>
#include <ostream>

namespace tmopfit
{

const char *to_string(Method m)
{
   return m == Method::Newton ? "newton" : "lbfgs";
}

Method method_from_string(const std::string &s)
{
   if (s == "newton") { return Method::Newton; }
   if (s == "lbfgs") { return Method::LBFGS; }
   throw Error(ErrorKind::InvalidArgument, "unknown solver method '" + s + "'");
}

const char *to_string(Termination t)
{
   switch (t)
   {
      case Termination::Converged: return "converged";
      case Termination::MaxIterations: return "max-iter";
      case Termination::LineSearchFailure: return "line-search-failure";
   }
   return "?";
}

Direction newton_step(const SparseMatrix &H, const Eigen::VectorXd &g, const SolverConfig &cfg)
{
   Direction out;
   Eigen::MINRES<SparseMatrix, Eigen::Lower | Eigen::Upper, L1JacobiPreconditioner> minres;
   minres.setTolerance(cfg.minres_tolerance);
   minres.setMaxIterations(cfg.minres_max_iterations);
   minres.compute(H);
   out.p = minres.solve(-g);
   out.krylov_iterations = static_cast<int>(minres.iterations());
   if (!out.p.allFinite() || !(out.p.dot(g) < 0.0))
   {
      out.p = -g;
      out.fallback = true;
   }
   return out;
}

LineSearchResult line_search(const Objective &obj, const NodeVector &x, const Eigen::VectorXd &p,
                             const Eigen::VectorXd &g, double F, const SolverConfig &cfg)
{
   if (!(p.dot(g) < 0.0))
   {
      throw Error(ErrorKind::InvalidArgument, "line search: not a descent direction");
   }
   LineSearchResult out;
   const Mesh &mesh = obj.mesh();
   double alpha = 1.0;
   for (int h = 0; h <= cfg.max_halvings; h++, alpha *= cfg.backtrack)
   {
      NodeVector trial = x + alpha * p;
      const ValidityReport v = is_valid(mesh, trial, obj.quadrature());
      if (!v.valid) { continue; }
      ObjectiveReport r;
      try
      {
         r = obj.evaluate(trial, 0).report;
      }
      catch (const Error &e)
      {
         // a marked node pushed off the sampled domain counts as a rejected step
         if (e.kind() == ErrorKind::TransferFailure || e.kind() == ErrorKind::NonpositiveDeterminant)
         {
            continue;
         }
         throw;
      }
      if (!(r.F < F)) { continue; }
      out.accepted = true;
      out.alpha = alpha;
      out.x = std::move(trial);
      out.report = std::move(r);
      out.mindet = v.min_det;
      return out;
   }
   return out;
}

namespace
{

IterationRecord record(int iter, const ObjectiveReport &r, double step, double mindet)
{
   IterationRecord rec;
   rec.iter = iter;
   rec.F = r.F;
   rec.Fmu = r.Fmu;
   rec.Fsigma = r.Fsigma;
   rec.gradnorm = r.gradnorm;
   rec.step = step;
   rec.mindet = mindet;
   return rec;
}

/// Two-loop recursion for the L-BFGS direction.
Eigen::VectorXd lbfgs_direction(const Eigen::VectorXd &g, const std::deque<Eigen::VectorXd> &S,
                                const std::deque<Eigen::VectorXd> &Y)
{
   const int m = static_cast<int>(S.size());
   std::vector<double> a(m), rho(m);
   Eigen::VectorXd q = g;
   for (int i = m - 1; i >= 0; i--)
   {
      rho[i] = 1.0 / Y[i].dot(S[i]);
      a[i] = rho[i] * S[i].dot(q);
      q -= a[i] * Y[i];
   }
   if (m > 0) { q *= S[m - 1].dot(Y[m - 1]) / Y[m - 1].squaredNorm(); }
   for (int i = 0; i < m; i++)
   {
      const double b = rho[i] * Y[i].dot(q);
      q += (a[i] - b) * S[i];
   }
   return -q;
}

} // namespace

SolveReport solve(const Objective &obj, NodeVector &x, const SolverConfig &cfg,
                  const IterationCallback &callback)
{
   if (!(cfg.tolerance > 0.0) || !(cfg.backtrack > 0.0 && cfg.backtrack < 1.0))
   {
      throw Error(ErrorKind::InvalidArgument, "solver: tolerance must be positive, backtrack in (0,1)");
   }
   const Mesh &mesh = obj.mesh();
   const ValidityReport v0 = is_valid(mesh, x, obj.quadrature());
   if (!v0.valid)
   {
      throw Error(ErrorKind::NonpositiveDeterminant,
                  "initial mesh invalid at element " + std::to_string(v0.worst_element));
   }

   const int deriv = cfg.method == Method::Newton ? 2 : 1;
   SolveReport rep;
   Evaluation ev = obj.evaluate(x, deriv);
   rep.initial_gradnorm = ev.report.gradnorm;
   rep.history.push_back(record(0, ev.report, 0.0, v0.min_det));
   if (callback) { callback(x, rep.history.back()); }

   auto ratio = [&](double gn) { return rep.initial_gradnorm > 0.0 ? gn / rep.initial_gradnorm : 0.0; };
   rep.ratio = ratio(ev.report.gradnorm);
   if (rep.initial_gradnorm <= cfg.zero_gradient)
   {
      rep.ratio = 0.0;
      rep.reason = Termination::Converged;
      return rep;
   }

   std::deque<Eigen::VectorXd> S, Y;
   for (int it = 1; it <= cfg.max_iterations; it++)
   {
      Eigen::VectorXd p;
      if (cfg.method == Method::Newton)
      {
         Direction dir = newton_step(ev.hessian, ev.gradient, cfg);
         rep.fallbacks += dir.fallback ? 1 : 0;
         p = std::move(dir.p);
      }
      else
      {
         p = lbfgs_direction(ev.gradient, S, Y);
         if (!(p.dot(ev.gradient) < 0.0))
         {
            p = -ev.gradient;
            S.clear();
            Y.clear();
            rep.fallbacks++;
         }
      }
      obj.apply_mask(p);

      LineSearchResult ls = line_search(obj, x, p, ev.gradient, ev.report.F, cfg);
      if (!ls.accepted && cfg.method == Method::LBFGS && !S.empty())
      {
         // retry once along the gradient with the memory discarded
         S.clear();
         Y.clear();
         p = -ev.gradient;
         rep.fallbacks++;
         ls = line_search(obj, x, p, ev.gradient, ev.report.F, cfg);
      }
      if (!ls.accepted)
      {
         rep.reason = Termination::LineSearchFailure;
         return rep;
      }

      Evaluation next = obj.evaluate(ls.x, deriv);
      if (cfg.method == Method::LBFGS)
      {
         Eigen::VectorXd s = ls.x - x, y = next.gradient - ev.gradient;
         if (s.dot(y) > 1e-12 * s.norm() * y.norm())
         {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            if (static_cast<int>(S.size()) > cfg.lbfgs_memory)
            {
               S.pop_front();
               Y.pop_front();
            }
         }
      }
      x = std::move(ls.x);
      ev = std::move(next);
      rep.iterations = it;
      rep.history.push_back(record(it, ev.report, ls.alpha, ls.mindet));
      if (callback) { callback(x, rep.history.back()); }

      rep.ratio = ratio(ev.report.gradnorm);
      if (rep.ratio <= cfg.tolerance)
      {
         rep.reason = Termination::Converged;
         return rep;
      }
   }
   rep.reason = Termination::MaxIterations;
   return rep;
}

void write_history_csv(std::ostream &os, const SolveReport &report)
{
   os << "iter,F,Fmu,Fsigma,gradnorm,step,mindet\n";
   os.precision(17);
   for (const auto &r : report.history)
   {
      os << r.iter << ',' << r.F << ',' << r.Fmu << ',' << r.Fsigma << ',' << r.gradnorm << ','
         << r.step << ',' << r.mindet << '\n';
   }
}

} // namespace tmopfit
