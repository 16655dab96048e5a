#include "tmopfit/fitting.hpp"

#include "tmopfit/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tmopfit
{

MarkedSet mark_interface_nodes(const Mesh &mesh)
{
   MarkedSet S;
   for (const auto &f : mesh.faces())
   {
      if (f.elem1 < 0) { continue; }
      if (mesh.element(f.elem0).attribute != mesh.element(f.elem1).attribute)
      {
         S.insert(S.end(), f.nodes.begin(), f.nodes.end());
      }
   }
   std::sort(S.begin(), S.end());
   S.erase(std::unique(S.begin(), S.end()), S.end());
   if (S.empty())
   {
      throw Error(ErrorKind::EmptyMarkedSet, "no faces between elements of different attributes");
   }
   return S;
}

MarkedSet mark_interface_nodes(Mesh &mesh, const NodeVector &x, const ScalarField &sigma)
{
   const Eigen::VectorXd c = mesh.basis().center();
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      mesh.set_attribute(e, eval(sigma, mesh, x, e, c) < 0.0 ? 1 : 2);
   }
   return mark_interface_nodes(mesh);
}

ScalarField restrict_field(const ScalarField &sigma, const MarkedSet &S)
{
   ScalarField r;
   r.coeffs = Eigen::VectorXd::Zero(sigma.coeffs.size());
   for (int s : S) { r.coeffs(s) = sigma.coeffs(s); }
   return r;
}

SigmaSample AnalyticSigma::sample(const Eigen::Ref<const Eigen::VectorXd> &p, bool hessian) const
{
   SigmaSample s;
   s.value = ls_->value(p);
   s.grad = ls_->gradient(p);
   if (hessian) { s.hess = ls_->hessian(p); }
   return s;
}

DiscreteSigma::DiscreteSigma(const Mesh &mesh0, const NodeVector &x0, ScalarField sigma0,
                             SecondDerivative second)
   : mesh_(&mesh0), sigma0_(std::move(sigma0)), loc_(mesh0, x0), second_(second)
{
   if (second_ == SecondDerivative::DiscreteGradient)
   {
      const int d = mesh0.dim();
      const auto g = discrete_gradient(sigma0_, mesh0, x0);
      dd_.resize(d * d);
      for (int a = 0; a < d; a++)
      {
         const auto gg = discrete_gradient(g[a], mesh0, x0);
         for (int b = 0; b < d; b++) { dd_[a + d * b] = gg[b]; }
      }
   }
}

SigmaSample DiscreteSigma::sample(const Eigen::Ref<const Eigen::VectorXd> &p, bool hessian) const
{
   std::vector<PointLocation> locs = loc_.locate_all(p);
   if (locs.empty())
   {
      PointLocation l = loc_.locate(p);
      if (l.status == LocationStatus::NotFound)
      {
         std::ostringstream ss;
         ss << "marked node left the initial domain at (" << p.transpose() << "), distance "
            << l.distance;
         throw Error(ErrorKind::TransferFailure, ss.str());
      }
      locs.push_back(std::move(l));
   }
   const int d = mesh_->dim();
   const bool element_hess = hessian && second_ == SecondDerivative::Element;
   SigmaSample s;
   s.grad = Eigen::VectorXd::Zero(d);
   if (hessian) { s.hess = Eigen::MatrixXd::Zero(d, d); }
   for (std::size_t k = 0; k < locs.size(); k++)
   {
      const auto fs = eval_all(sigma0_, *mesh_, loc_.nodes(), locs[k].element, locs[k].ref,
                               element_hess);
      if (k == 0) { s.value = fs.value; }
      s.grad += fs.grad;
      if (element_hess) { s.hess += fs.hess; }
      else if (hessian)
      {
         for (int ab = 0; ab < d * d; ab++)
         {
            s.hess.data()[ab] +=
               eval(dd_[ab], *mesh_, loc_.nodes(), locs[k].element, locs[k].ref);
         }
      }
   }
   const double n = static_cast<double>(locs.size());
   s.grad /= n;
   if (hessian) { s.hess = (0.5 / n) * (s.hess + s.hess.transpose()); }
   return s;
}

double penalty_normalization(const TargetJacobian &targets, const Mesh &mesh)
{
   if (!targets.volumetric()) { return 1.0 / mesh.num_elements(); }
   const double vref = reference_volume(mesh.geometry());
   double v = 0.0;
   for (double det : targets.det) { v += vref * det; }
   return 1.0 / v;
}

double penalty_value(double weight, double normalization, const ScalarField &sigma_bar,
                     const Mesh &mesh, const TargetJacobian &targets,
                     const QuadratureRule &quad)
{
   const BasisTable tab = tabulate(mesh.basis(), quad.points);
   double sum = 0.0;
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const auto &nodes = mesh.element(e).nodes;
      Eigen::VectorXd c(nodes.size());
      for (std::size_t i = 0; i < nodes.size(); i++) { c(i) = sigma_bar.coeffs(nodes[i]); }
      if (c.isZero(0.0)) { continue; }
      const Eigen::VectorXd v = tab.values.transpose() * c;
      sum += targets.det[e] * quad.weights.dot(v.cwiseAbs2());
   }
   return weight * normalization * sum;
}

FittingPenalty::FittingPenalty(const Mesh &mesh, const TargetJacobian &targets,
                               const QuadratureRule &quad, MarkedSet S, double weight,
                               std::shared_ptr<const SigmaSource> source)
   : mesh_(&mesh), S_(std::move(S)), weight_(weight), c_(penalty_normalization(targets, mesh)),
     source_(std::move(source))
{
   if (S_.empty()) { throw Error(ErrorKind::EmptyMarkedSet, "fitting penalty needs marked nodes"); }
   const int ns = static_cast<int>(S_.size());
   std::vector<int> pos(mesh.num_nodes(), -1);
   for (int k = 0; k < ns; k++)
   {
      if (S_[k] < 0 || S_[k] >= mesh.num_nodes())
      {
         throw Error(ErrorKind::InvalidArgument, "marked node index out of range");
      }
      pos[S_[k]] = k;
   }

   const BasisTable tab = tabulate(mesh.basis(), quad.points);
   std::vector<Eigen::Triplet<double>> trip;
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const auto &nodes = mesh.element(e).nodes;
      std::vector<int> loc, glob;
      for (std::size_t i = 0; i < nodes.size(); i++)
      {
         if (pos[nodes[i]] >= 0)
         {
            loc.push_back(static_cast<int>(i));
            glob.push_back(pos[nodes[i]]);
         }
      }
      if (loc.empty()) { continue; }
      for (std::size_t i = 0; i < loc.size(); i++)
      {
         for (std::size_t j = 0; j < loc.size(); j++)
         {
            double m = 0.0;
            for (int q = 0; q < quad.size(); q++)
            {
               m += quad.weights(q) * tab.values(loc[i], q) * tab.values(loc[j], q);
            }
            trip.emplace_back(glob[i], glob[j], targets.det[e] * m);
         }
      }
   }
   M_.resize(ns, ns);
   M_.setFromTriplets(trip.begin(), trip.end());
   M_.makeCompressed();

   // characteristic ideal element size for differencing
   fd_step_ = 1e-6 * std::pow(reference_volume(mesh.geometry()) * targets.det[0], 1.0 / mesh.dim());
}

FittingPenalty::Samples FittingPenalty::sample(const NodeVector &x, bool hessian) const
{
   const int d = mesh_->dim();
   const int ns = static_cast<int>(S_.size());
   Samples s;
   s.value.resize(ns);
   s.grad.resize(d, ns);
   if (hessian) { s.hess.resize(ns); }
   for (int k = 0; k < ns; k++)
   {
      SigmaSample ss = source_->sample(node_position(*mesh_, x, S_[k]), hessian);
      s.value(k) = ss.value;
      s.grad.col(k) = ss.grad;
      if (hessian) { s.hess[k] = std::move(ss.hess); }
   }
   return s;
}

double FittingPenalty::value(const Samples &s) const
{
   return weight_ * c_ * s.value.dot(M_ * s.value);
}

Eigen::VectorXd FittingPenalty::gradient(const Samples &s) const
{
   const int d = mesh_->dim();
   Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh_->num_dofs());
   const Eigen::VectorXd r = 2.0 * weight_ * c_ * (M_ * s.value);
   for (std::size_t k = 0; k < S_.size(); k++)
   {
      for (int a = 0; a < d; a++) { g(dof_index(*mesh_, a, S_[k])) = r(k) * s.grad(a, k); }
   }
   return g;
}

void FittingPenalty::hessian(const NodeVector &x, const Samples &s, PenaltyHessianMode mode,
                             std::vector<Eigen::Triplet<double>> &out) const
{
   const int d = mesh_->dim();
   const double k2 = 2.0 * weight_ * c_;
   if (weight_ == 0.0) { return; }
   const Eigen::VectorXd Ms = M_ * s.value;
   auto is_fixed = [&](std::size_t k) { return !fixed_.empty() && fixed_[k]; };

   if (mode == PenaltyHessianMode::Analytic)
   {
      if (s.hess.size() != S_.size())
      {
         throw Error(ErrorKind::InvalidArgument, "analytic penalty Hessian needs sampled Hessians");
      }
      for (int col = 0; col < M_.outerSize(); col++)
      {
         for (Eigen::SparseMatrix<double>::InnerIterator it(M_, col); it; ++it)
         {
            const int si = static_cast<int>(it.row()), ti = static_cast<int>(it.col());
            if (is_fixed(si) || is_fixed(ti)) { continue; }
            const Eigen::MatrixXd blk = k2 * it.value() * s.grad.col(si) * s.grad.col(ti).transpose();
            for (int a = 0; a < d; a++)
               for (int b = 0; b < d; b++)
               {
                  out.emplace_back(dof_index(*mesh_, a, S_[si]), dof_index(*mesh_, b, S_[ti]),
                                   blk(a, b));
               }
         }
      }
      for (std::size_t si = 0; si < S_.size(); si++)
      {
         if (is_fixed(si)) { continue; }
         for (int a = 0; a < d; a++)
            for (int b = 0; b < d; b++)
            {
               out.emplace_back(dof_index(*mesh_, a, S_[si]), dof_index(*mesh_, b, S_[si]),
                                k2 * Ms(si) * s.hess[si](a, b));
            }
      }
      return;
   }

   // central differences of the gradient, one marked node at a time; only
   // gradient entries of nodes coupled through M change
   const double h = fd_step_;
   for (int si = 0; si < M_.outerSize(); si++)
   {
      if (is_fixed(si)) { continue; }
      const Eigen::VectorXd p = node_position(*mesh_, x, S_[si]);
      for (int b = 0; b < d; b++)
      {
         SigmaSample sp, sm;
         {
            Eigen::VectorXd q = p;
            q(b) += h;
            sp = source_->sample(q, false);
            q(b) = p(b) - h;
            sm = source_->sample(q, false);
         }
         const int col = dof_index(*mesh_, b, S_[si]);
         for (Eigen::SparseMatrix<double>::InnerIterator it(M_, si); it; ++it)
         {
            const int ti = static_cast<int>(it.row());
            if (is_fixed(ti)) { continue; }
            Eigen::VectorXd gp, gm;
            if (ti == si)
            {
               gp = k2 * (Ms(si) + it.value() * (sp.value - s.value(si))) * sp.grad;
               gm = k2 * (Ms(si) + it.value() * (sm.value - s.value(si))) * sm.grad;
            }
            else
            {
               gp = k2 * (Ms(ti) + it.value() * (sp.value - s.value(si))) * s.grad.col(ti);
               gm = k2 * (Ms(ti) + it.value() * (sm.value - s.value(si))) * s.grad.col(ti);
            }
            const Eigen::VectorXd dcol = (gp - gm) / (2.0 * h);
            for (int a = 0; a < d; a++)
            {
               const int row = dof_index(*mesh_, a, S_[ti]);
               out.emplace_back(row, col, 0.5 * dcol(a));
               out.emplace_back(col, row, 0.5 * dcol(a));
            }
         }
      }
   }
}

void FittingPenalty::set_fixed_nodes(const std::vector<int> &nodes)
{
   fixed_.assign(S_.size(), 0);
   for (int n : nodes)
   {
      const auto it = std::lower_bound(S_.begin(), S_.end(), n);
      if (it != S_.end() && *it == n) { fixed_[it - S_.begin()] = 1; }
   }
}

Eigen::SparseMatrix<double> FittingPenalty::hessian(const NodeVector &x, const Samples &s,
                                                    PenaltyHessianMode mode) const
{
   std::vector<Eigen::Triplet<double>> trip;
   hessian(x, s, mode, trip);
   Eigen::SparseMatrix<double> H(mesh_->num_dofs(), mesh_->num_dofs());
   H.setFromTriplets(trip.begin(), trip.end());
   return H;
}

ScalarField FittingPenalty::restricted(const Samples &s) const
{
   ScalarField f;
   f.coeffs = Eigen::VectorXd::Zero(mesh_->num_nodes());
   for (std::size_t k = 0; k < S_.size(); k++) { f.coeffs(S_[k]) = s.value(k); }
   return f;
}

} // namespace tmopfit
