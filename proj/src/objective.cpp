#include "tmopfit/objective.hpp"

#include "tmopfit/error.hpp"

#include <algorithm>
#include <string>

namespace tmopfit
{

Objective::Objective(const Mesh &mesh, TargetJacobian targets, QuadratureRule quad,
                     MetricSpec metric)
   : mesh_(&mesh), targets_(std::move(targets)), quad_(std::move(quad)), metric_(metric),
     tab_(tabulate(mesh.basis(), quad_.points)), fixed_(mesh.num_dofs(), false)
{
   if (targets_.num_elements() != mesh.num_elements())
   {
      throw Error(ErrorKind::InvalidArgument, "objective: one target per element expected");
   }
   if (!metric_defined_in(metric.id, mesh.dim()))
   {
      throw Error(ErrorKind::InvalidArgument,
                  to_string(metric.id) + " is not defined in " + std::to_string(mesh.dim()) + "D");
   }
   build_pattern();
}

void Objective::build_pattern()
{
   const Mesh &mesh = *mesh_;
   const int N = mesh.num_nodes();
   const int d = mesh.dim();
   std::vector<std::vector<int>> adj(N);
   for (const auto &el : mesh.elements())
   {
      for (int i : el.nodes) { adj[i].insert(adj[i].end(), el.nodes.begin(), el.nodes.end()); }
   }
   degree_.resize(N);
   for (int i = 0; i < N; i++)
   {
      std::sort(adj[i].begin(), adj[i].end());
      adj[i].erase(std::unique(adj[i].begin(), adj[i].end()), adj[i].end());
      degree_[i] = static_cast<int>(adj[i].size());
   }

   const int n = d * N;
   std::vector<int> outer(n + 1, 0);
   for (int b = 0; b < d; b++)
      for (int j = 0; j < N; j++) { outer[b * N + j + 1] = d * degree_[j]; }
   for (int c = 0; c < n; c++) { outer[c + 1] += outer[c]; }
   std::vector<int> inner(outer[n]);
   for (int b = 0; b < d; b++)
      for (int j = 0; j < N; j++)
      {
         int pos = outer[b * N + j];
         for (int a = 0; a < d; a++)
            for (int k : adj[j]) { inner[pos++] = a * N + k; }
      }
   const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(outer[n]);
   pattern_ = Eigen::Map<const SparseMatrix>(n, n, outer[n], outer.data(), inner.data(), zeros.data());

   const int nb = mesh.basis().size();
   rank_.resize(mesh.num_elements());
   for (int e = 0; e < mesh.num_elements(); e++)
   {
      const auto &nodes = mesh.element(e).nodes;
      rank_[e].resize(nb * nb);
      for (int j = 0; j < nb; j++)
      {
         const auto &aj = adj[nodes[j]];
         for (int i = 0; i < nb; i++)
         {
            rank_[e][i + nb * j] =
               static_cast<int>(std::lower_bound(aj.begin(), aj.end(), nodes[i]) - aj.begin());
         }
      }
   }
}

void Objective::set_penalty(std::shared_ptr<FittingPenalty> penalty, PenaltyHessianMode mode)
{
   penalty_ = std::move(penalty);
   penalty_mode_ = mode;
   set_mask(fixed_);
}

void Objective::set_mask(std::vector<bool> fixed)
{
   if (static_cast<int>(fixed.size()) != mesh_->num_dofs())
   {
      throw Error(ErrorKind::InvalidArgument, "objective: mask length must be d * N_x");
   }
   fixed_ = std::move(fixed);
   if (penalty_)
   {
      std::vector<int> held;
      for (int i = 0; i < mesh_->num_nodes(); i++)
      {
         bool all = true;
         for (int a = 0; a < mesh_->dim(); a++) { all = all && fixed_[dof_index(*mesh_, a, i)]; }
         if (all) { held.push_back(i); }
      }
      penalty_->set_fixed_nodes(held);
   }
}

void Objective::fix_nodes(const std::vector<int> &nodes)
{
   std::vector<bool> m = fixed_;
   for (int n : nodes)
   {
      for (int a = 0; a < mesh_->dim(); a++) { m[dof_index(*mesh_, a, n)] = true; }
   }
   set_mask(std::move(m));
}

void Objective::apply_mask(Eigen::VectorXd &v) const
{
   for (int i = 0; i < v.size(); i++)
   {
      if (fixed_[i]) { v(i) = 0.0; }
   }
}

void Objective::assemble_mu(const NodeVector &x, int deriv, Evaluation &out) const
{
   const Mesh &mesh = *mesh_;
   const int d = mesh.dim();
   const int nb = mesh.basis().size();
   const int ne = mesh.num_elements();
   out.report.worst_mu = Eigen::VectorXd::Zero(ne);
   const int N = mesh.num_nodes();
   const int *outer = out.hessian.outerIndexPtr();
   double *val = out.hessian.valuePtr();

   Eigen::MatrixXd Ke(d * nb, d * nb), Hab(d, d);
   for (int e = 0; e < ne; e++)
   {
      const Eigen::MatrixXd X = element_coords(mesh, x, e);
      const auto &nodes = mesh.element(e).nodes;
      const Eigen::MatrixXd &Winv = targets_.Winv[e];
      const double detW = targets_.det[e];
      Eigen::MatrixXd Pe = Eigen::MatrixXd::Zero(d, nb);
      if (deriv >= 2) { Ke.setZero(); }
      double worst = 0.0;

      for (int q = 0; q < quad_.size(); q++)
      {
         const Eigen::MatrixXd A = X * tab_.grads[q];
         const double detA = A.determinant();
         if (!(detA > 0.0))
         {
            throw Error(ErrorKind::NonpositiveDeterminant,
                        "element " + std::to_string(e) + ": det A = " + std::to_string(detA));
         }
         const MatrixX<double> T = A * Winv;
         const auto m = tmopfit::metric<double>(metric_, T, deriv);
         const double w = quad_.weights(q) * detW;
         out.report.Fmu += w * m.value;
         worst = std::max(worst, m.value);
         if (deriv < 1) { continue; }

         // dT/dX_{a,i} = e_a D_i^T with D = G W^-1
         const Eigen::MatrixXd D = tab_.grads[q] * Winv;
         Pe.noalias() += w * m.first * D.transpose();
         if (deriv < 2) { continue; }
         for (int a = 0; a < d; a++)
            for (int b = 0; b < d; b++)
            {
               for (int c = 0; c < d; c++)
                  for (int f = 0; f < d; f++) { Hab(c, f) = m.second(a + c * d, b + f * d); }
               Ke.block(a * nb, b * nb, nb, nb).noalias() += w * D * Hab * D.transpose();
            }
      }
      out.report.worst_mu(e) = worst;

      if (deriv >= 1)
      {
         for (int a = 0; a < d; a++)
            for (int i = 0; i < nb; i++) { out.gradient(dof_index(mesh, a, nodes[i])) += Pe(a, i); }
      }
      if (deriv >= 2)
      {
         const std::vector<int> &rank = rank_[e];
         for (int b = 0; b < d; b++)
            for (int j = 0; j < nb; j++)
            {
               const int start = outer[b * N + nodes[j]];
               const int deg = degree_[nodes[j]];
               for (int a = 0; a < d; a++)
                  for (int i = 0; i < nb; i++)
                  {
                     val[start + a * deg + rank[i + nb * j]] += Ke(a * nb + i, b * nb + j);
                  }
            }
      }
   }
}

Evaluation Objective::evaluate(const NodeVector &x, int deriv) const
{
   const int n = mesh_->num_dofs();
   if (x.size() != n) { throw Error(ErrorKind::InvalidArgument, "objective: wrong node vector size"); }
   Evaluation out;
   if (deriv >= 1) { out.gradient = Eigen::VectorXd::Zero(n); }
   if (deriv >= 2) { out.hessian = pattern_; }
   assemble_mu(x, deriv, out);
   std::vector<Eigen::Triplet<double>> trip;

   if (penalty_)
   {
      const bool want_hess = deriv >= 2 && penalty_mode_ == PenaltyHessianMode::Analytic;
      out.samples = penalty_->sample(x, want_hess);
      out.report.Fsigma = penalty_->value(out.samples);
      if (deriv >= 1 && penalty_->weight() != 0.0) { out.gradient += penalty_->gradient(out.samples); }
      if (deriv >= 2) { penalty_->hessian(x, out.samples, penalty_mode_, trip); }
   }
   out.report.F = out.report.Fmu + out.report.Fsigma;

   if (deriv >= 1)
   {
      apply_mask(out.gradient);
      out.report.gradnorm = out.gradient.norm();
   }
   if (deriv >= 2)
   {
      if (!trip.empty())
      {
         SparseMatrix P(n, n);
         P.setFromTriplets(trip.begin(), trip.end());
         out.hessian += P;
      }
      // masked rows and columns become those of the identity
      for (int c = 0; c < n; c++)
      {
         for (SparseMatrix::InnerIterator it(out.hessian, c); it; ++it)
         {
            if (fixed_[c] || fixed_[it.row()]) { it.valueRef() = it.row() == c ? 1.0 : 0.0; }
         }
      }
   }
   return out;
}

} // namespace tmopfit
